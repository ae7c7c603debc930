import collections
import json

import pytest

import replicant


def test_kvstore_put_get_delete():
    store = replicant.KVStore()
    assert store.execute(replicant.Command.get("k")) == replicant.KVStore().execute(
        replicant.Command.get("other"))
    assert store.execute(replicant.Command.put("k", "v")).ok
    got = store.execute(replicant.Command.get("k"))
    assert got.ok and got.value == "v"
    assert len(store) == 1
    assert store.execute(replicant.Command.delete("k")).ok
    assert not store.execute(replicant.Command.get("k")).ok
    assert store.contents() == {}


def test_ballot_layout():
    b = replicant.Ballot.make(3, 1)
    assert b.raw == 3 * 256 + 1
    assert (b.round, b.peer, b.leader) == (3, 1, 1)
    assert replicant.Ballot().leader is None
    assert replicant.Ballot.make(1, 5) < replicant.Ballot.make(2, 0)


def test_wire_roundtrip_and_errors():
    line = replicant.encode_message('{"type":"prepare","tag":7,"from":2,"ballot":258}')
    assert line.endswith("\n") and line.count("\n") == 1
    assert json.loads(line) == {"type": "prepare", "tag": 7, "from": 2, "ballot": 258}
    assert replicant.encode_message(line.strip()) == line
    with pytest.raises(replicant.WireError):
        replicant.encode_message('{"type":"warp","tag":1,"from":0,"ballot":1}')
    assert replicant.base64_encode(b"foobar") == "Zm9vYmFy"
    assert replicant.base64_decode("Zm9vYg==") == b"foob"


def test_zipf_hottest_rank():
    draws = replicant.Zipfian(100, 0.99).sample(200_000, seed=3)
    counts = collections.Counter(draws)
    assert min(draws) >= 1 and max(draws) <= 100
    harmonic = sum(r ** -0.99 for r in range(1, 101))
    assert replicant.zipf_pmf(100, 0.99, 1) == pytest.approx(1 / harmonic)
    assert counts[1] / len(draws) == pytest.approx(1 / harmonic, rel=0.03)


def test_histogram_nearest_rank():
    h = replicant.Histogram()
    with pytest.raises(replicant.EmptySample):
        h.percentile(0.5)
    for v in range(1, 101):
        h.record(v)
    assert h.count == 100
    assert (h.min, h.max) == (1, 100)
    assert h.percentile(0.5) == 50
    assert h.percentile(0.99) == 99


def test_simulation_is_deterministic_and_safe():
    a = replicant.simulate(seed=4, horizon_ms=3000)
    b = replicant.simulate(seed=4, horizon_ms=3000)
    assert a == b
    assert a["passed"]
    assert replicant.simulate_sweep_seed(2)["passed"]


def test_scenario_document():
    report = replicant.simulate(scenario={"seed": 9, "peers": 5, "horizon_ms": 2000})
    assert report["seed"] == 9 and report["peers"] == 5


def op(i, kind, key, invoke, complete, result, value=None):
    d = {"id": i, "kind": kind, "key": key, "invoke_ns": invoke, "complete_ns": complete,
         "result": result}
    if value is not None:
        d["value"] = value
    return d


def test_check_linearizable():
    good = [op(1, "put", "k", 0, 10, {"ok": True}, value="1"),
            op(2, "get", "k", 20, 30, {"ok": True, "value": "1"})]
    assert replicant.check_linearizable(good) == (True, [1, 2], "")
    stale = good + [op(3, "put", "k", 40, 50, {"ok": True}, value="2"),
                    op(4, "get", "k", 60, 70, {"ok": True, "value": "1"})]
    ok, _, conflict = replicant.check_linearizable(stale)
    assert not ok and conflict
    with pytest.raises(replicant.BudgetExceeded):
        replicant.check_linearizable(good, budget=1)
