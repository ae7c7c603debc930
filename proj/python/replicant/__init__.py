"""Bindings for the replicated key-value store core."""

import json

from ._core import (
    Ballot,
    BudgetExceeded,
    Command,
    CommandResult,
    EmptySample,
    Histogram,
    KVStore,
    WireError,
    Zipfian,
    base64_decode,
    base64_encode,
    check_linearizable,
    encode_message,
    zipf_pmf,
)
from . import _core


def simulate(seed=1, peers=3, drop=0.0, delay_min_ms=1.0, delay_max_ms=10.0,
             horizon_ms=10000.0, scenario=None):
    """Runs one simulation and returns the report as a dict."""
    if isinstance(scenario, dict):
        scenario = json.dumps(scenario)
    return json.loads(_core.simulate(seed, peers, drop, delay_min_ms, delay_max_ms,
                                     horizon_ms, scenario))


def simulate_sweep_seed(seed):
    """Runs the randomized fault schedule for `seed` and returns the report."""
    return json.loads(_core.simulate_sweep_seed(seed))


__all__ = [
    "Ballot", "BudgetExceeded", "Command", "CommandResult", "EmptySample", "Histogram",
    "KVStore", "WireError", "Zipfian", "base64_decode", "base64_encode",
    "check_linearizable", "encode_message", "simulate", "simulate_sweep_seed", "zipf_pmf",
]
