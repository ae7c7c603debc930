#include <optional>
#include <random>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "replicant/command.h"
#include "replicant/kvstore.h"
#include "replicant/loadgen/histogram.h"
#include "replicant/loadgen/zipfian.h"
#include "replicant/sim/linearizability.h"
#include "replicant/sim/sim.h"
#include "replicant/types.h"
#include "replicant/wire.h"

namespace py = pybind11;

namespace replicant {
namespace {

Command MakeCommand(std::string const& kind, std::string key, std::string value) {
  auto k = ParseCommandKind(kind);
  if (!k)
    throw py::value_error("unknown command kind: " + kind);
  switch (*k) {
    case CommandKind::kGet: return Command::Get(std::move(key));
    case CommandKind::kPut: return Command::Put(std::move(key), std::move(value));
    case CommandKind::kDel: return Command::Del(std::move(key));
    default: return Command::Noop();
  }
}

// Each op: {id, kind, key, value?, invoke_ns, complete_ns?, result?} where
// result is {ok, value?}; a missing result means the outcome is unknown.
std::vector<sim::HistoryOp> ToHistory(py::list const& ops) {
  std::vector<sim::HistoryOp> out;
  for (auto const& item : ops) {
    auto d = item.cast<py::dict>();
    sim::HistoryOp op;
    op.id = d["id"].cast<std::uint64_t>();
    op.command = MakeCommand(d["kind"].cast<std::string>(), d["key"].cast<std::string>(),
                             d.contains("value") ? d["value"].cast<std::string>() : "");
    op.invoke = Nanos(d["invoke_ns"].cast<std::int64_t>());
    if (d.contains("complete_ns") && !d["complete_ns"].is_none())
      op.complete = Nanos(d["complete_ns"].cast<std::int64_t>());
    if (d.contains("result") && !d["result"].is_none()) {
      auto r = d["result"].cast<py::dict>();
      CommandResult result;
      result.ok = r["ok"].cast<bool>();
      if (r.contains("value") && !r["value"].is_none())
        result.value = r["value"].cast<std::string>();
      op.result = result;
    }
    out.push_back(std::move(op));
  }
  return out;
}

std::string Simulate(std::uint64_t seed, std::size_t peers, double drop, double delay_min_ms,
                     double delay_max_ms, double horizon_ms,
                     std::optional<std::string> const& scenario) {
  sim::SimParams p;
  p.seed = seed;
  p.peers = peers;
  p.drop = drop;
  auto ms = [](double v) { return Nanos(static_cast<std::int64_t>(v * 1e6)); };
  p.delay_min = ms(delay_min_ms);
  p.delay_max = ms(delay_max_ms);
  p.horizon = ms(horizon_ms);
  if (scenario)
    sim::ApplyScenario(*scenario, p);
  py::gil_scoped_release release;
  return sim::RunSimulation(p).ToJson();
}

}  // namespace
}  // namespace replicant

PYBIND11_MODULE(_core, m) {
  using namespace replicant;
  m.doc() = "Replicated key-value store: core operations";

  py::class_<CommandResult>(m, "CommandResult")
      .def_readonly("ok", &CommandResult::ok)
      .def_readonly("value", &CommandResult::value)
      .def("__eq__", [](CommandResult const& a, CommandResult const& b) { return a == b; })
      .def("__repr__", [](CommandResult const& r) {
        return "CommandResult(ok=" + std::string(r.ok ? "True" : "False") +
               (r.value ? ", value='" + *r.value + "')" : ")");
      });

  py::class_<Command>(m, "Command")
      .def_static("get", &Command::Get, py::arg("key"))
      .def_static("put", &Command::Put, py::arg("key"), py::arg("value"))
      .def_static("delete", &Command::Del, py::arg("key"))
      .def_property_readonly("kind", [](Command const& c) { return std::string(ToString(c.kind)); })
      .def_readonly("key", &Command::key)
      .def_readonly("value", &Command::value);

  py::class_<KVStore>(m, "KVStore")
      .def(py::init<>())
      .def("execute", &KVStore::Execute, py::arg("command"))
      .def("__len__", &KVStore::Size)
      .def("contents", &KVStore::Contents);

  py::class_<Ballot>(m, "Ballot")
      .def(py::init<std::uint64_t>(), py::arg("raw") = 0)
      .def_static("make", &Ballot::Make, py::arg("round"), py::arg("peer"))
      .def_property_readonly("raw", &Ballot::raw)
      .def_property_readonly("round", &Ballot::round)
      .def_property_readonly("peer", &Ballot::peer)
      .def_property_readonly("leader", &Ballot::Leader)
      .def("__lt__", [](Ballot a, Ballot b) { return a < b; })
      .def("__eq__", [](Ballot a, Ballot b) { return a == b; });

  m.def("encode_message", [](std::string const& line) { return EncodeMessage(DecodeMessage(line)); },
        py::arg("line"), "Decode a peer message line and re-encode it canonically.");
  m.def("base64_encode", [](py::bytes b) { return Base64Encode(std::string(b)); });
  m.def("base64_decode", [](std::string const& s) { return py::bytes(Base64Decode(s)); });
  py::register_exception<WireError>(m, "WireError", PyExc_ValueError);

  py::class_<loadgen::ZipfianGenerator>(m, "Zipfian")
      .def(py::init<std::uint64_t, double>(), py::arg("n"), py::arg("theta") = 0.99)
      .def("sample",
           [](loadgen::ZipfianGenerator const& z, std::size_t count, std::uint64_t seed) {
             std::mt19937_64 rng(seed);
             std::vector<std::uint64_t> out(count);
             for (auto& r : out)
               r = z.NextRank(rng);
             return out;
           },
           py::arg("count"), py::arg("seed") = 1);
  m.def("zipf_pmf", &loadgen::ZipfPmf, py::arg("n"), py::arg("theta"), py::arg("rank"));

  py::register_exception<loadgen::EmptySample>(m, "EmptySample", PyExc_ValueError);
  py::class_<loadgen::Histogram>(m, "Histogram")
      .def(py::init<>())
      .def("record", &loadgen::Histogram::Record, py::arg("value"))
      .def("merge", &loadgen::Histogram::Merge)
      .def_property_readonly("count", &loadgen::Histogram::Count)
      .def_property_readonly("min", &loadgen::Histogram::Min)
      .def_property_readonly("max", &loadgen::Histogram::Max)
      .def("percentile", &loadgen::Histogram::ValueAtPercentile, py::arg("p"));

  m.def("simulate", &Simulate, py::arg("seed") = 1, py::arg("peers") = 3, py::arg("drop") = 0.0,
        py::arg("delay_min_ms") = 1.0, py::arg("delay_max_ms") = 10.0,
        py::arg("horizon_ms") = 10000.0, py::arg("scenario") = std::nullopt,
        "Run one deterministic simulation; returns the report as JSON text.");
  m.def("simulate_sweep_seed",
        [](std::uint64_t seed) {
          auto p = sim::SweepParams(seed);
          py::gil_scoped_release release;
          return sim::RunSimulation(p).ToJson();
        },
        py::arg("seed"));

  py::register_exception<sim::BudgetExceeded>(m, "BudgetExceeded", PyExc_RuntimeError);
  m.def("check_linearizable",
        [](py::list const& ops, std::size_t budget) {
          auto v = sim::CheckLinearizable(ToHistory(ops), budget);
          return py::make_tuple(v.linearizable, v.witness, v.conflict);
        },
        py::arg("history"), py::arg("budget") = sim::kDefaultHistoryBudget,
        "Returns (linearizable, witness op ids, conflict description).");
}
