// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// nonzero if any selected criterion fails. `--only N` runs criterion N alone.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>

#include "replicant/loadgen/client.h"
#include "replicant/loadgen/driver.h"
#include "replicant/loadgen/report.h"
#include "replicant/loadgen/search.h"
#include "replicant/loadgen/stub.h"
#include "replicant/loadgen/zipfian.h"
#include "replicant/sim/linearizability.h"
#include "replicant/sim/sim.h"
#include "replicant/wire.h"
#include "support/generators.h"
#include "support/line_client.h"
#include "support/process.h"

namespace replicant {
namespace {

using namespace std::chrono_literals;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Ms(Nanos n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f ms", static_cast<double>(n.count()) / 1e6);
  return buf;
}
std::string Ms(std::uint64_t ns) { return Ms(Nanos(static_cast<std::int64_t>(ns))); }

constexpr std::uint64_t kSweepSeeds = 1000;

// 1. Safety sweep.
Outcome SafetySweep() {
  std::size_t failed = 0;
  std::string first;
  std::set<std::size_t> peer_counts;
  std::set<double> drops;
  for (std::uint64_t seed = 1; seed <= kSweepSeeds; ++seed) {
    auto params = sim::SweepParams(seed);
    peer_counts.insert(params.peers);
    drops.insert(params.drop);
    auto r = sim::RunSimulation(params);
    bool ok = r.agreement_violations.empty() && r.trim_violations.empty() &&
              r.prefix_divergences.empty() && r.ballot_violations.empty() &&
              r.errors.empty();
    if (!ok && failed++ == 0)
      first = r.ToJson();
  }
  bool coverage = peer_counts == std::set<std::size_t>{3, 5} &&
                  drops == std::set<double>{0.0, 0.1, 0.3};
  if (!coverage)
    return {false, "sweep does not cover 3/5 peers and drops 0/0.1/0.3"};
  if (failed)
    return {false, std::to_string(failed) + " seeds violated safety; first: " + first};
  return {true, std::to_string(kSweepSeeds) + " seeds, no agreement/trim/prefix/ballot violations"};
}

// Values are unique per put in simulated histories, so the op that wrote a
// value is well defined.
struct Corruptor {
  std::string name;
  // Returns false if this history offers no place for the corruption.
  std::function<bool(std::vector<sim::HistoryOp>&)> apply;
};

std::map<std::string, sim::HistoryOp const*> Writers(std::vector<sim::HistoryOp> const& h) {
  std::map<std::string, sim::HistoryOp const*> out;
  for (auto const& op : h)
    if (op.command.kind == CommandKind::kPut)
      out[op.command.value] = &op;
  return out;
}

std::vector<Corruptor> Corruptors() {
  return {
      {"read of a value never written",
       [](std::vector<sim::HistoryOp>& h) {
         for (auto& op : h)
           if (op.command.kind == CommandKind::kGet && op.complete) {
             op.result = CommandResult{true, "never-written"};
             return true;
           }
         return false;
       }},
      {"read returning a value overwritten before it began",
       [](std::vector<sim::HistoryOp>& h) {
         // put(v) completes before put(w) starts, and a get starts after
         // put(w) completes: that get cannot observe v.
         for (auto const& older : h) {
           if (older.command.kind != CommandKind::kPut || !older.complete)
             continue;
           for (auto const& newer : h) {
             if (newer.command.kind != CommandKind::kPut || !newer.complete ||
                 newer.command.key != older.command.key || newer.invoke <= *older.complete)
               continue;
             for (auto& get : h) {
               if (get.command.kind == CommandKind::kGet && get.complete &&
                   get.command.key == older.command.key && get.invoke > *newer.complete) {
                 get.result = CommandResult{true, older.command.value};
                 return true;
               }
             }
           }
         }
         return false;
       }},
      {"read completing before its value's write began",
       [](std::vector<sim::HistoryOp>& h) {
         auto writers = Writers(h);
         for (auto& op : h) {
           if (op.command.kind != CommandKind::kGet || !op.complete || !op.result ||
               !op.result->value)
             continue;
           auto it = writers.find(*op.result->value);
           if (it == writers.end() || it->second->invoke <= Nanos(1))
             continue;
           op.invoke = Nanos(0);
           op.complete = it->second->invoke - Nanos(1);
           return true;
         }
         return false;
       }},
  };
}

// 2. Linearizability of simulated histories plus rejected corruptions.
Outcome Linearizability() {
  constexpr std::uint64_t kHistories = 200;
  std::size_t checked = 0, largest = 0;
  std::vector<std::vector<sim::HistoryOp>> histories;
  for (std::uint64_t seed = 1; seed <= kHistories; ++seed) {
    auto params = sim::SweepParams(seed);
    if (params.crashes.empty() || params.partitions.empty() || params.clients > 8)
      return {false, "seed " + std::to_string(seed) + " is not a faulty seed with concurrency <= 8"};
    sim::Simulation s(params);
    auto r = s.Run();
    if (!r.linearizability_checked || !r.errors.empty())
      return {false, "seed " + std::to_string(seed) + " history not checked: " + r.ToJson()};
    if (!r.linearizability.linearizable)
      return {false, "seed " + std::to_string(seed) + ": " + r.linearizability.conflict};
    if (r.history_size > sim::kDefaultHistoryBudget)
      return {false, "seed " + std::to_string(seed) + " history exceeds 200 ops"};
    largest = std::max(largest, r.history_size);
    ++checked;
    histories.push_back(s.History());
  }
  std::size_t rejected = 0;
  for (auto const& c : Corruptors()) {
    bool built = false;
    for (auto const& h : histories) {
      auto copy = h;
      if (!c.apply(copy))
        continue;
      built = true;
      if (sim::CheckLinearizable(copy).linearizable)
        return {false, "corrupted history accepted: " + c.name};
      ++rejected;
      break;
    }
    if (!built)
      return {false, "no history admits corruption: " + c.name};
  }
  return {true, std::to_string(checked) + " histories linearizable (largest " +
                    std::to_string(largest) + " ops), " + std::to_string(rejected) +
                    "/3 corrupted fixtures rejected"};
}

// 3. Election liveness on every sweep seed.
Outcome Liveness() {
  Nanos worst{0};
  for (std::uint64_t seed = 1; seed <= kSweepSeeds; ++seed) {
    auto params = sim::SweepParams(seed);
    if (!params.check_liveness)
      return {false, "liveness disabled for seed " + std::to_string(seed)};
    auto r = sim::RunSimulation(params);
    if (!r.liveness_violations.empty())
      return {false, "seed " + std::to_string(seed) + ": " + r.liveness_violations.front()};
    if (r.longest_leaderless > 10 * params.election_timeout_base)
      return {false, "seed " + std::to_string(seed) + " leaderless for " + Ms(r.longest_leaderless)};
    worst = std::max(worst, r.longest_leaderless);
  }
  return {true, std::to_string(kSweepSeeds) + " seeds, longest leaderless gap " + Ms(worst) +
                    " (bound 4500 ms)"};
}

// 4. Coordinated omission against the stalling stub.
Outcome CoordinatedOmission() {
  auto run = [](loadgen::Mode mode) {
    loadgen::StubServer stub(loadgen::StubProfile::Parse("co"));
    stub.Start();
    loadgen::RunConfig c;
    c.cluster = {stub.Address()};
    c.mode = mode;
    c.rate = 100;
    c.threads = 1;
    c.duration = 60s;
    c.warmup = 0s;
    return loadgen::Run(c, loadgen::WorkloadSpec::A(1000));
  };
  auto closed = run(loadgen::Mode::kClosed);
  auto open = run(loadgen::Mode::kOpen);
  auto closed_p95 = loadgen::Percentile(closed.samples, 0.95, loadgen::Latency::kService);
  auto open_p95 = loadgen::Percentile(open.samples, 0.95, loadgen::Latency::kIntended);
  auto detail = "closed-loop service p95 " + Ms(closed_p95) + ", open-loop intended p95 " +
                Ms(open_p95);
  return {closed_p95 <= 2'000'000 && open_p95 >= 250'000'000, detail};
}

// 5. Trim freeze during a follower partition and catch-up after heal.
Outcome TrimBehavior() {
  sim::SimParams p;
  p.seed = 11;
  p.peers = 3;
  p.horizon = 12s;
  p.clients = 4;
  p.max_ops = 100000;
  p.think_max = 40ms;
  p.check_linearizability = false;
  Nanos const start = 3s, end = 8s;

  // Identify a follower at the partition instant.
  sim::Simulation probe(p);
  probe.RunUntil(start);
  auto leader = probe.EstablishedLeader();
  if (!leader)
    return {false, "no leader before the partition"};
  PeerId const follower = (*leader + 1) % p.peers;
  p.partitions.push_back({start, end, {follower}, false});

  sim::Simulation s(p);
  Nanos const frozen_from = start + p.commit_interval + p.delay_max;
  Nanos const deadline = end + 2 * (p.election_timeout_base + p.election_jitter_max +
                                    p.commit_interval) +
                         5 * p.commit_interval;
  std::vector<LogIndex> frozen;
  std::string violation;
  s.SetObserver([&](sim::Simulation& sim) {
    if (sim.Now() < frozen_from || sim.Now() >= end || !violation.empty())
      return;
    for (PeerId i = 0; i < sim.NumPeers(); ++i) {
      auto gle = sim.PeerLog(i).Frontiers().global_last_executed;
      if (frozen.size() <= i)
        frozen.push_back(gle);
      else if (gle != frozen[i])
        violation = "peer " + std::to_string(i) + " global_last_executed moved " +
                    std::to_string(frozen[i]) + " -> " + std::to_string(gle) + " at " +
                    Ms(sim.Now());
    }
  });
  if (!s.RunUntil(frozen_from - Nanos(1)))
    return {false, "run halted before the partition"};
  LogIndex const follower_executed = s.PeerLog(follower).Frontiers().last_executed;
  if (!s.RunUntil(end - Nanos(1)))
    return {false, "run halted during the partition"};
  if (!violation.empty())
    return {false, violation};
  if (s.EstablishedLeader() != leader)
    return {false, "leadership changed during the partition"};
  auto const at_heal = s.PeerLog(*leader).Frontiers();
  auto const size_at_heal = s.PeerLog(*leader).Size();
  for (PeerId i = 0; i < p.peers; ++i)
    if (frozen[i] > follower_executed)
      return {false, "peer " + std::to_string(i) + " trimmed past the partitioned follower"};
  if (at_heal.last_executed <= follower_executed + 10)
    return {false, "leader made too little progress during the partition"};

  if (!s.RunUntil(deadline))
    return {false, "run halted after heal"};
  for (PeerId i = 0; i < p.peers; ++i) {
    auto const& log = s.PeerLog(i);
    auto f = log.Frontiers();
    if (f.global_last_executed < at_heal.last_executed)
      return {false, "peer " + std::to_string(i) + " global_last_executed " +
                         std::to_string(f.global_last_executed) + " < " +
                         std::to_string(at_heal.last_executed) + " at heal + " +
                         Ms(deadline - end)};
    for (auto const& inst : log.InstancesSnapshot())
      if (inst.index <= f.global_last_executed)
        return {false, "peer " + std::to_string(i) + " retains trimmed index " +
                           std::to_string(inst.index)};
  }
  auto const size_after = s.PeerLog(*leader).Size();
  if (size_after >= size_at_heal)
    return {false, "leader log did not shrink: " + std::to_string(size_at_heal) + " -> " +
                       std::to_string(size_after)};
  auto r = s.Finish();
  if (!r.Passed())
    return {false, r.ToJson()};
  return {true, "global_last_executed frozen at " + std::to_string(frozen[*leader]) +
                    " for the partition; leader log " + std::to_string(size_at_heal) + " -> " +
                    std::to_string(size_after) + " instances, all peers >= " +
                    std::to_string(at_heal.last_executed) + " within " + Ms(deadline - end) +
                    " of heal"};
}

// Parses "ok sessions=<n> nodelay=<a>/<b>".
bool NodelayEverywhere(std::string const& address, std::string& detail) {
  testing::LineClient c(address);
  auto line = c.Send("stats");
  if (!line)
    return false;
  auto pos = line->find("nodelay=");
  unsigned set = 0, total = 0;
  if (pos == std::string::npos ||
      std::sscanf(line->c_str() + pos, "nodelay=%u/%u", &set, &total) != 2)
    return false;
  detail += " " + std::to_string(set) + "/" + std::to_string(total);
  return total > 0 && set == total;
}

// 6. End-to-end smoke on a 3-process loopback cluster.
Outcome EndToEnd() {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / ("replicant-acceptance-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  Outcome out;
  {
    auto layout = testing::WriteClusterConfigs(dir.string(), 3);
    std::vector<std::unique_ptr<testing::ChildProcess>> procs;
    for (int i = 0; i < 3; ++i)
      procs.push_back(std::make_unique<testing::ChildProcess>(
          std::vector<std::string>{REPLICANT_SERVER_BINARY, "--config", layout.config_paths[i]},
          (dir / ("peer" + std::to_string(i) + ".log")).string()));
    loadgen::KvClient probe(layout.client_addresses, 10s);
    if (!probe.Execute("get warmup").Succeeded())
      return {false, "cluster did not come up"};

    auto spec = loadgen::WorkloadSpec::A(1000);
    loadgen::RunConfig c;
    c.cluster = layout.client_addresses;
    c.mode = loadgen::Mode::kOpen;
    c.rate = 5000;
    c.duration = 60s;
    c.warmup = 5s;
    loadgen::LoadPhase(c, spec);

    bool nodelay = true;
    std::string nodelay_detail;
    std::thread checker([&] {
      std::this_thread::sleep_for(c.warmup + c.duration / 2);
      for (auto const& a : layout.client_addresses)
        nodelay = NodelayEverywhere(a, nodelay_detail) && nodelay;
    });
    auto result = loadgen::RunOpenLoop(c, spec);
    checker.join();
    auto s = loadgen::Summarize(result);
    char tput[32];
    std::snprintf(tput, sizeof tput, "%.1f", s.throughput);
    out.detail = std::string(tput) + " ops/s over 60 s, " + std::to_string(s.errors) +
                 " errors, intended p99 " + Ms(s.intended.p99) + ", nodelay" + nodelay_detail;
    out.pass = s.errors == 0 && s.throughput >= 5000.0 - 1e-6 &&
               s.intended.p99 <= 50'000'000 && nodelay;
  }
  fs::remove_all(dir);
  return out;
}

// 7. Throughput search against a known-capacity stub.
Outcome SearchRepeatability() {
  constexpr std::uint64_t kCapacity = 1000;
  loadgen::SearchConfig sc;
  sc.min_rate = 100;
  sc.max_rate = 2000;
  sc.resolution = 50;
  sc.target_p99 = 20ms;
  std::vector<std::uint64_t> found;
  for (int run = 0; run < 2; ++run) {
    loadgen::StubServer stub(loadgen::StubProfile::Parse("capacity:" + std::to_string(kCapacity)));
    stub.Start();
    loadgen::RunConfig base;
    base.cluster = {stub.Address()};
    base.duration = 3s;
    base.warmup = 500ms;
    base.seed = 1 + run;
    found.push_back(loadgen::FindMaxThroughput(sc, base, loadgen::WorkloadSpec::A(1000)).rate);
  }
  auto within = [&](std::uint64_t r) {
    return r + sc.resolution >= kCapacity && r <= kCapacity + sc.resolution;
  };
  double spread = std::abs(static_cast<double>(found[0]) - static_cast<double>(found[1])) /
                  static_cast<double>(std::max(found[0], found[1]));
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "capacity %llu ops/s, resolution %llu: found %llu and %llu (spread %.1f%%)",
                static_cast<unsigned long long>(kCapacity),
                static_cast<unsigned long long>(sc.resolution),
                static_cast<unsigned long long>(found[0]),
                static_cast<unsigned long long>(found[1]), spread * 100);
  return {within(found[0]) && within(found[1]) && spread <= 0.15, buf};
}

// 8. Zipf top-10 frequencies against the pmf computed from the harmonic sum.
Outcome ZipfFidelity() {
  constexpr std::uint64_t kN = 1000, kDraws = 1'000'000;
  constexpr double kTheta = 0.99;
  double harmonic = 0;
  for (std::uint64_t r = 1; r <= kN; ++r)
    harmonic += std::pow(static_cast<double>(r), -kTheta);
  loadgen::ZipfianGenerator zipf(kN, kTheta);
  std::mt19937_64 rng(8);
  std::vector<std::uint64_t> counts(kN + 1);
  for (std::uint64_t i = 0; i < kDraws; ++i)
    ++counts[zipf.NextRank(rng)];
  double worst = 0;
  for (std::uint64_t r = 1; r <= 10; ++r) {
    double expected = std::pow(static_cast<double>(r), -kTheta) / harmonic;
    double observed = static_cast<double>(counts[r]) / kDraws;
    worst = std::max(worst, std::abs(observed - expected) / expected);
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "worst top-10 relative error %.2f%% (limit 5%%)", worst * 100);
  return {worst <= 0.05, buf};
}

// 9. Wire round trips and framing at every split point.
Outcome WireFormat() {
  std::mt19937_64 rng(9);
  std::size_t failures = 0;
  for (int i = 0; i < 10000; ++i) {
    auto m = testing::RandomMessage(rng);
    try {
      auto line = EncodeMessage(m);
      if (line.empty() || line.find('\n') != line.size() - 1 || !(DecodeMessage(line) == m))
        ++failures;
    } catch (WireError const&) {
      ++failures;
    }
  }
  std::vector<PeerMessage> messages;
  std::string stream;
  for (int i = 0; i < 3; ++i) {
    messages.push_back(testing::RandomMessage(rng));
    stream += EncodeMessage(messages.back());
  }
  auto reassemble = [&](std::vector<std::size_t> const& cuts) {
    LineFramer framer;
    std::vector<PeerMessage> out;
    std::size_t from = 0;
    auto feed = [&](std::size_t to) {
      framer.Feed(std::string_view(stream).substr(from, to - from));
      from = to;
      while (auto line = framer.Next())
        out.push_back(DecodeMessage(*line));
    };
    for (auto c : cuts)
      feed(c);
    feed(stream.size());
    return out == messages && framer.Buffered() == 0;
  };
  std::size_t splits = 0;
  for (std::size_t cut = 0; cut <= stream.size(); ++cut, ++splits)
    failures += !reassemble({cut});
  // Every boundary of the three messages combined with every other cut.
  std::vector<std::size_t> boundaries;
  for (std::size_t i = 0, end = 0; i < 3; ++i) {
    end = stream.find('\n', end) + 1;
    boundaries.push_back(end);
  }
  for (auto b : boundaries)
    for (std::size_t cut = 0; cut <= stream.size(); ++cut, ++splits)
      failures += !reassemble(cut < b ? std::vector<std::size_t>{cut, b}
                                      : std::vector<std::size_t>{b, cut});
  return {failures == 0, "10000 round trips, " + std::to_string(splits) +
                             " split feeds of a " + std::to_string(stream.size()) +
                             "-byte 3-message stream, " + std::to_string(failures) + " failures"};
}

struct Criterion {
  int number;
  char const* name;
  Outcome (*run)();
};

constexpr Criterion kCriteria[] = {
    {1, "safety sweep", SafetySweep},
    {2, "linearizability", Linearizability},
    {3, "election liveness", Liveness},
    {4, "coordinated omission", CoordinatedOmission},
    {5, "trim behavior", TrimBehavior},
    {6, "end-to-end smoke", EndToEnd},
    {7, "throughput search repeatability", SearchRepeatability},
    {8, "zipfian fidelity", ZipfFidelity},
    {9, "wire format", WireFormat},
};

}  // namespace
}  // namespace replicant

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int only = 0;
  app.add_option("--only", only, "run a single criterion (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  bool all_passed = true;
  for (auto const& c : replicant::kCriteria) {
    if (only != 0 && c.number != only)
      continue;
    auto started = std::chrono::steady_clock::now();
    replicant::Outcome o;
    try {
      o = c.run();
    } catch (std::exception const& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.number,
                c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    all_passed = all_passed && o.pass;
  }
  return all_passed ? 0 : 1;
}
