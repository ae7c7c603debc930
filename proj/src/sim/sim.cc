#include "replicant/sim/sim.h"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "replicant/errors.h"

namespace replicant::sim {

using nlohmann::json;

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;
constexpr ClientId kSimClientBit = ClientId{1} << 63;

Nanos Ms(double ms) {
  return std::chrono::duration_cast<Nanos>(
      std::chrono::duration<double, std::milli>(ms));
}

double ToMs(Nanos d) {
  return std::chrono::duration<double, std::milli>(d).count();
}

std::string Describe(ClientId client_id, Command const& command) {
  std::string out(ToString(command.kind));
  if (!command.key.empty())
    out += " " + command.key;
  if (command.kind == CommandKind::kPut)
    out += " " + command.value;
  return out + " (client " + std::to_string(client_id) + ")";
}

}  // namespace

class Simulation::NodeScheduler final : public Scheduler {
 public:
  NodeScheduler(Simulation& sim, PeerId id) : sim_(sim), id_(id) {}

  Nanos Now() const override { return sim_.now_; }

  void After(Nanos delay, std::function<void()> task) override;

 private:
  Simulation& sim_;
  PeerId id_;
};

class Simulation::NodeTransport final : public Transport {
 public:
  NodeTransport(Simulation& sim, PeerId id) : sim_(sim), id_(id) {}

  void Rpc(PeerId peer, PeerMessage request, Nanos deadline,
           RpcCallback done) override {
    sim_.SendRpc(id_, peer, std::move(request), deadline, std::move(done));
  }
  PeerId Self() const override { return id_; }
  std::size_t NumPeers() const override { return sim_.params_.peers; }

 private:
  Simulation& sim_;
  PeerId id_;
};

class Simulation::Node {
 public:
  Node(Simulation& sim, PeerId id, PeerConfig config, std::uint64_t seed)
      : id(id), scheduler(sim, id), transport(sim, id) {
    engine = std::make_unique<MultiPaxos>(log, std::move(config), transport,
                                          scheduler, seed);
  }

  PeerId id;
  Log log;
  KVStore store;
  NodeScheduler scheduler;
  NodeTransport transport;
  std::unique_ptr<MultiPaxos> engine;
  bool paused = false;
  std::uint64_t epoch = 0;
  LogIndex last_executed = 0;
};

void Simulation::NodeScheduler::After(Nanos delay, std::function<void()> task) {
  auto& node = *sim_.nodes_[id_];
  auto const epoch = node.epoch;
  sim_.Schedule(sim_.now_ + delay, [this, epoch, task = std::move(task)] {
    auto& n = *sim_.nodes_[id_];
    if (n.paused || n.epoch != epoch)
      return;
    task();
  });
}

bool SimReport::Passed() const {
  return agreement_violations.empty() && trim_violations.empty() &&
         prefix_divergences.empty() && ballot_violations.empty() &&
         liveness_violations.empty() && errors.empty() &&
         (!linearizability_checked || linearizability.linearizable);
}

std::string SimReport::ToJson() const {
  json j;
  j["seed"] = seed;
  j["peers"] = peers;
  j["end_time_ms"] = ToMs(end_time);
  j["events"] = events;
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(trace_hash));
  j["trace_hash"] = hash;
  j["leaders"] = json::array();
  for (auto const& [ballot, peer] : leaders)
    j["leaders"].push_back({{"ballot", ballot}, {"peer", peer}});
  j["agreement_violations"] = agreement_violations;
  j["trim_violations"] = trim_violations;
  j["prefix_divergences"] = prefix_divergences;
  j["ballot_violations"] = ballot_violations;
  j["liveness_violations"] = liveness_violations;
  j["errors"] = errors;
  j["ops_invoked"] = ops_invoked;
  j["ops_completed"] = ops_completed;
  j["history_size"] = history_size;
  j["max_executed"] = max_executed;
  j["longest_leaderless_ms"] = ToMs(longest_leaderless);
  j["linearizability"] = {{"checked", linearizability_checked},
                          {"linearizable", linearizability.linearizable},
                          {"witness_length", linearizability.witness.size()},
                          {"conflict", linearizability.conflict}};
  j["passed"] = Passed();
  return j.dump(2);
}

std::vector<std::string> CheckAgreement(std::vector<PeerState> const& peers) {
  std::vector<std::string> violations;
  for (std::size_t a = 0; a < peers.size(); ++a) {
    std::map<LogIndex, Instance const*> decided;
    for (auto const& instance : peers[a].instances) {
      if (instance.IsDecided())
        decided.emplace(instance.index, &instance);
    }
    for (std::size_t b = a + 1; b < peers.size(); ++b) {
      for (auto const& instance : peers[b].instances) {
        if (!instance.IsDecided())
          continue;
        auto it = decided.find(instance.index);
        if (it == decided.end() || it->second->SameValue(instance))
          continue;
        violations.push_back(
            "index " + std::to_string(instance.index) + ": peer " +
            std::to_string(peers[a].id) + " has " +
            Describe(it->second->client_id, it->second->command) + ", peer " +
            std::to_string(peers[b].id) + " has " +
            Describe(instance.client_id, instance.command));
      }
    }
  }
  return violations;
}

std::vector<std::string> CheckTrimSafety(std::vector<PeerState> const& peers) {
  std::vector<std::string> violations;
  if (peers.empty())
    return violations;
  auto min_executed = peers.front().frontiers.last_executed;
  for (auto const& p : peers)
    min_executed = std::min(min_executed, p.frontiers.last_executed);
  for (auto const& p : peers) {
    if (p.frontiers.global_last_executed > min_executed) {
      violations.push_back(
          "peer " + std::to_string(p.id) + " global_last_executed " +
          std::to_string(p.frontiers.global_last_executed) +
          " exceeds min last_executed " + std::to_string(min_executed));
    }
  }
  return violations;
}

void ApplyScenario(std::string const& json_text, SimParams& params) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (json::exception const& e) {
    throw std::invalid_argument(std::string("scenario is not valid JSON: ") +
                                e.what());
  }
  try {
    if (j.contains("seed")) params.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("peers")) params.peers = j["peers"].get<std::size_t>();
    if (j.contains("drop")) params.drop = j["drop"].get<double>();
    if (j.contains("delay_min_ms")) params.delay_min = Ms(j["delay_min_ms"].get<double>());
    if (j.contains("delay_max_ms")) params.delay_max = Ms(j["delay_max_ms"].get<double>());
    if (j.contains("horizon_ms")) params.horizon = Ms(j["horizon_ms"].get<double>());
    if (j.contains("commit_interval_ms"))
      params.commit_interval = Ms(j["commit_interval_ms"].get<double>());
    if (j.contains("election_timeout_ms"))
      params.election_timeout_base = Ms(j["election_timeout_ms"].get<double>());
    if (j.contains("election_jitter_ms"))
      params.election_jitter_max = Ms(j["election_jitter_ms"].get<double>());
    if (j.contains("clients")) params.clients = j["clients"].get<std::size_t>();
    if (j.contains("max_ops")) params.max_ops = j["max_ops"].get<std::size_t>();
    if (j.contains("keys")) params.keys = j["keys"].get<std::size_t>();
    if (j.contains("think_max_ms")) params.think_max = Ms(j["think_max_ms"].get<double>());
    if (j.contains("client_start_ms"))
      params.client_start = Ms(j["client_start_ms"].get<double>());
    if (j.contains("get_tenths")) params.get_tenths = j["get_tenths"].get<unsigned>();
    if (j.contains("put_tenths")) params.put_tenths = j["put_tenths"].get<unsigned>();
    if (j.contains("check_linearizability"))
      params.check_linearizability = j["check_linearizability"].get<bool>();
    if (j.contains("check_liveness"))
      params.check_liveness = j["check_liveness"].get<bool>();
    for (auto const& p : j.value("partitions", json::array())) {
      PartitionSpec spec;
      spec.start = Ms(p.at("start_ms").get<double>());
      spec.end = Ms(p.at("end_ms").get<double>());
      spec.isolate_leader = p.value("isolate_leader", false);
      if (p.contains("isolate"))
        spec.isolated = p["isolate"].get<std::vector<PeerId>>();
      params.partitions.push_back(std::move(spec));
    }
    for (auto const& c : j.value("crashes", json::array())) {
      CrashSpec spec;
      spec.at = Ms(c.at("at_ms").get<double>());
      spec.restart_after = Ms(c.at("restart_after_ms").get<double>());
      spec.crash_leader = c.value("leader", false);
      spec.peer = c.value("peer", PeerId{0});
      params.crashes.push_back(spec);
    }
  } catch (json::exception const& e) {
    throw std::invalid_argument(std::string("bad scenario: ") + e.what());
  }
}

SimParams SweepParams(std::uint64_t seed) {
  static constexpr double kDrops[] = {0.0, 0.1, 0.3};
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 17);
  auto uniform_ms = [&rng](double lo, double hi) {
    return Ms(std::uniform_real_distribution<double>(lo, hi)(rng));
  };

  SimParams p;
  p.seed = seed;
  p.peers = seed % 2 == 0 ? 3 : 5;
  p.drop = kDrops[(seed / 2) % 3];
  p.delay_min = 1ms;
  p.delay_max = 100ms;
  p.horizon = 12s;
  p.clients = 4 + seed % 5;
  p.max_ops = 200;
  p.keys = 3;
  p.think_max = Nanos(2 * p.horizon.count() / 3 * static_cast<long>(p.clients) /
                      static_cast<long>(p.max_ops));

  CrashSpec crash;
  crash.crash_leader = true;
  crash.at = uniform_ms(1500, 4000);
  crash.restart_after = uniform_ms(500, 2000);
  p.crashes.push_back(crash);

  PartitionSpec partition;
  partition.start = uniform_ms(6500, 8000);
  partition.end = partition.start + uniform_ms(1000, 2500);
  if (rng() % 2 == 0) {
    partition.isolate_leader = true;
  } else {
    std::vector<PeerId> ids(p.peers);
    for (PeerId i = 0; i < p.peers; ++i)
      ids[i] = i;
    std::shuffle(ids.begin(), ids.end(), rng);
    auto const minority = 1 + rng() % ((p.peers - 1) / 2);
    partition.isolated.assign(ids.begin(), ids.begin() + minority);
  }
  p.partitions.push_back(partition);
  return p;
}

Simulation::Simulation(SimParams params)
    : params_(std::move(params)), rng_(params_.seed) {
  if (params_.peers < 1 || params_.peers > kMaxPeers)
    throw std::invalid_argument("peer count out of range");
  if (params_.delay_min < Nanos::zero() || params_.delay_max < params_.delay_min)
    throw std::invalid_argument("bad delay range");
  if (params_.drop < 0 || params_.drop > 1)
    throw std::invalid_argument("drop probability must be in [0, 1]");
  if (params_.get_tenths + params_.put_tenths > 10)
    throw std::invalid_argument("command mix exceeds ten tenths");
  if (params_.liveness_bound == Nanos::zero())
    params_.liveness_bound = 10 * params_.election_timeout_base;

  report_.seed = params_.seed;
  report_.peers = params_.peers;
  report_.trace_hash = kFnvOffset;

  PeerConfig base;
  for (std::size_t i = 0; i < params_.peers; ++i)
    base.peers.push_back("sim:" + std::to_string(i));
  base.commit_interval = params_.commit_interval;
  base.election_timeout_base = params_.election_timeout_base;
  base.election_jitter_max = params_.election_jitter_max;

  for (PeerId i = 0; i < params_.peers; ++i) {
    auto config = base;
    config.my_id = i;
    nodes_.push_back(std::make_unique<Node>(*this, i, config, rng_()));
    nodes_.back()->log.SetCommitObserver([this, i](Instance const& instance) {
      auto value = std::make_pair(instance.client_id, instance.command);
      auto [it, inserted] = chosen_.emplace(instance.index, value);
      if (!inserted && it->second != value) {
        Fail(report_.agreement_violations,
             "index " + std::to_string(instance.index) + ": peer " +
                 std::to_string(i) + " committed " +
                 Describe(instance.client_id, instance.command) +
                 ", previously committed " +
                 Describe(it->second.first, it->second.second));
      }
    });
  }
  last_ballot_.assign(params_.peers, Ballot());

  for (auto const& spec : params_.partitions)
    Schedule(spec.start, [this, spec] { StartPartition(spec); });
  for (auto const& spec : params_.crashes) {
    Schedule(spec.at, [this, spec] {
      std::optional<PeerId> victim;
      if (!spec.crash_leader) {
        victim = spec.peer;
      } else if (auto leader = EstablishedLeader()) {
        victim = leader;
      } else {
        for (auto const& node : nodes_) {
          if (!node->paused && node->engine->IsLeader()) {
            victim = node->id;
            break;
          }
        }
      }
      if (victim && *victim < nodes_.size())
        Pause(*victim, spec.restart_after);
    });
  }

  for (auto& node : nodes_)
    node->engine->Start();

  clients_.resize(params_.clients);
  for (std::size_t c = 0; c < clients_.size(); ++c) {
    clients_[c].index = c;
    clients_[c].target = static_cast<PeerId>(rng_() % params_.peers);
    if (params_.client_start > Nanos::zero())
      Schedule(params_.client_start, [this, c] { ClientNext(c); });
    else
      ClientNext(c);
  }
}

Simulation::~Simulation() {
  for (auto& node : nodes_) {
    node->engine->Stop();
    node->log.SetCommitObserver(nullptr);
  }
}

std::size_t Simulation::NumPeers() const { return nodes_.size(); }

MultiPaxos& Simulation::Engine(PeerId peer) { return *nodes_.at(peer)->engine; }

Log& Simulation::PeerLog(PeerId peer) { return nodes_.at(peer)->log; }

bool Simulation::Paused(PeerId peer) const { return nodes_.at(peer)->paused; }

std::vector<PeerState> Simulation::Snapshot() const {
  std::vector<PeerState> out;
  for (auto const& node : nodes_)
    out.push_back({node->id, node->log.Frontiers(), node->log.InstancesSnapshot()});
  return out;
}

void Simulation::SetObserver(std::function<void(Simulation&)> observer) {
  observer_ = std::move(observer);
}

void Simulation::Schedule(Nanos at, std::function<void()> fn) {
  events_.push(Event{std::max(at, now_), next_seq_++, std::move(fn)});
}

void Simulation::Trace(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  for (auto v : {static_cast<std::uint64_t>(now_.count()), a, b, c}) {
    for (int i = 0; i < 8; ++i) {
      report_.trace_hash ^= (v >> (8 * i)) & 0xff;
      report_.trace_hash *= kFnvPrime;
    }
  }
}

Nanos Simulation::Delay() {
  return Nanos(std::uniform_int_distribution<std::int64_t>(
      params_.delay_min.count(), params_.delay_max.count())(rng_));
}

bool Simulation::Drop() {
  if (params_.drop <= 0)
    return false;
  return std::bernoulli_distribution(params_.drop)(rng_);
}

bool Simulation::Connected(PeerId a, PeerId b) const {
  for (auto const& p : partitions_) {
    if (p.end > now_ && p.isolated[a] != p.isolated[b])
      return false;
  }
  return true;
}

void Simulation::SendRpc(PeerId from, PeerId to, PeerMessage request,
                         Nanos deadline, RpcCallback done) {
  request.tag = next_seq_;
  request.from = from;
  Trace(1, (std::uint64_t{from} << 32) | to, request.payload.index());
  if (to == from) {
    auto reply = nodes_[from]->engine->Handle(request);
    done(RpcOutcome::Reply(std::move(reply)));
    return;
  }
  if (to >= nodes_.size()) {
    done(RpcOutcome::Disconnected());
    return;
  }

  struct Pending {
    RpcCallback done;
    bool completed = false;
  };
  auto pending = std::make_shared<Pending>(Pending{std::move(done)});
  Schedule(now_ + deadline, [pending] {
    if (pending->completed)
      return;
    pending->completed = true;
    pending->done(RpcOutcome::Timeout());
  });
  if (!Connected(from, to) || Drop())
    return;
  Schedule(now_ + Delay(), [this, from, to, pending, request = std::move(request)] {
    if (nodes_[to]->paused || !Connected(from, to))
      return;
    auto reply = nodes_[to]->engine->Handle(request);
    Trace(2, (std::uint64_t{to} << 32) | from, reply.payload.index());
    if (Drop())
      return;
    Schedule(now_ + Delay(), [this, from, to, pending, reply = std::move(reply)] {
      if (pending->completed || nodes_[from]->paused || !Connected(from, to))
        return;
      pending->completed = true;
      pending->done(RpcOutcome::Reply(reply));
    });
  });
}

void Simulation::StartPartition(PartitionSpec const& spec) {
  ActivePartition active{spec.end, std::vector<bool>(nodes_.size(), false)};
  if (spec.isolate_leader) {
    auto leader = EstablishedLeader();
    if (!leader)
      return;
    active.isolated[*leader] = true;
  } else {
    for (auto id : spec.isolated) {
      if (id < nodes_.size())
        active.isolated[id] = true;
    }
  }
  Trace(3, spec.end.count());
  partitions_.push_back(std::move(active));
  Schedule(spec.end, [this] {
    std::erase_if(partitions_, [this](auto const& p) { return p.end <= now_; });
  });
}

void Simulation::Pause(PeerId peer, Nanos restart_after) {
  auto& node = *nodes_[peer];
  if (node.paused)
    return;
  Trace(4, peer);
  node.paused = true;
  ++node.epoch;
  node.engine->Stop();
  Schedule(now_ + restart_after, [this, peer] { Resume(peer); });
}

void Simulation::Resume(PeerId peer) {
  auto& node = *nodes_[peer];
  if (!node.paused)
    return;
  Trace(5, peer);
  node.paused = false;
  ++node.epoch;
  node.engine->Start();
}

void Simulation::ClientNext(std::size_t client) {
  if (attempts_.size() >= params_.max_ops)
    return;
  auto const wait = std::uniform_int_distribution<std::int64_t>(
      0, std::max<std::int64_t>(params_.think_max.count(), 0))(rng_);
  Schedule(now_ + Nanos(wait), [this, client] { ClientInvoke(client); });
}

void Simulation::ClientInvoke(std::size_t c) {
  if (attempts_.size() >= params_.max_ops)
    return;
  auto& client = clients_[c];
  Attempt attempt;
  attempt.id = attempts_.size();
  attempt.client = c;
  attempt.client_id = kSimClientBit | (attempt.id + 1);
  auto const key = "k" + std::to_string(rng_() % std::max<std::size_t>(params_.keys, 1));
  auto const roll = rng_() % 10;
  if (roll < params_.get_tenths)
    attempt.command = Command::Get(key);
  else if (roll < params_.get_tenths + params_.put_tenths)
    attempt.command = Command::Put(
        key, "v" + std::to_string(c) + "." + std::to_string(client.serial++));
  else
    attempt.command = Command::Del(key);
  attempt.invoke = now_;
  auto const id = attempt.id;
  auto const target = client.target;
  auto const client_id = attempt.client_id;
  auto command = attempt.command;
  attempt_by_client_id_[client_id] = id;
  attempts_.push_back(std::move(attempt));
  client.current = id;
  report_.ops_invoked = attempts_.size();
  Trace(6, c, id);

  Schedule(now_ + params_.client_timeout, [this, c, id] {
    if (!attempts_[id].finished)
      ClientFinish(c, id, true, std::nullopt);
  });
  auto& node = *nodes_[target];
  if (node.paused)
    return;
  node.engine->Replicate(
      std::move(command), client_id,
      [this, c, id, target](ReplicateResult result) {
        if (attempts_[id].finished)
          return;
        switch (result.status) {
          case ReplicateStatus::kOk: {
            auto& node = *nodes_[target];
            if (node.last_executed >= result.index) {
              auto const& [cid, cmd] = executed_[result.index - 1];
              auto it = first_result_.find(cid);
              if (cid == attempts_[id].client_id && it != first_result_.end()) {
                attempts_[id].complete = now_;
                attempts_[id].result = it->second;
                ClientFinish(c, id, false, std::nullopt);
              }
              return;
            }
            awaiting_[{target, result.index}] = id;
            return;
          }
          case ReplicateStatus::kNotLeader:
            ClientFinish(c, id, true, result.leader_hint);
            return;
          case ReplicateStatus::kRetry:
            ClientFinish(c, id, true, std::nullopt);
            return;
        }
      });
}

void Simulation::ClientFinish(std::size_t c, std::uint64_t attempt,
                              bool retarget, std::optional<PeerId> hint) {
  auto& a = attempts_[attempt];
  if (a.finished)
    return;
  a.finished = true;
  if (a.complete)
    ++report_.ops_completed;
  auto& client = clients_[c];
  client.current.reset();
  if (retarget) {
    client.target = hint && *hint < nodes_.size()
                        ? *hint
                        : static_cast<PeerId>(rng_() % nodes_.size());
  }
  ClientNext(c);
}

bool Simulation::RunUntil(Nanos t) {
  while (!halted_ && !events_.empty() && events_.top().time <= t) {
    auto event = events_.top();
    events_.pop();
    now_ = event.time;
    Trace(0, event.seq);
    try {
      event.fn();
    } catch (SafetyViolation const& e) {
      Fail(report_.agreement_violations, e.what());
    } catch (TrimBeyondExecuted const& e) {
      Fail(report_.trim_violations, e.what());
    } catch (std::exception const& e) {
      Fail(report_.errors, e.what());
    }
    if (!halted_)
      AfterEvent();
  }
  if (!halted_)
    now_ = std::max(now_, t);
  return !halted_;
}

void Simulation::AfterEvent() {
  ++report_.events;
  try {
    DrainExecutors();
  } catch (std::exception const& e) {
    Fail(report_.errors, e.what());
  }
  CheckOracles();
  if (observer_)
    observer_(*this);
}

void Simulation::DrainExecutors() {
  for (auto& node : nodes_) {
    if (node->paused)
      continue;
    while (auto e = node->log.TryExecuteNext(node->store)) {
      if (e->index != node->last_executed + 1) {
        Fail(report_.prefix_divergences,
             "peer " + std::to_string(node->id) + " executed index " +
                 std::to_string(e->index) + " after " +
                 std::to_string(node->last_executed));
        return;
      }
      node->last_executed = e->index;
      auto value = std::make_pair(e->client_id, e->command);
      if (executed_.size() >= static_cast<std::size_t>(e->index)) {
        if (executed_[e->index - 1] != value) {
          Fail(report_.prefix_divergences,
               "peer " + std::to_string(node->id) + " executed " +
                   Describe(e->client_id, e->command) + " at index " +
                   std::to_string(e->index) + ", another peer executed " +
                   Describe(executed_[e->index - 1].first,
                            executed_[e->index - 1].second));
          return;
        }
      } else {
        executed_.push_back(std::move(value));
        report_.max_executed = e->index;
      }
      if (e->client_id != 0)
        first_result_.try_emplace(e->client_id, e->result);

      auto it = awaiting_.find({node->id, e->index});
      if (it != awaiting_.end()) {
        auto const id = it->second;
        awaiting_.erase(it);
        auto& a = attempts_[id];
        if (!a.finished && a.client_id == e->client_id) {
          a.complete = now_;
          a.result = e->result;
          ClientFinish(a.client, id, false, std::nullopt);
        }
      }
    }
  }
}

void Simulation::CheckOracles() {
  LogIndex min_executed = 0;
  bool first = true;
  std::vector<LogFrontiers> frontiers;
  for (auto const& node : nodes_) {
    frontiers.push_back(node->log.Frontiers());
    min_executed = first ? frontiers.back().last_executed
                         : std::min(min_executed, frontiers.back().last_executed);
    first = false;
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (frontiers[i].global_last_executed > min_executed) {
      Fail(report_.trim_violations,
           "peer " + std::to_string(i) + " global_last_executed " +
               std::to_string(frontiers[i].global_last_executed) +
               " exceeds min last_executed " + std::to_string(min_executed));
    }
  }

  for (auto const& node : nodes_) {
    auto const ballot = node->engine->CurrentBallot();
    if (ballot < last_ballot_[node->id]) {
      Fail(report_.ballot_violations,
           "peer " + std::to_string(node->id) + " ballot went from " +
               ToString(last_ballot_[node->id]) + " to " + ToString(ballot));
    }
    last_ballot_[node->id] = ballot;
    if (!node->paused && node->engine->IsLeader()) {
      auto [it, inserted] = report_.leaders.emplace(ballot.raw(), node->id);
      if (!inserted && it->second != node->id) {
        Fail(report_.ballot_violations,
             "ballot " + ToString(ballot) + " led by peers " +
                 std::to_string(it->second) + " and " + std::to_string(node->id));
      }
    }
  }

  if (EstablishedLeader()) {
    if (leaderless_since_) {
      report_.longest_leaderless =
          std::max(report_.longest_leaderless, now_ - *leaderless_since_);
      leaderless_since_.reset();
    }
  } else {
    if (!leaderless_since_)
      leaderless_since_ = now_;
    auto const gap = now_ - *leaderless_since_;
    report_.longest_leaderless = std::max(report_.longest_leaderless, gap);
    if (params_.check_liveness && gap > params_.liveness_bound) {
      Fail(report_.liveness_violations,
           "no established leader from " +
               std::to_string(ToMs(*leaderless_since_)) + " ms to " +
               std::to_string(ToMs(now_)) + " ms");
    }
  }
}

std::optional<PeerId> Simulation::EstablishedLeader() const {
  auto const majority = nodes_.size() / 2 + 1;
  for (auto const& leader : nodes_) {
    if (leader->paused || !leader->engine->IsLeader())
      continue;
    auto const ballot = leader->engine->CurrentBallot();
    std::size_t support = 0;
    for (auto const& peer : nodes_) {
      if (!peer->paused && Connected(leader->id, peer->id) &&
          peer->engine->CurrentBallot() == ballot)
        ++support;
    }
    if (support >= majority)
      return leader->id;
  }
  return std::nullopt;
}

void Simulation::Fail(std::vector<std::string>& list, std::string message) {
  list.push_back("t=" + std::to_string(ToMs(now_)) + "ms " + std::move(message));
  halted_ = true;
}

SimReport Simulation::Run() {
  RunUntil(params_.horizon);
  return Finish();
}

SimReport Simulation::Finish() {
  if (finished_)
    return report_;
  finished_ = true;
  report_.end_time = now_;

  if (!halted_) {
    for (auto& v : CheckAgreement(Snapshot()))
      report_.agreement_violations.push_back(std::move(v));
  }

  auto& history = history_;
  for (auto const& a : attempts_) {
    HistoryOp op;
    op.id = a.id;
    op.command = a.command;
    op.invoke = a.invoke;
    if (a.complete) {
      op.complete = a.complete;
      op.result = a.result;
    } else if (auto it = first_result_.find(a.client_id); it != first_result_.end()) {
      op.result = it->second;
    } else {
      continue;
    }
    history.push_back(std::move(op));
  }
  report_.history_size = history.size();
  if (params_.check_linearizability && !halted_) {
    try {
      report_.linearizability = CheckLinearizable(history);
      report_.linearizability_checked = true;
    } catch (BudgetExceeded const& e) {
      report_.errors.push_back(e.what());
    }
  }
  return report_;
}

SimReport RunSimulation(SimParams const& params) {
  Simulation sim(params);
  return sim.Run();
}

}  // namespace replicant::sim
