#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "replicant/kvstore.h"
#include "replicant/log.h"
#include "replicant/multipaxos.h"
#include "replicant/sim/linearizability.h"

namespace replicant::sim {

// Symmetric cut between `isolated` and everyone else during [start, end).
// With isolate_leader the set is resolved at `start` to the peer leading
// then (no-op if nobody leads).
struct PartitionSpec {
  Nanos start{0};
  Nanos end{0};
  std::vector<PeerId> isolated;
  bool isolate_leader = false;
};

// Pauses a peer at `at` (engine stopped, messages to and from it lost, state
// kept) and resumes it `restart_after` later. With crash_leader the victim
// is the peer leading at `at`.
struct CrashSpec {
  Nanos at{0};
  Nanos restart_after{0};
  PeerId peer = 0;
  bool crash_leader = false;
};

struct SimParams {
  std::uint64_t seed = 1;
  std::size_t peers = 3;
  double drop = 0.0;
  Nanos delay_min = 1ms;
  Nanos delay_max = 10ms;
  Nanos horizon = 10s;

  Nanos commit_interval = 150ms;
  Nanos election_timeout_base = 450ms;
  Nanos election_jitter_max = 150ms;

  std::vector<PartitionSpec> partitions;
  std::vector<CrashSpec> crashes;

  std::size_t clients = 4;   // at most 8 for checkable histories
  std::size_t max_ops = 200;
  std::size_t keys = 4;
  Nanos think_max = 200ms;   // client pause between operations
  Nanos client_start{0};     // clients stay idle until then
  // Command mix in tenths; the remainder are deletes.
  unsigned get_tenths = 4;
  unsigned put_tenths = 4;
  Nanos client_timeout = 1500ms;

  bool check_linearizability = true;
  bool check_liveness = true;
  // Leaderless periods longer than this are liveness violations
  // (0 = 10 x election_timeout_base).
  Nanos liveness_bound{0};
};

// Overlays a scenario document onto `params`. Recognized fields:
//   seed, peers, drop, delay_min_ms, delay_max_ms, horizon_ms,
//   commit_interval_ms, election_timeout_ms, election_jitter_ms,
//   clients, max_ops, keys, think_max_ms, client_start_ms, get_tenths,
//   put_tenths, check_linearizability,
//   check_liveness,
//   partitions: [{start_ms, end_ms, isolate: [ids] | isolate_leader: true}],
//   crashes: [{at_ms, restart_after_ms, peer: id | leader: true}]
// Throws std::invalid_argument.
void ApplyScenario(std::string const& json_text, SimParams& params);

// The randomized fault schedule used by the acceptance sweep for `seed`:
// 3 or 5 peers, drop in {0, 0.1, 0.3}, delays 1-100 ms, one leader crash
// and one partition.
SimParams SweepParams(std::uint64_t seed);

struct SimReport {
  std::uint64_t seed = 0;
  std::size_t peers = 0;
  Nanos end_time{0};
  std::uint64_t events = 0;
  std::uint64_t trace_hash = 0;

  std::map<std::uint64_t, PeerId> leaders;  // ballot raw -> acting peer
  std::vector<std::string> agreement_violations;
  std::vector<std::string> trim_violations;
  std::vector<std::string> prefix_divergences;
  std::vector<std::string> ballot_violations;
  std::vector<std::string> liveness_violations;
  std::vector<std::string> errors;

  std::size_t ops_invoked = 0;
  std::size_t ops_completed = 0;
  std::size_t history_size = 0;
  LogIndex max_executed = 0;
  Nanos longest_leaderless{0};

  bool linearizability_checked = false;
  LinearizabilityVerdict linearizability;

  bool Passed() const;
  std::string ToJson() const;
};

// Per-peer snapshot handed to the oracle functions.
struct PeerState {
  PeerId id = 0;
  LogFrontiers frontiers;
  std::vector<Instance> instances;
};

// Pairwise comparison of every committed/executed index.
std::vector<std::string> CheckAgreement(std::vector<PeerState> const& peers);

// Violation iff some peer's global_last_executed exceeds the minimum
// last_executed over all peers.
std::vector<std::string> CheckTrimSafety(std::vector<PeerState> const& peers);

class Simulation {
 public:
  explicit Simulation(SimParams params);
  ~Simulation();

  Simulation(Simulation const&) = delete;
  Simulation& operator=(Simulation const&) = delete;

  // Runs to the horizon and returns the final report.
  SimReport Run();

  // Processes events up to virtual time `t`. Returns false once an oracle
  // halted the run.
  bool RunUntil(Nanos t);

  // Closes the run (liveness tail, history check) and returns the report.
  SimReport Finish();

  Nanos Now() const { return now_; }
  bool Halted() const { return halted_; }
  std::size_t NumPeers() const;

  MultiPaxos& Engine(PeerId peer);
  Log& PeerLog(PeerId peer);
  bool Paused(PeerId peer) const;
  std::vector<PeerState> Snapshot() const;

  // The alive leader whose ballot a connected majority currently holds.
  std::optional<PeerId> EstablishedLeader() const;

  // Called after every processed event.
  void SetObserver(std::function<void(Simulation&)> observer);

  SimReport const& Report() const { return report_; }
  // The history handed to the checker; filled by Finish().
  std::vector<HistoryOp> const& History() const { return history_; }

 private:
  class Node;
  class NodeScheduler;
  class NodeTransport;
  struct Event {
    Nanos time;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(Event const& a, Event const& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  struct Attempt {
    std::uint64_t id = 0;
    std::size_t client = 0;
    ClientId client_id = 0;
    Command command;
    Nanos invoke{0};
    std::optional<Nanos> complete;
    std::optional<CommandResult> result;
    bool finished = false;
  };
  struct Client {
    std::size_t index = 0;
    PeerId target = 0;
    std::optional<std::uint64_t> current;
    std::uint64_t serial = 0;
  };
  struct ActivePartition {
    Nanos end;
    std::vector<bool> isolated;
  };

  void Schedule(Nanos at, std::function<void()> fn);
  void Trace(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);
  Nanos Delay();
  bool Drop();
  bool Connected(PeerId a, PeerId b) const;

  void SendRpc(PeerId from, PeerId to, PeerMessage request, Nanos deadline,
               RpcCallback done);

  void StartPartition(PartitionSpec const& spec);
  void Pause(PeerId peer, Nanos restart_after);
  void Resume(PeerId peer);

  void ClientNext(std::size_t client);
  void ClientInvoke(std::size_t client);
  void ClientFinish(std::size_t client, std::uint64_t attempt, bool retarget,
                    std::optional<PeerId> hint);

  void AfterEvent();
  void DrainExecutors();
  void CheckOracles();
  void Fail(std::vector<std::string>& list, std::string message);

  SimParams params_;
  std::mt19937_64 rng_;
  Nanos now_{0};
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> events_;
  bool halted_ = false;
  bool finished_ = false;

  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<ActivePartition> partitions_;

  std::vector<Client> clients_;
  std::vector<Attempt> attempts_;
  std::map<ClientId, std::uint64_t> attempt_by_client_id_;
  // (peer, index) -> attempt awaiting its execution there.
  std::map<std::pair<PeerId, LogIndex>, std::uint64_t> awaiting_;

  // Oracle state.
  std::map<LogIndex, std::pair<ClientId, Command>> chosen_;
  std::vector<std::pair<ClientId, Command>> executed_;
  std::map<ClientId, CommandResult> first_result_;
  std::vector<Ballot> last_ballot_;
  std::optional<Nanos> leaderless_since_;

  std::function<void(Simulation&)> observer_;
  SimReport report_;
  std::vector<HistoryOp> history_;
};

SimReport RunSimulation(SimParams const& params);

}  // namespace replicant::sim
