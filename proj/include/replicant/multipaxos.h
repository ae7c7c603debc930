#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "replicant/log.h"
#include "replicant/messages.h"
#include "replicant/scheduler.h"
#include "replicant/transport.h"
#include "replicant/types.h"

namespace replicant {

using namespace std::chrono_literals;

struct PeerConfig {
  PeerId my_id = 0;
  std::vector<std::string> peers;
  Nanos commit_interval = 150ms;
  Nanos election_timeout_base = 450ms;
  Nanos election_jitter_max = 150ms;

  std::size_t Majority() const { return peers.size() / 2 + 1; }

  // Throws std::invalid_argument.
  void Validate() const;
};

enum class ReplicateStatus : std::uint8_t { kOk, kRetry, kNotLeader };

struct ReplicateResult {
  ReplicateStatus status = ReplicateStatus::kRetry;
  std::optional<PeerId> leader_hint;  // kNotLeader only
  LogIndex index = 0;                 // set once an index was reserved

  static ReplicateResult Ok(LogIndex index) {
    return {ReplicateStatus::kOk, std::nullopt, index};
  }
  static ReplicateResult Retry(LogIndex index = 0) {
    return {ReplicateStatus::kRetry, std::nullopt, index};
  }
  static ReplicateResult NotLeader(std::optional<PeerId> hint,
                                   LogIndex index = 0) {
    return {ReplicateStatus::kNotLeader, hint, index};
  }
};

struct PrepareOutcome {
  LogIndex max_index = 0;
  std::map<LogIndex, Instance> merged;
};

// Merges the logs returned by a prepare majority. Per index: a decided
// (Committed/Executed) entry wins and all decided entries must agree
// (SafetyViolation otherwise); else the highest ballot wins. Results are
// re-stamped with `ballot`; decided entries come back Committed, the rest
// InProgress.
std::map<LogIndex, Instance> MergeLogs(
    std::vector<std::vector<Instance>> const& responses,
    Ballot ballot);

// MultiPaxos engine. Clients call Replicate; peers' requests arrive through
// Handle. A prepare task (runs while follower) and a commit task (runs while
// leader) are driven by the injected Scheduler; all network I/O goes through
// the injected Transport, so the same engine runs over TCP and inside the
// deterministic simulator.
//
// Role is derived from the current ballot: this peer leads iff the ballot's
// peer id is my_id.
class MultiPaxos {
 public:
  using ReplicateCallback = std::function<void(ReplicateResult)>;
  using PrepareCallback = std::function<void(std::optional<PrepareOutcome>)>;

  MultiPaxos(Log& log,
             PeerConfig config,
             Transport& transport,
             Scheduler& scheduler,
             std::uint64_t seed);

  MultiPaxos(MultiPaxos const&) = delete;
  MultiPaxos& operator=(MultiPaxos const&) = delete;

  // Arms the prepare task (or the commit task if this peer still leads, e.g.
  // after a pause). Stop() silences both; callbacks of in-flight phases
  // become no-ops apart from completing Replicate callers.
  void Start();
  void Stop();

  void Replicate(Command command, ClientId client_id, ReplicateCallback done);
  ReplicateResult Replicate(Command command, ClientId client_id);

  // Dispatches one request to the matching handler; the response echoes tag.
  PeerMessage Handle(PeerMessage const& request);

  PrepareResponse OnPrepare(PrepareRequest const& request, PeerId sender);
  AcceptResponse OnAccept(AcceptRequest const& request);
  CommitResponse OnCommit(CommitRequest const& request, PeerId sender);

  void RunPreparePhase(Ballot ballot, PrepareCallback done);
  void Replay(Ballot ballot, std::map<LogIndex, Instance> merged);
  void RunCommitPhase(Ballot ballot,
                      LogIndex prev_global_last_executed,
                      std::function<void(LogIndex)> done);

  // A fresh ballot above every ballot this peer has seen.
  Ballot NextBallot();

  // Takes leadership with `ballot` unless a higher ballot has been seen since.
  // Future indexes start above `max_index`. Wakes the commit task.
  bool BecomeLeader(Ballot ballot, LogIndex max_index);

  PeerId Id() const { return config_.my_id; }
  PeerConfig const& Config() const { return config_; }
  Ballot CurrentBallot() const;
  Ballot PromisedBallot() const;
  bool IsLeader() const;
  std::optional<PeerId> Leader() const;
  LogIndex GlobalLastExecuted() const;
  Nanos LastHeartbeat() const;

 private:
  enum class PhaseStatus : std::uint8_t { kOk, kRejected, kNoQuorum };
  struct PhaseResult {
    PhaseStatus status = PhaseStatus::kNoQuorum;
    Ballot higher;
  };
  struct ReplayState;

  bool IsLeaderLocked() const;
  Ballot NextBallotLocked();
  // Adopts `ballot` if it is higher than anything seen; demotes a leader.
  void ObserveBallotLocked(Ballot ballot);
  // A quick timer skips the base timeout (jitter only); used by a candidate
  // whose prepare missed quorum without meeting a higher ballot.
  void ArmPrepareLocked(bool quick = false);
  void PrepareTick(std::uint64_t generation, Nanos window_start);
  void CommitTick(std::uint64_t generation, Ballot ballot);
  void TakeLeadership(Ballot ballot, PrepareOutcome outcome);
  void RunAcceptPhase(Instance const& instance,
                      std::function<void(PhaseResult)> done);
  void PumpReplay(std::shared_ptr<ReplayState> const& state);
  void ReplayOne(std::shared_ptr<ReplayState> const& state, Instance instance);
  void CommitLocally(LogIndex index);
  bool StillLeading(Ballot ballot) const;

  Log& log_;
  PeerConfig const config_;
  Transport& transport_;
  Scheduler& scheduler_;

  mutable std::mutex mu_;
  Ballot ballot_;     // role-defining ballot
  Ballot promised_;   // acceptor floor, >= ballot_
  Ballot max_seen_;   // highest ballot ever observed, own or remote
  Nanos last_heartbeat_ = Nanos::min();
  LogIndex global_last_executed_ = 0;
  bool started_ = false;
  bool stopped_ = false;
  bool prepare_armed_ = false;
  std::uint64_t generation_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace replicant
