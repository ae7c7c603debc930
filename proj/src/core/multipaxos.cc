#include "replicant/multipaxos.h"

#include <algorithm>
#include <deque>
#include <future>
#include <stdexcept>
#include <utility>

#include "replicant/errors.h"

namespace replicant {

namespace {

constexpr Nanos kRedriveDelay = std::chrono::milliseconds(10);
constexpr std::size_t kReplayWindow = 64;

struct PrepareTally {
  struct Result {
    bool ok = false;
    Ballot higher;
    std::vector<std::vector<Instance>> logs;
  };

  std::size_t majority;
  Ballot ballot;
  std::size_t oks = 0;
  std::vector<std::vector<Instance>> logs;

  std::optional<Result> Add(PeerId, RpcOutcome const& outcome) {
    if (outcome.status != RpcStatus::kReply)
      return std::nullopt;
    auto const* resp = outcome.reply->As<PrepareResponse>();
    if (resp == nullptr)
      return std::nullopt;
    if (resp->status == ResponseStatus::kOk) {
      logs.push_back(resp->instances);
      if (++oks >= majority)
        return Result{true, Ballot(), std::move(logs)};
    } else if (resp->ballot >= ballot) {
      return Result{false, resp->ballot, {}};
    }
    return std::nullopt;
  }
  Result Finish() { return Result{}; }
};

struct AcceptTally {
  struct Result {
    std::size_t oks = 0;
    bool rejected = false;
    Ballot higher;
  };

  std::size_t majority;
  Ballot ballot;
  std::size_t oks = 0;

  std::optional<Result> Add(PeerId, RpcOutcome const& outcome) {
    if (outcome.status != RpcStatus::kReply)
      return std::nullopt;
    auto const* resp = outcome.reply->As<AcceptResponse>();
    if (resp == nullptr)
      return std::nullopt;
    if (resp->status == ResponseStatus::kOk) {
      if (++oks >= majority)
        return Result{oks, false, Ballot()};
    } else if (resp->ballot > ballot) {
      return Result{oks, true, resp->ballot};
    }
    return std::nullopt;
  }
  Result Finish() { return Result{oks, false, Ballot()}; }
};

struct CommitTally {
  struct Result {
    std::optional<LogIndex> min_executed;
    Ballot higher;
  };

  std::size_t total;
  Ballot ballot;
  std::size_t oks = 0;
  LogIndex min_executed = 0;

  std::optional<Result> Add(PeerId, RpcOutcome const& outcome) {
    if (outcome.status != RpcStatus::kReply)
      return std::nullopt;
    auto const* resp = outcome.reply->As<CommitResponse>();
    if (resp == nullptr)
      return std::nullopt;
    if (resp->status == ResponseStatus::kOk) {
      min_executed = oks == 0 ? resp->last_executed
                              : std::min(min_executed, resp->last_executed);
      if (++oks == total)
        return Result{min_executed, Ballot()};
    } else if (resp->ballot > ballot) {
      return Result{std::nullopt, resp->ballot};
    }
    return std::nullopt;
  }
  Result Finish() { return Result{}; }
};

}  // namespace

void PeerConfig::Validate() const {
  if (peers.empty())
    throw std::invalid_argument("at least one peer is required");
  if (peers.size() > kMaxPeers)
    throw std::invalid_argument("at most 256 peers are supported");
  if (my_id >= peers.size())
    throw std::invalid_argument("my_id out of range");
  if (commit_interval <= Nanos::zero())
    throw std::invalid_argument("commit_interval must be positive");
  if (election_timeout_base <= Nanos::zero())
    throw std::invalid_argument("election_timeout_base must be positive");
  if (election_jitter_max < Nanos::zero())
    throw std::invalid_argument("election_jitter_max must not be negative");
}

std::map<LogIndex, Instance> MergeLogs(
    std::vector<std::vector<Instance>> const& responses,
    Ballot ballot) {
  std::map<LogIndex, Instance> merged;
  for (auto const& log : responses) {
    for (auto const& instance : log) {
      auto [it, inserted] = merged.try_emplace(instance.index, instance);
      if (inserted)
        continue;
      auto& chosen = it->second;
      if (chosen.IsDecided() && instance.IsDecided()) {
        if (!chosen.SameValue(instance))
          throw SafetyViolation("decided instances disagree at index " +
                                std::to_string(instance.index));
      } else if (instance.IsDecided() ||
                 (chosen.IsInProgress() && instance.ballot > chosen.ballot)) {
        chosen = instance;
      }
    }
  }
  for (auto& [index, instance] : merged) {
    instance.ballot = ballot;
    instance.state = instance.IsDecided() ? InstanceState::kCommitted
                                          : InstanceState::kInProgress;
  }
  return merged;
}

struct MultiPaxos::ReplayState {
  Ballot ballot;
  std::uint64_t generation = 0;
  std::mutex mu;
  std::deque<Instance> queue;
  std::size_t in_flight = 0;
};

MultiPaxos::MultiPaxos(Log& log,
                       PeerConfig config,
                       Transport& transport,
                       Scheduler& scheduler,
                       std::uint64_t seed)
    : log_(log),
      config_(std::move(config)),
      transport_(transport),
      scheduler_(scheduler),
      rng_(seed) {
  config_.Validate();
}

void MultiPaxos::Start() {
  std::vector<Instance> redrive;
  Ballot ballot;
  std::uint64_t generation;
  {
    std::scoped_lock lock(mu_);
    started_ = true;
    stopped_ = false;
    prepare_armed_ = false;
    generation = ++generation_;
    ballot = ballot_;
    if (!IsLeaderLocked()) {
      ArmPrepareLocked();
      return;
    }
    scheduler_.After(Nanos::zero(),
                     [this, generation, ballot] { CommitTick(generation, ballot); });
    for (auto& instance : log_.InstancesSnapshot()) {
      if (instance.IsInProgress())
        redrive.push_back(instance);
    }
  }
  std::map<LogIndex, Instance> pending;
  for (auto& instance : redrive)
    pending.emplace(instance.index, std::move(instance));
  Replay(ballot, std::move(pending));
}

void MultiPaxos::Stop() {
  std::scoped_lock lock(mu_);
  stopped_ = true;
  prepare_armed_ = false;
  ++generation_;
}

void MultiPaxos::Replicate(Command command,
                           ClientId client_id,
                           ReplicateCallback done) {
  Instance instance;
  std::uint64_t generation;
  {
    std::scoped_lock lock(mu_);
    if (stopped_ || !started_) {
      done(ReplicateResult::Retry());
      return;
    }
    if (!IsLeaderLocked()) {
      auto leader = ballot_.Leader();
      done(leader ? ReplicateResult::NotLeader(leader) : ReplicateResult::Retry());
      return;
    }
    instance = Instance{ballot_, log_.AdvanceIndex(), client_id,
                        std::move(command), InstanceState::kInProgress};
    generation = generation_;
  }
  RunAcceptPhase(instance, [this, instance, generation, done = std::move(done)](
                               PhaseResult result) {
    switch (result.status) {
      case PhaseStatus::kOk:
        CommitLocally(instance.index);
        done(ReplicateResult::Ok(instance.index));
        return;
      case PhaseStatus::kRejected:
        done(ReplicateResult::NotLeader(result.higher.Leader(), instance.index));
        return;
      case PhaseStatus::kNoQuorum:
        break;
    }
    done(ReplicateResult::Retry(instance.index));
    {
      std::scoped_lock lock(mu_);
      if (generation != generation_)
        return;
    }
    scheduler_.After(kRedriveDelay, [this, instance] {
      Replay(instance.ballot, {{instance.index, instance}});
    });
  });
}

ReplicateResult MultiPaxos::Replicate(Command command, ClientId client_id) {
  auto promise = std::make_shared<std::promise<ReplicateResult>>();
  auto future = promise->get_future();
  Replicate(std::move(command), client_id,
            [promise](ReplicateResult result) { promise->set_value(result); });
  return future.get();
}

PeerMessage MultiPaxos::Handle(PeerMessage const& request) {
  PeerMessage reply;
  reply.tag = request.tag;
  reply.from = Id();
  if (auto const* m = request.As<PrepareRequest>())
    reply.payload = OnPrepare(*m, request.from);
  else if (auto const* m = request.As<AcceptRequest>())
    reply.payload = OnAccept(*m);
  else if (auto const* m = request.As<CommitRequest>())
    reply.payload = OnCommit(*m, request.from);
  else
    throw std::invalid_argument("not a request: " +
                                std::string(ToString(request.type())));
  return reply;
}

PrepareResponse MultiPaxos::OnPrepare(PrepareRequest const& request,
                                      PeerId sender) {
  std::scoped_lock lock(mu_);
  auto const b = request.ballot;
  if (b <= promised_)
    return {ResponseStatus::kReject, promised_, {}};
  max_seen_ = std::max(max_seen_, b);
  promised_ = b;
  if (sender != Id()) {
    ballot_ = b;
    last_heartbeat_ = scheduler_.Now();
    ArmPrepareLocked();
  }
  return {ResponseStatus::kOk, promised_, log_.InstancesSnapshot()};
}

AcceptResponse MultiPaxos::OnAccept(AcceptRequest const& request) {
  std::scoped_lock lock(mu_);
  auto instance = request.instance;
  if (instance.ballot < promised_)
    return {ResponseStatus::kReject, promised_};
  if (instance.ballot.peer() != Id()) {
    ObserveBallotLocked(instance.ballot);
    last_heartbeat_ = scheduler_.Now();
  }
  log_.Append(std::move(instance));
  return {ResponseStatus::kOk, promised_};
}

CommitResponse MultiPaxos::OnCommit(CommitRequest const& request,
                                    PeerId sender) {
  std::scoped_lock lock(mu_);
  if (request.ballot < promised_)
    return {ResponseStatus::kReject, promised_, log_.Frontiers().last_executed};
  ObserveBallotLocked(request.ballot);
  if (sender != Id())
    last_heartbeat_ = scheduler_.Now();
  log_.CommitUntil(request.last_executed, request.ballot);
  log_.TrimUntil(request.global_last_executed);
  return {ResponseStatus::kOk, promised_, log_.Frontiers().last_executed};
}

void MultiPaxos::RunPreparePhase(Ballot ballot, PrepareCallback done) {
  PeerMessage request{0, Id(), PrepareRequest{ballot}};
  Broadcast<PrepareTally>(
      transport_, request, config_.commit_interval,
      PrepareTally{config_.Majority(), ballot, 0, {}},
      [this, ballot, done = std::move(done)](PrepareTally::Result result) {
        if (!result.ok) {
          if (!result.higher.IsNone()) {
            std::scoped_lock lock(mu_);
            ObserveBallotLocked(result.higher);
          }
          done(std::nullopt);
          return;
        }
        PrepareOutcome outcome;
        for (auto const& log : result.logs) {
          for (auto const& instance : log)
            outcome.max_index = std::max(outcome.max_index, instance.index);
        }
        outcome.merged = MergeLogs(result.logs, ballot);
        done(std::move(outcome));
      });
}

void MultiPaxos::Replay(Ballot ballot, std::map<LogIndex, Instance> merged) {
  if (merged.empty())
    return;
  auto state = std::make_shared<ReplayState>();
  state->ballot = ballot;
  {
    std::scoped_lock lock(mu_);
    state->generation = generation_;
  }
  for (auto& [index, instance] : merged)
    state->queue.push_back(std::move(instance));
  PumpReplay(state);
}

void MultiPaxos::PumpReplay(std::shared_ptr<ReplayState> const& state) {
  while (true) {
    Instance next;
    {
      std::scoped_lock lock(state->mu);
      if (state->queue.empty() || state->in_flight >= kReplayWindow)
        return;
      next = std::move(state->queue.front());
      state->queue.pop_front();
      ++state->in_flight;
    }
    ReplayOne(state, std::move(next));
  }
}

void MultiPaxos::ReplayOne(std::shared_ptr<ReplayState> const& state,
                           Instance instance) {
  auto abandon = [state] {
    std::scoped_lock lock(state->mu);
    --state->in_flight;
    state->queue.clear();
  };
  {
    std::scoped_lock lock(mu_);
    if (state->generation != generation_ || stopped_ ||
        ballot_ != state->ballot || !IsLeaderLocked()) {
      abandon();
      return;
    }
  }
  instance.ballot = state->ballot;
  if (instance.IsDecided()) {
    instance.state = InstanceState::kCommitted;
    log_.Append(instance);
  }
  instance.state = InstanceState::kInProgress;
  RunAcceptPhase(instance, [this, state, instance, abandon](PhaseResult result) {
    switch (result.status) {
      case PhaseStatus::kOk:
        CommitLocally(instance.index);
        {
          std::scoped_lock lock(state->mu);
          --state->in_flight;
        }
        PumpReplay(state);
        return;
      case PhaseStatus::kRejected:
        abandon();
        return;
      case PhaseStatus::kNoQuorum:
        break;
    }
    if (!StillLeading(state->ballot)) {
      abandon();
      return;
    }
    scheduler_.After(kRedriveDelay, [this, state, instance] {
      ReplayOne(state, instance);
    });
  });
}

void MultiPaxos::RunCommitPhase(Ballot ballot,
                                LogIndex prev_global_last_executed,
                                std::function<void(LogIndex)> done) {
  auto const last_executed = log_.Frontiers().last_executed;
  PeerMessage request{
      0, Id(), CommitRequest{ballot, last_executed, prev_global_last_executed}};
  Broadcast<CommitTally>(
      transport_, request, config_.commit_interval,
      CommitTally{transport_.NumPeers(), ballot, 0, 0},
      [this, prev_global_last_executed,
       done = std::move(done)](CommitTally::Result result) {
        if (!result.higher.IsNone()) {
          std::scoped_lock lock(mu_);
          ObserveBallotLocked(result.higher);
        }
        done(result.min_executed
                 ? std::max(*result.min_executed, prev_global_last_executed)
                 : prev_global_last_executed);
      });
}

Ballot MultiPaxos::NextBallot() {
  std::scoped_lock lock(mu_);
  return NextBallotLocked();
}

bool MultiPaxos::BecomeLeader(Ballot ballot, LogIndex max_index) {
  std::scoped_lock lock(mu_);
  if (stopped_ || ballot.peer() != Id() || ballot < promised_ ||
      ballot <= ballot_)
    return false;
  ballot_ = promised_ = ballot;
  max_seen_ = std::max(max_seen_, ballot);
  log_.RaiseLastIndex(max_index);
  global_last_executed_ =
      std::max(global_last_executed_, log_.Frontiers().global_last_executed);
  auto const generation = generation_;
  scheduler_.After(Nanos::zero(),
                   [this, generation, ballot] { CommitTick(generation, ballot); });
  return true;
}

Ballot MultiPaxos::CurrentBallot() const {
  std::scoped_lock lock(mu_);
  return ballot_;
}

Ballot MultiPaxos::PromisedBallot() const {
  std::scoped_lock lock(mu_);
  return promised_;
}

bool MultiPaxos::IsLeader() const {
  std::scoped_lock lock(mu_);
  return IsLeaderLocked();
}

std::optional<PeerId> MultiPaxos::Leader() const {
  std::scoped_lock lock(mu_);
  return ballot_.Leader();
}

LogIndex MultiPaxos::GlobalLastExecuted() const {
  return log_.Frontiers().global_last_executed;
}

Nanos MultiPaxos::LastHeartbeat() const {
  std::scoped_lock lock(mu_);
  return last_heartbeat_;
}

bool MultiPaxos::IsLeaderLocked() const {
  return !ballot_.IsNone() && ballot_.peer() == Id();
}

Ballot MultiPaxos::NextBallotLocked() {
  max_seen_ = Ballot::Make(max_seen_.round() + 1, Id());
  return max_seen_;
}

void MultiPaxos::ObserveBallotLocked(Ballot ballot) {
  max_seen_ = std::max(max_seen_, ballot);
  if (ballot > promised_)
    promised_ = ballot;
  // A ballot of our own that we did not win through prepare never makes us
  // leader.
  if (ballot > ballot_ && ballot.peer() != Id()) {
    ballot_ = ballot;
    ArmPrepareLocked();
  }
}

void MultiPaxos::ArmPrepareLocked(bool quick) {
  if (stopped_ || !started_ || prepare_armed_)
    return;
  prepare_armed_ = true;
  auto const jitter_max = config_.election_jitter_max.count();
  auto const jitter =
      jitter_max > 0
          ? std::uniform_int_distribution<std::int64_t>(0, jitter_max)(rng_)
          : 0;
  auto const delay =
      (quick ? Nanos::zero() : config_.election_timeout_base) + Nanos(jitter);
  auto const window_start = scheduler_.Now();
  auto const generation = generation_;
  scheduler_.After(delay, [this, generation, window_start] {
    PrepareTick(generation, window_start);
  });
}

void MultiPaxos::PrepareTick(std::uint64_t generation, Nanos window_start) {
  Ballot ballot;
  {
    std::scoped_lock lock(mu_);
    if (generation != generation_ || stopped_)
      return;
    if (IsLeaderLocked()) {
      prepare_armed_ = false;
      return;
    }
    if (last_heartbeat_ >= window_start) {
      prepare_armed_ = false;
      ArmPrepareLocked();
      return;
    }
    ballot = NextBallotLocked();
  }
  // prepare_armed_ stays set while the phase is in flight.
  RunPreparePhase(ballot, [this, ballot, generation](
                              std::optional<PrepareOutcome> outcome) {
    if (outcome && BecomeLeader(ballot, outcome->max_index))
      TakeLeadership(ballot, std::move(*outcome));
    std::scoped_lock lock(mu_);
    if (generation != generation_)
      return;
    prepare_armed_ = false;
    if (!IsLeaderLocked())
      ArmPrepareLocked(!outcome && promised_ == ballot);
  });
}

void MultiPaxos::CommitTick(std::uint64_t generation, Ballot ballot) {
  LogIndex prev;
  {
    std::scoped_lock lock(mu_);
    if (generation != generation_ || stopped_ || ballot_ != ballot ||
        !IsLeaderLocked())
      return;
    prev = global_last_executed_;
    scheduler_.After(config_.commit_interval, [this, generation, ballot] {
      CommitTick(generation, ballot);
    });
  }
  RunCommitPhase(ballot, prev, [this](LogIndex gle) {
    {
      std::scoped_lock lock(mu_);
      if (gle <= global_last_executed_)
        return;
      global_last_executed_ = gle;
    }
    log_.TrimUntil(gle);
  });
}

void MultiPaxos::TakeLeadership(Ballot ballot, PrepareOutcome outcome) {
  auto const gle = log_.Frontiers().global_last_executed;
  auto& merged = outcome.merged;
  merged.erase(merged.begin(), merged.upper_bound(gle));
  for (LogIndex i = gle + 1; i <= outcome.max_index; ++i) {
    if (!merged.contains(i))
      merged.emplace(i, Instance{ballot, i, 0, Command::Noop(),
                                 InstanceState::kInProgress});
  }
  Replay(ballot, std::move(merged));
}

void MultiPaxos::RunAcceptPhase(Instance const& instance,
                                std::function<void(PhaseResult)> done) {
  PeerMessage request{0, Id(), AcceptRequest{instance}};
  Broadcast<AcceptTally>(
      transport_, request, config_.commit_interval,
      AcceptTally{config_.Majority(), instance.ballot, 0},
      [this, done = std::move(done)](AcceptTally::Result result) {
        if (result.rejected) {
          {
            std::scoped_lock lock(mu_);
            ObserveBallotLocked(result.higher);
          }
          done({PhaseStatus::kRejected, result.higher});
          return;
        }
        done({result.oks >= config_.Majority() ? PhaseStatus::kOk
                                                : PhaseStatus::kNoQuorum,
              Ballot()});
      });
}

void MultiPaxos::CommitLocally(LogIndex index) {
  try {
    log_.Commit(index);
  } catch (MissingInstance const&) {
    // Only possible if the self-accept was skipped; followers still commit.
  }
}

bool MultiPaxos::StillLeading(Ballot ballot) const {
  std::scoped_lock lock(mu_);
  return !stopped_ && ballot_ == ballot && IsLeaderLocked();
}

}  // namespace replicant
