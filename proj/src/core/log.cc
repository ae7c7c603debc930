#include "replicant/log.h"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <string>

#include "replicant/errors.h"

namespace replicant {

namespace {

// Executor re-checks the frontier at least this often even without a wakeup.
constexpr auto kExecutorRecheck = std::chrono::milliseconds(50);

}  // namespace

std::string_view ToString(InstanceState state) {
  switch (state) {
    case InstanceState::kInProgress:
      return "in_progress";
    case InstanceState::kCommitted:
      return "committed";
    case InstanceState::kExecuted:
      return "executed";
  }
  return "?";
}

LogIndex Log::AdvanceIndex() {
  std::scoped_lock lock(mu_);
  return ++last_index_;
}

void Log::RaiseLastIndex(LogIndex index) {
  std::scoped_lock lock(mu_);
  last_index_ = std::max(last_index_, index);
}

void Log::Append(Instance instance) {
  if (instance.index < 1)
    throw std::invalid_argument("log index must be positive");

  std::scoped_lock lock(mu_);
  auto const i = instance.index;
  if (i <= global_last_executed_)
    return;
  if (instance.IsExecuted())
    instance.state = InstanceState::kCommitted;
  last_index_ = std::max(last_index_, i);

  auto it = log_.find(i);
  if (it == log_.end()) {
    auto& stored = log_.emplace(i, std::move(instance)).first->second;
    if (stored.IsCommitted()) {
      if (on_commit_)
        on_commit_(stored);
      if (IsExecutableLocked())
        executable_cv_.notify_one();
    }
    return;
  }

  auto& existing = it->second;
  if (existing.IsDecided()) {
    if (!existing.SameValue(instance)) {
      throw SafetyViolation("append contradicts decided instance at index " +
                            std::to_string(i));
    }
    return;
  }
  if (instance.ballot > existing.ballot) {
    existing = std::move(instance);
    if (existing.IsCommitted()) {
      if (on_commit_)
        on_commit_(existing);
      if (IsExecutableLocked())
        executable_cv_.notify_one();
    }
  }
}

void Log::Commit(LogIndex index) {
  std::scoped_lock lock(mu_);
  if (index <= global_last_executed_)
    return;
  auto it = log_.find(index);
  if (it == log_.end())
    throw MissingInstance("commit of absent index " + std::to_string(index));
  if (it->second.IsInProgress())
    MarkCommittedLocked(it->second);
  if (IsExecutableLocked())
    executable_cv_.notify_one();
}

void Log::CommitUntil(LogIndex leader_last_executed, Ballot ballot) {
  std::scoped_lock lock(mu_);
  for (auto it = log_.upper_bound(last_executed_);
       it != log_.end() && it->first <= leader_last_executed; ++it) {
    if (it->second.IsInProgress() && it->second.ballot == ballot)
      MarkCommittedLocked(it->second);
  }
  if (IsExecutableLocked())
    executable_cv_.notify_one();
}

std::optional<Execution> Log::ExecuteNext(KVStore& store) {
  std::unique_lock lock(mu_);
  while (!stopped_ && !IsExecutableLocked())
    executable_cv_.wait_for(lock, kExecutorRecheck);
  if (stopped_)
    return std::nullopt;
  return ExecuteLocked(store);
}

std::optional<Execution> Log::TryExecuteNext(KVStore& store) {
  std::scoped_lock lock(mu_);
  if (!IsExecutableLocked())
    return std::nullopt;
  return ExecuteLocked(store);
}

void Log::TrimUntil(LogIndex global_last_executed) {
  std::scoped_lock lock(mu_);
  if (global_last_executed <= global_last_executed_)
    return;
  if (global_last_executed > last_executed_) {
    throw TrimBeyondExecuted("trim to " + std::to_string(global_last_executed) +
                             " beyond last executed " +
                             std::to_string(last_executed_));
  }
  log_.erase(log_.begin(), log_.upper_bound(global_last_executed));
  global_last_executed_ = global_last_executed;
}

std::vector<Instance> Log::InstancesSnapshot() const {
  std::scoped_lock lock(mu_);
  std::vector<Instance> out;
  out.reserve(log_.size());
  for (auto const& [index, instance] : log_)
    out.push_back(instance);
  return out;
}

LogFrontiers Log::Frontiers() const {
  std::scoped_lock lock(mu_);
  return {last_index_, last_executed_, global_last_executed_};
}

std::optional<Instance> Log::At(LogIndex index) const {
  std::scoped_lock lock(mu_);
  auto it = log_.find(index);
  if (it == log_.end())
    return std::nullopt;
  return it->second;
}

std::size_t Log::Size() const {
  std::scoped_lock lock(mu_);
  return log_.size();
}

void Log::Stop() {
  {
    std::scoped_lock lock(mu_);
    stopped_ = true;
  }
  executable_cv_.notify_all();
}

void Log::SetCommitObserver(CommitObserver observer) {
  std::scoped_lock lock(mu_);
  on_commit_ = std::move(observer);
}

bool Log::IsExecutableLocked() const {
  auto it = log_.find(last_executed_ + 1);
  return it != log_.end() && it->second.IsCommitted();
}

Execution Log::ExecuteLocked(KVStore& store) {
  auto& instance = log_.at(last_executed_ + 1);
  auto result = store.Execute(instance.command);
  instance.state = InstanceState::kExecuted;
  ++last_executed_;
  return {instance.client_id, instance.index, instance.command,
          std::move(result)};
}

void Log::MarkCommittedLocked(Instance& instance) {
  instance.state = InstanceState::kCommitted;
  if (on_commit_)
    on_commit_(instance);
}

}  // namespace replicant
