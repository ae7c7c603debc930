#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <vector>

#include "replicant/instance.h"
#include "replicant/kvstore.h"

namespace replicant {

struct LogFrontiers {
  LogIndex last_index = 0;
  LogIndex last_executed = 0;
  LogIndex global_last_executed = 0;

  bool operator==(LogFrontiers const&) const = default;
};

struct Execution {
  ClientId client_id = 0;
  LogIndex index = 0;
  Command command;
  CommandResult result;
};

// The MultiPaxos log: a thread-safe, unbounded producer-consumer structure.
// Many producers append and commit; exactly one consumer executes instances
// in index order. Storage is sparse (followers can hold gaps, trimming
// removes prefixes).
//
// Invariants:
//   global_last_executed <= last_executed <= last_index
//   every index in (global_last_executed, last_executed] is present and
//   Executed
//   a Committed/Executed instance never changes its (command, client_id)
class Log {
 public:
  // Invoked under the log lock each time an instance becomes Committed.
  // Must not call back into the log.
  using CommitObserver = std::function<void(Instance const&)>;

  Log() = default;
  Log(Log const&) = delete;
  Log& operator=(Log const&) = delete;

  // Reserves the next index: max(seen index) + 1.
  LogIndex AdvanceIndex();

  // Ensures later AdvanceIndex calls return indexes above `index`.
  void RaiseLastIndex(LogIndex index);

  // Stores `instance` following the merge rule: decided entries are frozen
  // (and must agree, else SafetyViolation), a higher ballot overwrites an
  // in-progress entry, an equal or lower ballot is ignored. Indexes already
  // trimmed are ignored.
  void Append(Instance instance);

  // Marks the instance at `index` Committed. Throws MissingInstance if it is
  // absent and not yet trimmed.
  void Commit(LogIndex index);

  // Follower side of the commit phase: commits every present in-progress
  // instance at or below `leader_last_executed` that carries `ballot`.
  void CommitUntil(LogIndex leader_last_executed, Ballot ballot);

  // Blocks until the next instance is committed, executes it and returns it.
  // Returns nullopt once Stop() has been called.
  std::optional<Execution> ExecuteNext(KVStore& store);

  // Non-blocking variant for single-threaded drivers.
  std::optional<Execution> TryExecuteNext(KVStore& store);

  // Drops every instance at or below `global_last_executed`.
  void TrimUntil(LogIndex global_last_executed);

  // Retained instances ordered by index; a consistent point-in-time view.
  std::vector<Instance> InstancesSnapshot() const;

  LogFrontiers Frontiers() const;
  std::optional<Instance> At(LogIndex index) const;
  std::size_t Size() const;

  void Stop();
  void SetCommitObserver(CommitObserver observer);

 private:
  bool IsExecutableLocked() const;
  Execution ExecuteLocked(KVStore& store);
  void MarkCommittedLocked(Instance& instance);

  mutable std::mutex mu_;
  std::condition_variable executable_cv_;
  std::map<LogIndex, Instance> log_;
  LogIndex last_index_ = 0;
  LogIndex last_executed_ = 0;
  LogIndex global_last_executed_ = 0;
  bool stopped_ = false;
  CommitObserver on_commit_;
};

}  // namespace replicant
