#pragma once

#include <cstdint>
#include <string_view>

#include "replicant/command.h"
#include "replicant/types.h"

namespace replicant {

// Legal transitions: InProgress -> Committed -> Executed.
enum class InstanceState : std::uint8_t { kInProgress, kCommitted, kExecuted };

std::string_view ToString(InstanceState state);

struct Instance {
  Ballot ballot;
  LogIndex index = 0;
  ClientId client_id = 0;
  Command command;
  InstanceState state = InstanceState::kInProgress;

  bool IsInProgress() const { return state == InstanceState::kInProgress; }
  bool IsCommitted() const { return state == InstanceState::kCommitted; }
  bool IsExecuted() const { return state == InstanceState::kExecuted; }
  bool IsDecided() const { return !IsInProgress(); }

  // The value Paxos agrees on: command plus issuing client.
  bool SameValue(Instance const& other) const {
    return command == other.command && client_id == other.client_id;
  }

  bool operator==(Instance const&) const = default;
};

}  // namespace replicant
