#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <unordered_map>

#include "replicant/command.h"

namespace replicant {

// The replicated state machine: a plain hash table. Not thread-safe; exactly
// one executor drives it.
class KVStore {
 public:
  CommandResult Execute(Command const& command);

  std::size_t Size() const { return map_.size(); }

  // Ordered copy of the contents, for comparisons in tests and the simulator.
  std::map<std::string, std::string> Contents() const;

 private:
  std::unordered_map<std::string, std::string> map_;
};

}  // namespace replicant
