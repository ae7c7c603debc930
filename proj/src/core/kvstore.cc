#include "replicant/kvstore.h"

namespace replicant {

CommandResult KVStore::Execute(Command const& command) {
  switch (command.kind) {
    case CommandKind::kGet: {
      auto it = map_.find(command.key);
      if (it == map_.end())
        return {false, std::nullopt};
      return {true, it->second};
    }
    case CommandKind::kPut:
      map_.insert_or_assign(command.key, command.value);
      return {true, std::nullopt};
    case CommandKind::kDel:
      return {map_.erase(command.key) > 0, std::nullopt};
    case CommandKind::kNoop:
      return {true, std::nullopt};
  }
  return {false, std::nullopt};
}

std::map<std::string, std::string> KVStore::Contents() const {
  return {map_.begin(), map_.end()};
}

}  // namespace replicant
