#include "replicant/command.h"

#include <utility>

namespace replicant {

Command Command::Get(std::string key) {
  return {CommandKind::kGet, std::move(key), {}};
}

Command Command::Put(std::string key, std::string value) {
  return {CommandKind::kPut, std::move(key), std::move(value)};
}

Command Command::Del(std::string key) {
  return {CommandKind::kDel, std::move(key), {}};
}

Command Command::Noop() {
  return {CommandKind::kNoop, {}, {}};
}

bool IsWellFormed(Command const& command) {
  switch (command.kind) {
    case CommandKind::kPut:
      return !command.key.empty();
    case CommandKind::kGet:
    case CommandKind::kDel:
      return !command.key.empty() && command.value.empty();
    case CommandKind::kNoop:
      return command.key.empty() && command.value.empty();
  }
  return false;
}

std::string_view ToString(CommandKind kind) {
  switch (kind) {
    case CommandKind::kGet:
      return "get";
    case CommandKind::kPut:
      return "put";
    case CommandKind::kDel:
      return "del";
    case CommandKind::kNoop:
      return "noop";
  }
  return "?";
}

std::optional<CommandKind> ParseCommandKind(std::string_view name) {
  if (name == "get")
    return CommandKind::kGet;
  if (name == "put")
    return CommandKind::kPut;
  if (name == "del")
    return CommandKind::kDel;
  if (name == "noop")
    return CommandKind::kNoop;
  return std::nullopt;
}

}  // namespace replicant
