#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace replicant {

// kNoop only ever appears in instances the leader synthesizes to fill log
// holes after an election; clients cannot issue it.
enum class CommandKind : std::uint8_t { kGet, kPut, kDel, kNoop };

struct Command {
  CommandKind kind = CommandKind::kNoop;
  std::string key;
  std::string value;

  static Command Get(std::string key);
  static Command Put(std::string key, std::string value);
  static Command Del(std::string key);
  static Command Noop();

  bool operator==(Command const&) const = default;
};

// Non-empty key for Get/Put/Del, empty value unless Put, empty key for Noop.
bool IsWellFormed(Command const& command);

std::string_view ToString(CommandKind kind);
std::optional<CommandKind> ParseCommandKind(std::string_view name);

struct CommandResult {
  bool ok = false;
  std::optional<std::string> value;

  bool operator==(CommandResult const&) const = default;
};

}  // namespace replicant
