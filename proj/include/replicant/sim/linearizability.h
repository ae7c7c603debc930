#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "replicant/command.h"
#include "replicant/types.h"

namespace replicant::sim {

// One client operation. `complete` is nullopt for an operation whose reply
// was never observed (it may take effect any time after invocation);
// `result` is nullopt when its outcome is unknown.
struct HistoryOp {
  std::uint64_t id = 0;
  Command command;
  Nanos invoke{0};
  std::optional<Nanos> complete;
  std::optional<CommandResult> result;
};

struct LinearizabilityVerdict {
  bool linearizable = true;
  std::vector<std::uint64_t> witness;  // op ids in a valid order, per key
  std::string conflict;                // set when not linearizable
};

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDefaultHistoryBudget = 200;

// Exhaustive Wing-Gong-Lowe search with memoization of (linearized set,
// store state), run independently per key. Throws BudgetExceeded when the
// history holds more than `budget` operations.
LinearizabilityVerdict CheckLinearizable(std::vector<HistoryOp> const& history,
                                         std::size_t budget = kDefaultHistoryBudget);

}  // namespace replicant::sim
