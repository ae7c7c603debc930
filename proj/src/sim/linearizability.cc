#include "replicant/sim/linearizability.h"

#include <algorithm>
#include <limits>
#include <map>
#include <unordered_set>

namespace replicant::sim {

namespace {

using Value = std::optional<std::string>;
constexpr Nanos kNever = Nanos::max();

struct KeyOp {
  std::uint64_t id;
  Command const* command;
  Nanos invoke;
  Nanos complete;
  std::optional<CommandResult> const* result;
};

// Applies `command` to a single-key register and reports whether the
// recorded result is consistent.
bool Step(Value& value, KeyOp const& op) {
  CommandResult actual;
  auto next = value;
  switch (op.command->kind) {
    case CommandKind::kGet:
      actual = {value.has_value(), value};
      break;
    case CommandKind::kPut:
      actual = {true, std::nullopt};
      next = op.command->value;
      break;
    case CommandKind::kDel:
      actual = {value.has_value(), std::nullopt};
      next.reset();
      break;
    case CommandKind::kNoop:
      actual = {true, std::nullopt};
      break;
  }
  if (op.result->has_value() && **op.result != actual)
    return false;
  value = std::move(next);
  return true;
}

class KeySearch {
 public:
  explicit KeySearch(std::vector<KeyOp> ops) : ops_(std::move(ops)) {
    std::sort(ops_.begin(), ops_.end(),
              [](auto const& a, auto const& b) { return a.invoke < b.invoke; });
    words_ = (ops_.size() + 63) / 64;
  }

  bool Run() {
    std::vector<std::uint64_t> done(words_, 0);
    return Search(done, std::nullopt, 0);
  }

  std::vector<std::uint64_t> const& Order() const { return order_; }
  std::size_t Deepest() const { return deepest_; }
  std::vector<KeyOp> const& Ops() const { return ops_; }

 private:
  struct StateHash {
    std::size_t operator()(std::pair<std::vector<std::uint64_t>, Value> const& s)
        const {
      std::size_t h = 1469598103934665603ull;
      for (auto w : s.first)
        h = (h ^ w) * 1099511628211ull;
      if (s.second)
        h ^= std::hash<std::string>{}(*s.second) + 0x9e3779b97f4a7c15ull;
      return h;
    }
  };

  static bool Has(std::vector<std::uint64_t> const& set, std::size_t i) {
    return (set[i / 64] >> (i % 64)) & 1;
  }

  bool Search(std::vector<std::uint64_t>& done, Value value, std::size_t depth) {
    deepest_ = std::max(deepest_, depth);
    if (depth == ops_.size())
      return true;
    if (!seen_.emplace(done, value).second)
      return false;

    // Only ops invoked before the earliest pending completion may go next.
    Nanos horizon = kNever;
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      if (!Has(done, i))
        horizon = std::min(horizon, ops_[i].complete);
    }
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      if (Has(done, i))
        continue;
      if (ops_[i].invoke > horizon)
        break;
      auto next = value;
      if (!Step(next, ops_[i]))
        continue;
      done[i / 64] |= std::uint64_t{1} << (i % 64);
      order_.push_back(ops_[i].id);
      if (Search(done, std::move(next), depth + 1))
        return true;
      order_.pop_back();
      done[i / 64] &= ~(std::uint64_t{1} << (i % 64));
    }
    return false;
  }

  std::vector<KeyOp> ops_;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> order_;
  std::size_t deepest_ = 0;
  std::unordered_set<std::pair<std::vector<std::uint64_t>, Value>, StateHash> seen_;
};

}  // namespace

LinearizabilityVerdict CheckLinearizable(std::vector<HistoryOp> const& history,
                                         std::size_t budget) {
  if (history.size() > budget) {
    throw BudgetExceeded("history of " + std::to_string(history.size()) +
                         " ops exceeds budget " + std::to_string(budget));
  }
  std::map<std::string, std::vector<KeyOp>> by_key;
  for (auto const& op : history) {
    if (op.command.kind == CommandKind::kNoop)
      continue;
    if (op.complete && *op.complete < op.invoke)
      throw std::invalid_argument("op " + std::to_string(op.id) +
                                  " completes before it is invoked");
    by_key[op.command.key].push_back(KeyOp{
        op.id, &op.command, op.invoke, op.complete.value_or(kNever), &op.result});
  }

  LinearizabilityVerdict verdict;
  for (auto& [key, ops] : by_key) {
    KeySearch search(std::move(ops));
    if (!search.Run()) {
      verdict.linearizable = false;
      verdict.witness.clear();
      verdict.conflict = "key '" + key + "': no valid order for " +
                         std::to_string(search.Ops().size()) +
                         " ops; longest consistent prefix " +
                         std::to_string(search.Deepest());
      return verdict;
    }
    verdict.witness.insert(verdict.witness.end(), search.Order().begin(),
                           search.Order().end());
  }
  return verdict;
}

}  // namespace replicant::sim
