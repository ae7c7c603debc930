#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "replicant/loadgen/driver.h"
#include "replicant/loadgen/workload.h"

namespace replicant::loadgen {

class ZeroCapacity : public std::runtime_error {
 public:
  explicit ZeroCapacity(std::uint64_t rate)
      : std::runtime_error("target p99 missed even at " + std::to_string(rate) +
                           " ops/s"),
        rate_(rate) {}
  std::uint64_t rate() const { return rate_; }

 private:
  std::uint64_t rate_;
};

struct SearchConfig {
  std::uint64_t min_rate = 100;
  std::uint64_t max_rate = 100000;
  std::uint64_t resolution = 100;
  Nanos target_p99 = 20ms;
};

struct SearchResult {
  std::uint64_t rate = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> probes;  // rate, p99 ns
};

// Runs one fixed-duration trial at the given rate and returns its intended p99.
using Trial = std::function<std::uint64_t(std::uint64_t rate)>;

// Highest rate in [min_rate, max_rate] whose trial p99 meets the target, to
// within `resolution`. Throws ZeroCapacity if min_rate already misses.
SearchResult FindMaxThroughput(SearchConfig const& search, Trial const& trial);

// Open-loop trials with `base` (rate overwritten per probe). A trial with no
// successful samples counts as a miss.
SearchResult FindMaxThroughput(SearchConfig const& search, RunConfig base,
                               WorkloadSpec const& spec);

}  // namespace replicant::loadgen
