#include "replicant/loadgen/search.h"

#include "replicant/loadgen/report.h"

namespace replicant::loadgen {

SearchResult FindMaxThroughput(SearchConfig const& search, Trial const& trial) {
  if (search.min_rate == 0 || search.max_rate < search.min_rate ||
      search.resolution == 0)
    throw std::invalid_argument("bad search bounds");
  auto const target = static_cast<std::uint64_t>(search.target_p99.count());
  SearchResult result;
  auto meets = [&](std::uint64_t rate) {
    auto p99 = trial(rate);
    result.probes.emplace_back(rate, p99);
    return p99 <= target;
  };
  if (!meets(search.min_rate))
    throw ZeroCapacity(search.min_rate);
  std::uint64_t lo = search.min_rate;
  std::uint64_t hi = search.max_rate;
  if (hi == lo || meets(hi)) {
    result.rate = hi;
    return result;
  }
  // Invariant: lo meets the target, hi misses it.
  while (hi - lo > search.resolution) {
    auto mid = lo + (hi - lo) / 2;
    if (meets(mid))
      lo = mid;
    else
      hi = mid;
  }
  result.rate = lo;
  return result;
}

SearchResult FindMaxThroughput(SearchConfig const& search, RunConfig base,
                               WorkloadSpec const& spec) {
  base.mode = Mode::kOpen;
  return FindMaxThroughput(search, [&](std::uint64_t rate) -> std::uint64_t {
    base.rate = rate;
    auto run = RunOpenLoop(base, spec);
    std::size_t measured = 0, errors = 0;
    for (auto const& s : run.samples) {
      measured += !s.warmup;
      errors += !s.warmup && !s.ok;
    }
    // More than 1% failures cannot meet a p99 target.
    if (errors * 100 > measured)
      return UINT64_MAX;
    try {
      return Percentile(run.samples, 0.99, Latency::kIntended);
    } catch (EmptySample const&) {
      return UINT64_MAX;
    }
  });
}

}  // namespace replicant::loadgen
