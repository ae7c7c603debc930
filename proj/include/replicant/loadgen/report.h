#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "replicant/loadgen/driver.h"
#include "replicant/loadgen/histogram.h"

namespace replicant::loadgen {

enum class Latency : std::uint8_t { kIntended, kService };

struct LatencySummary {
  std::uint64_t p50 = 0;
  std::uint64_t p90 = 0;
  std::uint64_t p95 = 0;
  std::uint64_t p99 = 0;
  std::uint64_t p999 = 0;
};

struct RunSummary {
  std::size_t samples = 0;         // measured, successful
  std::size_t warmup_samples = 0;
  std::size_t errors = 0;
  std::size_t retries = 0;
  double throughput = 0;           // successful ops/s over the measured window
  LatencySummary intended;
  LatencySummary service;
};

// Histogram over successful post-warmup samples.
Histogram BuildHistogram(std::vector<LatencySample> const& samples, Latency which);

// Nearest-rank percentile over successful post-warmup samples.
// Throws EmptySample.
std::uint64_t Percentile(std::vector<LatencySample> const& samples, double p,
                         Latency which);

// Throws EmptySample when no successful post-warmup sample exists.
RunSummary Summarize(RunResult const& result);

// Header plus one row.
std::string SummaryCsv(RunSummary const& summary);

// Rows of (latency_ns, cumulative_fraction), one per distinct latency over
// successful post-warmup samples. Header only when there are none.
std::string CdfCsv(std::vector<LatencySample> const& samples, Latency which);

}  // namespace replicant::loadgen
