#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "replicant/loadgen/workload.h"
#include "replicant/types.h"

namespace replicant::loadgen {

using namespace std::chrono_literals;

enum class Mode : std::uint8_t { kOpen, kClosed };

struct RunConfig {
  Mode mode = Mode::kOpen;
  // Open loop: arrival rate. Closed loop: optional throttle, 0 = none.
  std::uint64_t rate = 1000;
  std::size_t threads = 64;   // closed-loop workers
  std::size_t workers = 64;   // open-loop dispatch pool
  Nanos duration = 60s;       // measured window, after warmup
  Nanos warmup = 20s;
  std::vector<std::string> cluster;
  std::uint64_t seed = 1;
  bool poisson = false;
  Nanos op_timeout = 10s;

  void Validate() const;
};

// Times are nanoseconds since the run's t0.
struct LatencySample {
  OpKind kind = OpKind::kRead;
  std::int64_t scheduled_start = 0;
  std::int64_t actual_start = 0;
  std::int64_t completion = 0;
  bool ok = false;
  std::uint32_t retries = 0;
  bool warmup = false;

  std::int64_t Intended() const { return completion - scheduled_start; }
  std::int64_t Service() const { return completion - actual_start; }
};

struct RunResult {
  std::vector<LatencySample> samples;  // ordered by scheduled_start
  Nanos measured_window{0};
  // Time workers spent inside operations over their available time.
  double worker_busy = 0;
  // CPU time of this process during the run over wall time x hardware
  // threads: how close the generator itself came to saturating the host.
  double generator_cpu = 0;
  // Largest backlog of due-but-undispatched arrivals (open loop).
  std::size_t max_backlog = 0;
};

// Inserts every record once. Throws std::runtime_error if a record cannot
// be confirmed after bounded retries.
void LoadPhase(RunConfig const& config, WorkloadSpec const& spec,
               std::size_t loaders = 16);

RunResult RunOpenLoop(RunConfig const& config, WorkloadSpec const& spec);
RunResult RunClosedLoop(RunConfig const& config, WorkloadSpec const& spec);
RunResult Run(RunConfig const& config, WorkloadSpec const& spec);

// Arrival offset of operation i at `rate` ops/s: floor(i * 1e9 / rate) ns.
std::int64_t ScheduleOffset(std::uint64_t i, std::uint64_t rate);

}  // namespace replicant::loadgen
