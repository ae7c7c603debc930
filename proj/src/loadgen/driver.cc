#include "replicant/loadgen/driver.h"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

#include <sys/resource.h>

#include "replicant/loadgen/client.h"

namespace replicant::loadgen {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t Since(Clock::time_point t0) {
  return std::chrono::duration_cast<Nanos>(Clock::now() - t0).count();
}

struct Arrival {
  Op op;
  std::string line;
  std::int64_t scheduled = 0;
};

LatencySample Execute(KvClient& client, Arrival const& arrival,
                      std::int64_t actual_start, Clock::time_point t0,
                      std::int64_t warmup_end) {
  auto reply = client.Execute(arrival.line);
  LatencySample s;
  s.kind = arrival.op.kind;
  s.scheduled_start = arrival.scheduled;
  s.actual_start = actual_start;
  s.completion = std::max(Since(t0), actual_start);
  s.ok = reply.Succeeded();
  s.retries = static_cast<std::uint32_t>(reply.retries);
  s.warmup = arrival.scheduled < warmup_end;
  return s;
}

Nanos CpuTime() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  auto tv = [](timeval t) { return Nanos(t.tv_sec * 1'000'000'000LL + t.tv_usec * 1000LL); };
  return tv(usage.ru_utime) + tv(usage.ru_stime);
}

double CpuFraction(Nanos cpu, std::int64_t wall_ns) {
  auto const cores = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<double>(cpu.count()) / (static_cast<double>(wall_ns) * cores);
}

void SortSamples(std::vector<LatencySample>& samples) {
  std::sort(samples.begin(), samples.end(), [](auto const& a, auto const& b) {
    return a.scheduled_start < b.scheduled_start;
  });
}

}  // namespace

void RunConfig::Validate() const {
  if (cluster.empty())
    throw std::invalid_argument("no cluster addresses given");
  if (duration <= Nanos::zero())
    throw std::invalid_argument("duration must be positive");
  if (warmup < Nanos::zero())
    throw std::invalid_argument("warmup must not be negative");
  if (mode == Mode::kOpen && (rate == 0 || workers == 0))
    throw std::invalid_argument("open loop needs a positive rate and worker pool");
  if (mode == Mode::kClosed && threads == 0)
    throw std::invalid_argument("closed loop needs at least one thread");
}

std::int64_t ScheduleOffset(std::uint64_t i, std::uint64_t rate) {
  return static_cast<std::int64_t>(
      static_cast<unsigned __int128>(i) * 1'000'000'000u / rate);
}

void LoadPhase(RunConfig const& config, WorkloadSpec const& spec,
               std::size_t loaders) {
  if (spec.record_count == 0)
    return;
  loaders = std::max<std::size_t>(1, std::min<std::size_t>(loaders, spec.record_count));
  std::atomic<std::uint64_t> next{0};
  std::mutex failure_mu;
  std::string failure;
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < loaders; ++t) {
    threads.emplace_back([&] {
      KvClient client(config.cluster, config.op_timeout);
      while (true) {
        auto id = next.fetch_add(1);
        if (id >= spec.record_count)
          return;
        auto line = "put " + RecordKey(id, spec.key_len) + " " +
                    RecordValue(config.seed, id, 0, spec.value_len);
        bool confirmed = false;
        ClientReply reply;
        for (int attempt = 0; attempt < 3 && !confirmed; ++attempt) {
          reply = client.Execute(line);
          confirmed = reply.status == ClientReply::Status::kOk;
        }
        if (!confirmed) {
          std::scoped_lock lock(failure_mu);
          if (failure.empty())
            failure = "record " + std::to_string(id) + " not confirmed: " + reply.line;
          next.store(spec.record_count);
          return;
        }
      }
    });
  }
  for (auto& t : threads)
    t.join();
  if (!failure.empty())
    throw std::runtime_error(failure);
}

RunResult RunOpenLoop(RunConfig const& config, WorkloadSpec const& spec) {
  config.Validate();
  OpStream stream(spec, config.seed);
  auto const total = (config.warmup + config.duration).count();
  auto const warmup_end = config.warmup.count();

  std::mutex mu;
  std::condition_variable cv;
  std::deque<Arrival> queue;
  bool closing = false;
  std::size_t idle = config.workers;
  std::size_t max_backlog = 0;
  std::atomic<std::int64_t> busy_ns{0};
  std::vector<std::vector<LatencySample>> per_worker(config.workers);

  auto const cpu0 = CpuTime();
  auto const t0 = Clock::now() + 20ms;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < config.workers; ++w) {
    workers.emplace_back([&, w] {
      KvClient client(config.cluster, config.op_timeout);
      auto& out = per_worker[w];
      while (true) {
        Arrival arrival;
        {
          std::unique_lock lock(mu);
          cv.wait(lock, [&] { return closing || !queue.empty(); });
          if (queue.empty())
            return;
          arrival = std::move(queue.front());
          queue.pop_front();
          --idle;
        }
        auto const start = Since(t0);
        out.push_back(Execute(client, arrival, start, t0, warmup_end));
        busy_ns.fetch_add(out.back().completion - start);
        std::scoped_lock lock(mu);
        ++idle;
      }
    });
  }

  std::mt19937_64 rng(config.seed ^ 0xa0761d6478bd642full);
  std::exponential_distribution<double> gap(static_cast<double>(config.rate) / 1e9);
  double poisson_clock = 0;
  for (std::uint64_t i = 0;; ++i) {
    std::int64_t scheduled;
    if (config.poisson) {
      poisson_clock += gap(rng);
      scheduled = static_cast<std::int64_t>(poisson_clock);
    } else {
      scheduled = ScheduleOffset(i, config.rate);
    }
    if (scheduled >= total)
      break;
    Arrival arrival;
    arrival.op = stream.Next();
    arrival.line = stream.Line(arrival.op);
    arrival.scheduled = scheduled;
    std::this_thread::sleep_until(t0 + Nanos(scheduled));
    {
      std::scoped_lock lock(mu);
      queue.push_back(std::move(arrival));
      if (queue.size() > idle)
        max_backlog = std::max(max_backlog, queue.size() - idle);
    }
    cv.notify_one();
  }
  {
    std::scoped_lock lock(mu);
    closing = true;
  }
  cv.notify_all();
  for (auto& t : workers)
    t.join();
  auto const elapsed = Since(t0);

  RunResult result;
  for (auto& v : per_worker)
    result.samples.insert(result.samples.end(), v.begin(), v.end());
  SortSamples(result.samples);
  result.measured_window = config.duration;
  result.worker_busy =
      static_cast<double>(busy_ns.load()) /
      (static_cast<double>(elapsed) * static_cast<double>(config.workers));
  result.generator_cpu = CpuFraction(CpuTime() - cpu0, elapsed);
  result.max_backlog = max_backlog;
  return result;
}

RunResult RunClosedLoop(RunConfig const& config, WorkloadSpec const& spec) {
  config.Validate();
  auto const total = (config.warmup + config.duration).count();
  auto const warmup_end = config.warmup.count();
  std::atomic<std::uint64_t> slot{0};
  std::atomic<std::int64_t> busy_ns{0};
  std::vector<std::vector<LatencySample>> per_thread(config.threads);

  auto const cpu0 = CpuTime();
  auto const t0 = Clock::now() + 20ms;
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < config.threads; ++t) {
    threads.emplace_back([&, t] {
      KvClient client(config.cluster, config.op_timeout);
      OpStream stream(spec, config.seed + t);
      auto& out = per_thread[t];
      std::this_thread::sleep_until(t0);
      while (true) {
        if (config.rate > 0) {
          auto const at = ScheduleOffset(slot.fetch_add(1), config.rate);
          if (at >= total)
            return;
          std::this_thread::sleep_until(t0 + Nanos(at));
        }
        auto const start = Since(t0);
        if (start >= total)
          return;
        Arrival arrival;
        arrival.op = stream.Next();
        arrival.line = stream.Line(arrival.op);
        arrival.scheduled = start;
        out.push_back(Execute(client, arrival, start, t0, warmup_end));
        busy_ns.fetch_add(out.back().completion - start);
      }
    });
  }
  for (auto& t : threads)
    t.join();
  auto const elapsed = Since(t0);

  RunResult result;
  for (auto& v : per_thread)
    result.samples.insert(result.samples.end(), v.begin(), v.end());
  SortSamples(result.samples);
  result.measured_window = config.duration;
  result.worker_busy =
      static_cast<double>(busy_ns.load()) /
      (static_cast<double>(elapsed) * static_cast<double>(config.threads));
  result.generator_cpu = CpuFraction(CpuTime() - cpu0, elapsed);
  return result;
}

RunResult Run(RunConfig const& config, WorkloadSpec const& spec) {
  return config.mode == Mode::kOpen ? RunOpenLoop(config, spec)
                                    : RunClosedLoop(config, spec);
}

}  // namespace replicant::loadgen
