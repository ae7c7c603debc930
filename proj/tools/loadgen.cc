#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "replicant/loadgen/driver.h"
#include "replicant/loadgen/report.h"
#include "replicant/loadgen/search.h"

using namespace replicant;
using namespace replicant::loadgen;

namespace {

Nanos Seconds(double s) {
  return std::chrono::duration_cast<Nanos>(std::chrono::duration<double>(s));
}

void Emit(std::string const& path, std::string const& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Workload generator and latency reporter"};
  app.require_subcommand(1);

  std::string cluster, workload = "A", mode = "open", out, cdf_out;
  std::uint64_t records = 1000, rate = 1000, seed = 1;
  std::size_t threads = 64, workers = 64;
  double duration = 60, warmup = 20, target_p99_ms = 20;
  double theta = 0.99;
  bool poisson = false;
  std::uint64_t min_rate = 100, max_rate = 100000, resolution = 100;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--cluster", cluster, "Comma-separated client addresses")->required();
    cmd->add_option("--workload", workload, "A or B")->check(CLI::IsMember({"A", "B"}));
    cmd->add_option("--records", records, "Record count");
    cmd->add_option("--seed", seed, "Seed for keys, values and op mix");
    cmd->add_option("--theta", theta, "Zipfian skew");
  };
  auto add_run = [&](CLI::App* cmd) {
    cmd->add_option("--mode", mode, "open or closed")->check(CLI::IsMember({"open", "closed"}));
    cmd->add_option("--rate", rate, "Open loop arrival rate, or closed loop throttle (0 = none)");
    cmd->add_option("--threads", threads, "Closed loop thread count");
    cmd->add_option("--workers", workers, "Open loop dispatch pool size");
    cmd->add_option("--duration", duration, "Measured seconds");
    cmd->add_option("--warmup", warmup, "Warmup seconds");
    cmd->add_flag("--poisson", poisson, "Poisson arrivals instead of constant spacing");
    cmd->add_option("--out", out, "Output CSV path (default stdout)");
  };

  auto* load = app.add_subcommand("load", "Insert every record");
  add_common(load);
  auto* run = app.add_subcommand("run", "Run one measured phase");
  add_common(run);
  add_run(run);
  run->add_option("--cdf", cdf_out, "Also write the intended-latency CDF CSV here");
  auto* search = app.add_subcommand("search", "Find the highest rate meeting a p99 target");
  add_common(search);
  add_run(search);
  search->add_option("--target-p99", target_p99_ms, "Target p99 in ms");
  search->add_option("--min-rate", min_rate, "Lowest probe rate");
  search->add_option("--max-rate", max_rate, "Highest probe rate");
  search->add_option("--resolution", resolution, "Rate resolution (ops/s)");
  CLI11_PARSE(app, argc, argv);

  std::signal(SIGPIPE, SIG_IGN);
  try {
    auto spec = WorkloadSpec::Named(workload, records);
    spec.theta = theta;
    spec.Validate();
    RunConfig config;
    config.cluster = CLI::detail::split(cluster, ',');
    config.seed = seed;
    config.mode = mode == "open" ? Mode::kOpen : Mode::kClosed;
    config.rate = rate;
    config.threads = threads;
    config.workers = workers;
    config.duration = Seconds(duration);
    config.warmup = Seconds(warmup);
    config.poisson = poisson;

    if (*load) {
      LoadPhase(config, spec);
      std::cerr << "loaded " << records << " records\n";
      return 0;
    }
    if (*run) {
      auto result = Run(config, spec);
      try {
        Emit(out, SummaryCsv(Summarize(result)));
      } catch (EmptySample const&) {
        std::cerr << "warning: no successful samples after warmup\n";
        Emit(out, SummaryCsv(RunSummary{}));
      }
      if (!cdf_out.empty())
        Emit(cdf_out, CdfCsv(result.samples, Latency::kIntended));
      return 0;
    }
    SearchConfig sc;
    sc.min_rate = min_rate;
    sc.max_rate = max_rate;
    sc.resolution = resolution;
    sc.target_p99 = std::chrono::duration_cast<Nanos>(
        std::chrono::duration<double, std::milli>(target_p99_ms));
    auto found = FindMaxThroughput(sc, config, spec);
    std::string csv = "rate_ops,intended_p99_ns\n";
    for (auto const& [r, p99] : found.probes)
      csv += std::to_string(r) + "," + std::to_string(p99) + "\n";
    Emit(out, csv);
    std::cerr << "max rate meeting target: " << found.rate << " ops/s\n";
    return 0;
  } catch (ZeroCapacity const& e) {
    std::cerr << "loadgen: " << e.what() << "\n";
    return 3;
  } catch (std::exception const& e) {
    std::cerr << "loadgen: " << e.what() << "\n";
    return 1;
  }
}
