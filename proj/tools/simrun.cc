#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "replicant/sim/sim.h"

using namespace replicant;

int main(int argc, char** argv) {
  CLI::App app{"Deterministic MultiPaxos simulation"};
  sim::SimParams params;
  double delay_min_ms = 1, delay_max_ms = 10, horizon_ms = 10000;
  std::string scenario;
  bool sweep = false;
  app.add_option("--seed", params.seed, "Random seed");
  app.add_option("--peers", params.peers, "Number of peers")->check(CLI::Range(1, 255));
  app.add_option("--drop", params.drop, "Per-message drop probability")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--delay-min", delay_min_ms, "Minimum message delay (ms)");
  app.add_option("--delay-max", delay_max_ms, "Maximum message delay (ms)");
  app.add_option("--horizon", horizon_ms, "Virtual run length (ms)");
  app.add_option("--scenario", scenario, "Scenario JSON file")->check(CLI::ExistingFile);
  app.add_flag("--sweep-schedule", sweep,
               "Use the randomized crash/partition schedule derived from the seed");
  CLI11_PARSE(app, argc, argv);

  if (sweep) {
    params = sim::SweepParams(params.seed);
  } else {
    auto ms = [](double v) {
      return std::chrono::duration_cast<Nanos>(std::chrono::duration<double, std::milli>(v));
    };
    params.delay_min = ms(delay_min_ms);
    params.delay_max = ms(delay_max_ms);
    params.horizon = ms(horizon_ms);
  }
  try {
    if (!scenario.empty()) {
      std::ifstream in(scenario);
      std::stringstream text;
      text << in.rdbuf();
      sim::ApplyScenario(text.str(), params);
    }
    auto report = sim::RunSimulation(params);
    std::cout << report.ToJson() << "\n";
    return report.Passed() ? 0 : 1;
  } catch (std::exception const& e) {
    std::cerr << "simrun: " << e.what() << "\n";
    return 2;
  }
}
