#include "replicant/loadgen/report.h"

#include <algorithm>
#include <cstdio>
#include <map>

namespace replicant::loadgen {

namespace {

bool Counted(LatencySample const& s) { return s.ok && !s.warmup; }

std::uint64_t Pick(LatencySample const& s, Latency which) {
  auto v = which == Latency::kIntended ? s.Intended() : s.Service();
  return static_cast<std::uint64_t>(std::max<std::int64_t>(0, v));
}

LatencySummary SummarizeHistogram(Histogram const& h) {
  return {h.ValueAtPercentile(0.50), h.ValueAtPercentile(0.90),
          h.ValueAtPercentile(0.95), h.ValueAtPercentile(0.99),
          h.ValueAtPercentile(0.999)};
}

}  // namespace

Histogram BuildHistogram(std::vector<LatencySample> const& samples, Latency which) {
  Histogram h;
  for (auto const& s : samples)
    if (Counted(s))
      h.Record(Pick(s, which));
  return h;
}

std::uint64_t Percentile(std::vector<LatencySample> const& samples, double p,
                         Latency which) {
  return BuildHistogram(samples, which).ValueAtPercentile(p);
}

RunSummary Summarize(RunResult const& result) {
  RunSummary out;
  for (auto const& s : result.samples) {
    if (s.warmup) {
      ++out.warmup_samples;
      continue;
    }
    out.retries += s.retries;
    if (s.ok)
      ++out.samples;
    else
      ++out.errors;
  }
  out.intended = SummarizeHistogram(BuildHistogram(result.samples, Latency::kIntended));
  out.service = SummarizeHistogram(BuildHistogram(result.samples, Latency::kService));
  auto const window = std::chrono::duration<double>(result.measured_window).count();
  out.throughput = window > 0 ? static_cast<double>(out.samples) / window : 0;
  return out;
}

std::string SummaryCsv(RunSummary const& s) {
  std::string out =
      "samples,warmup_samples,errors,retries,throughput_ops,"
      "intended_p50_ns,intended_p90_ns,intended_p95_ns,intended_p99_ns,intended_p999_ns,"
      "service_p50_ns,service_p90_ns,service_p95_ns,service_p99_ns,service_p999_ns\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", s.throughput);
  out += std::to_string(s.samples) + "," + std::to_string(s.warmup_samples) + "," +
         std::to_string(s.errors) + "," + std::to_string(s.retries) + "," + buf;
  for (auto const* l : {&s.intended, &s.service})
    for (auto v : {l->p50, l->p90, l->p95, l->p99, l->p999})
      out += "," + std::to_string(v);
  out += "\n";
  return out;
}

std::string CdfCsv(std::vector<LatencySample> const& samples, Latency which) {
  std::map<std::uint64_t, std::size_t> counts;
  std::size_t total = 0;
  for (auto const& s : samples) {
    if (!Counted(s))
      continue;
    ++counts[Pick(s, which)];
    ++total;
  }
  std::string out = "latency_ns,cumulative_fraction\n";
  std::size_t seen = 0;
  char buf[32];
  for (auto const& [latency, n] : counts) {
    seen += n;
    std::snprintf(buf, sizeof buf, "%.9g",
                  static_cast<double>(seen) / static_cast<double>(total));
    out += std::to_string(latency) + "," + buf + "\n";
  }
  return out;
}

}  // namespace replicant::loadgen
