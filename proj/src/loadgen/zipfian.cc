#include "replicant/loadgen/zipfian.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace replicant::loadgen {

namespace {

// log(1 + x) / x, continuous at 0.
double Helper1(double x) {
  return std::abs(x) > 1e-8 ? std::log1p(x) / x : 1 - x * (0.5 - x * (1.0 / 3 - 0.25 * x));
}

// (exp(x) - 1) / x, continuous at 0.
double Helper2(double x) {
  return std::abs(x) > 1e-8 ? std::expm1(x) / x
                            : 1 + x * 0.5 * (1 + x * (1.0 / 3) * (1 + 0.25 * x));
}

}  // namespace

ZipfianGenerator::ZipfianGenerator(std::uint64_t n, double theta)
    : n_(n), theta_(theta) {
  if (n == 0)
    throw std::invalid_argument("zipfian needs at least one item");
  if (theta < 0)
    throw std::invalid_argument("zipfian theta must be non-negative");
  h_integral_x1_ = H(1.5) - 1.0;
  h_integral_n_ = H(static_cast<double>(n) + 0.5);
  s_ = 2.0 - HInverse(H(2.5) - std::pow(2.0, -theta_));
}

// Antiderivative of x^-theta with H(1) == 0.
double ZipfianGenerator::H(double x) const {
  double const log_x = std::log(x);
  return Helper2((1.0 - theta_) * log_x) * log_x;
}

double ZipfianGenerator::HInverse(double x) const {
  double t = x * (1.0 - theta_);
  if (t < -1.0)
    t = -1.0;
  return std::exp(Helper1(t) * x);
}

std::uint64_t ZipfianGenerator::NextRank(std::mt19937_64& rng) const {
  if (theta_ == 0.0)
    return std::uniform_int_distribution<std::uint64_t>(1, n_)(rng);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  while (true) {
    double const u = h_integral_n_ + uniform(rng) * (h_integral_x1_ - h_integral_n_);
    double const x = HInverse(u);
    auto k = static_cast<std::uint64_t>(x + 0.5);
    k = std::clamp<std::uint64_t>(k, 1, n_);
    double const kd = static_cast<double>(k);
    if (kd - x <= s_ || u >= H(kd + 0.5) - std::pow(kd, -theta_))
      return k;
  }
}

double ZipfPmf(std::uint64_t n, double theta, std::uint64_t rank) {
  double norm = 0;
  for (std::uint64_t r = 1; r <= n; ++r)
    norm += std::pow(static_cast<double>(r), -theta);
  return std::pow(static_cast<double>(rank), -theta) / norm;
}

std::uint64_t Fnv1a64(std::uint64_t value) {
  std::uint64_t hash = 1469598103934665603ull;
  for (int i = 0; i < 8; ++i) {
    hash ^= (value >> (8 * i)) & 0xff;
    hash *= 1099511628211ull;
  }
  return hash;
}

ScrambledZipfian::ScrambledZipfian(std::uint64_t n, double theta,
                                   std::uint64_t seed)
    : zipf_(n, theta), rng_(seed), order_(n) {
  std::iota(order_.begin(), order_.end(), std::uint64_t{0});
  std::sort(order_.begin(), order_.end(), [](std::uint64_t a, std::uint64_t b) {
    auto ha = Fnv1a64(a), hb = Fnv1a64(b);
    return ha != hb ? ha < hb : a < b;
  });
}

std::uint64_t ScrambledZipfian::Next() {
  return order_[zipf_.NextRank(rng_) - 1];
}

}  // namespace replicant::loadgen
