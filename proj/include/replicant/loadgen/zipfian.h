#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace replicant::loadgen {

// Exact Zipf sampler over ranks 1..n with P(r) proportional to r^-theta,
// using Hormann's rejection-inversion method (constant expected time, no
// O(n) table). theta == 0 degenerates to uniform.
class ZipfianGenerator {
 public:
  ZipfianGenerator(std::uint64_t n, double theta);

  std::uint64_t NextRank(std::mt19937_64& rng) const;

  std::uint64_t n() const { return n_; }
  double theta() const { return theta_; }

 private:
  double H(double x) const;
  double HInverse(double x) const;

  std::uint64_t n_;
  double theta_;
  double h_integral_x1_;
  double h_integral_n_;
  double s_;
};

// Analytic probability of rank r (1-based) among n.
double ZipfPmf(std::uint64_t n, double theta, std::uint64_t rank);

// Zipf ranks mapped onto record ids [0, n) through a fixed permutation
// (ids ordered by FNV-1a hash), so popular records are scattered across the
// key space while rank frequencies are preserved exactly.
class ScrambledZipfian {
 public:
  ScrambledZipfian(std::uint64_t n, double theta, std::uint64_t seed);

  std::uint64_t Next();
  std::uint64_t IdForRank(std::uint64_t rank) const { return order_[rank - 1]; }

 private:
  ZipfianGenerator zipf_;
  std::mt19937_64 rng_;
  std::vector<std::uint64_t> order_;
};

std::uint64_t Fnv1a64(std::uint64_t value);

}  // namespace replicant::loadgen
