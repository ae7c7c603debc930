#include "replicant/loadgen/histogram.h"

#include <algorithm>
#include <bit>
#include <cmath>

namespace replicant::loadgen {

namespace {

constexpr std::uint64_t kSubBuckets = std::uint64_t{1} << Histogram::kSubBucketBits;

}  // namespace

std::size_t Histogram::BucketIndex(std::uint64_t value) {
  if (value < 2 * kSubBuckets)
    return static_cast<std::size_t>(value);
  int const exponent = std::bit_width(value) - 1;  // >= kSubBucketBits + 1
  int const shift = exponent - kSubBucketBits;
  auto const sub = (value >> shift) - kSubBuckets;  // [0, kSubBuckets)
  return static_cast<std::size_t>(2 * kSubBuckets +
                                  (shift - 1) * kSubBuckets + sub);
}

std::uint64_t Histogram::BucketLowerBound(std::size_t index) {
  if (index < 2 * kSubBuckets)
    return index;
  auto const rest = index - 2 * kSubBuckets;
  auto const shift = rest / kSubBuckets + 1;
  auto const sub = rest % kSubBuckets;
  return (kSubBuckets + sub) << shift;
}

void Histogram::Record(std::uint64_t value) {
  auto const index = BucketIndex(value);
  if (index >= counts_.size()) {
    counts_.resize(index + 1, 0);
    sums_.resize(index + 1, 0);
  }
  ++counts_[index];
  sums_[index] += value;
  ++count_;
  min_ = std::min(min_, value);
  max_ = std::max(max_, value);
}

void Histogram::Merge(Histogram const& other) {
  if (other.counts_.size() > counts_.size()) {
    counts_.resize(other.counts_.size(), 0);
    sums_.resize(other.sums_.size(), 0);
  }
  for (std::size_t i = 0; i < other.counts_.size(); ++i) {
    counts_[i] += other.counts_[i];
    sums_[i] += other.sums_[i];
  }
  count_ += other.count_;
  min_ = std::min(min_, other.min_);
  max_ = std::max(max_, other.max_);
}

std::uint64_t Histogram::Min() const {
  if (count_ == 0)
    throw EmptySample();
  return min_;
}

std::uint64_t Histogram::Max() const {
  if (count_ == 0)
    throw EmptySample();
  return max_;
}

std::uint64_t Histogram::ValueAtPercentile(double p) const {
  if (count_ == 0)
    throw EmptySample();
  p = std::clamp(p, 0.0, 1.0);
  auto rank = static_cast<std::uint64_t>(std::ceil(p * static_cast<double>(count_) - 1e-9));
  rank = std::clamp<std::uint64_t>(rank, 1, count_);
  std::uint64_t seen = 0;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    seen += counts_[i];
    if (seen >= rank) {
      auto const mean = static_cast<std::uint64_t>(sums_[i] / counts_[i]);
      return std::clamp(mean, min_, max_);
    }
  }
  return max_;
}

}  // namespace replicant::loadgen
