#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace replicant::loadgen {

class EmptySample : public std::runtime_error {
 public:
  EmptySample() : std::runtime_error("no samples to summarize") {}
};

// Log-linear histogram of non-negative integer values (nanoseconds). Values
// below 2^8 are exact; above, each power of two is split into 128 buckets,
// so any bucket spans less than 1% of its lower bound. Each bucket also
// keeps the sum of its values; a percentile reports the mean of its bucket,
// clamped to the observed min/max.
class Histogram {
 public:
  static constexpr int kSubBucketBits = 7;

  void Record(std::uint64_t value);
  void Merge(Histogram const& other);

  std::uint64_t Count() const { return count_; }
  std::uint64_t Min() const;
  std::uint64_t Max() const;

  // Nearest rank: the value at rank ceil(p * count), p in (0, 1].
  // Throws EmptySample.
  std::uint64_t ValueAtPercentile(double p) const;

  static std::size_t BucketIndex(std::uint64_t value);
  static std::uint64_t BucketLowerBound(std::size_t index);

 private:
  std::vector<std::uint64_t> counts_;
  std::vector<unsigned __int128> sums_;
  std::uint64_t count_ = 0;
  std::uint64_t min_ = UINT64_MAX;
  std::uint64_t max_ = 0;
};

}  // namespace replicant::loadgen
