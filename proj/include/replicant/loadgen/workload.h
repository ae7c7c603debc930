#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "replicant/loadgen/zipfian.h"

namespace replicant::loadgen {

struct WorkloadSpec {
  char name = 'A';
  double read_fraction = 0.5;
  std::uint64_t record_count = 1000;
  std::size_t key_len = 23;
  std::size_t value_len = 500;
  double theta = 0.99;

  static WorkloadSpec A(std::uint64_t records);  // 50% reads
  static WorkloadSpec B(std::uint64_t records);  // 95% reads
  // "A" or "B"; throws std::invalid_argument.
  static WorkloadSpec Named(std::string_view name, std::uint64_t records);

  void Validate() const;
};

// "user" followed by the zero-padded id, key_len characters in total.
std::string RecordKey(std::uint64_t id, std::size_t key_len = 23);

// Deterministic base64url token of `len` characters derived from
// (seed, id, version); never contains whitespace.
std::string RecordValue(std::uint64_t seed, std::uint64_t id,
                        std::uint64_t version, std::size_t len = 500);

enum class OpKind : std::uint8_t { kRead, kUpdate };

struct Op {
  OpKind kind = OpKind::kRead;
  std::uint64_t record = 0;
  std::uint64_t sequence = 0;
};

// Deterministic stream of operations for one generator.
class OpStream {
 public:
  OpStream(WorkloadSpec spec, std::uint64_t seed);

  Op Next();

  // Client protocol line (without '\n') for `op`.
  std::string Line(Op const& op) const;

  WorkloadSpec const& Spec() const { return spec_; }

 private:
  WorkloadSpec spec_;
  std::uint64_t seed_;
  ScrambledZipfian keys_;
  std::mt19937_64 rng_;
  std::uint64_t sequence_ = 0;
};

}  // namespace replicant::loadgen
