#include "replicant/loadgen/workload.h"

#include <stdexcept>

namespace replicant::loadgen {

namespace {

constexpr char kBase64Url[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

std::uint64_t SplitMix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

WorkloadSpec WorkloadSpec::A(std::uint64_t records) {
  WorkloadSpec spec;
  spec.name = 'A';
  spec.read_fraction = 0.5;
  spec.record_count = records;
  return spec;
}

WorkloadSpec WorkloadSpec::B(std::uint64_t records) {
  WorkloadSpec spec = A(records);
  spec.name = 'B';
  spec.read_fraction = 0.95;
  return spec;
}

WorkloadSpec WorkloadSpec::Named(std::string_view name, std::uint64_t records) {
  if (name == "A" || name == "a")
    return A(records);
  if (name == "B" || name == "b")
    return B(records);
  throw std::invalid_argument("unknown workload '" + std::string(name) +
                              "' (expected A or B)");
}

void WorkloadSpec::Validate() const {
  if (read_fraction < 0 || read_fraction > 1)
    throw std::invalid_argument("read fraction must be in [0, 1]");
  if (key_len < 5 || value_len == 0)
    throw std::invalid_argument("key and value lengths must be positive");
  if (record_count == 0)
    throw std::invalid_argument("record count must be positive");
}

std::string RecordKey(std::uint64_t id, std::size_t key_len) {
  auto digits = std::to_string(id);
  auto const width = key_len - 4;
  if (digits.size() > width)
    throw std::invalid_argument("record id does not fit the key length");
  return "user" + std::string(width - digits.size(), '0') + digits;
}

std::string RecordValue(std::uint64_t seed, std::uint64_t id,
                        std::uint64_t version, std::size_t len) {
  std::uint64_t state = seed ^ (id * 0x9e3779b97f4a7c15ull) ^
                        (version * 0xc2b2ae3d27d4eb4full);
  std::string out;
  out.reserve(len);
  while (out.size() < len) {
    auto bits = SplitMix(state);
    for (int i = 0; i < 10 && out.size() < len; ++i, bits >>= 6)
      out += kBase64Url[bits & 63];
  }
  return out;
}

OpStream::OpStream(WorkloadSpec spec, std::uint64_t seed)
    : spec_(spec),
      seed_(seed),
      keys_(spec.record_count, spec.theta, seed),
      rng_(seed ^ 0x5bd1e995ull) {
  spec_.Validate();
}

Op OpStream::Next() {
  Op op;
  op.record = keys_.Next();
  op.kind = std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < spec_.read_fraction
                ? OpKind::kRead
                : OpKind::kUpdate;
  op.sequence = ++sequence_;
  return op;
}

std::string OpStream::Line(Op const& op) const {
  auto key = RecordKey(op.record, spec_.key_len);
  if (op.kind == OpKind::kRead)
    return "get " + key;
  return "put " + key + " " +
         RecordValue(seed_, op.record, op.sequence, spec_.value_len);
}

}  // namespace replicant::loadgen
