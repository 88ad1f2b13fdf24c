#pragma once

#include <cstdint>
#include <initializer_list>

namespace moe2 {

// SplitMix64: a 64-bit counter generator (state advances by a fixed odd
// constant, output is a bijective finalizer of the counter). The integer
// stream is pure integer arithmetic and therefore identical on every
// platform. Substreams are keyed off the root seed, not the current state,
// so handing substream i to a parallel task is order-independent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // uniform in [0, 1), 53-bit resolution
  double next_unit();
  // uniform in [lo, hi)
  double next_uniform(double lo, double hi);
  // unbiased uniform in [0, bound) via rejection of the short tail
  std::uint64_t next_below(std::uint64_t bound);
  // uniform integer in [lo, hi] inclusive
  int next_int(int lo, int hi);
  // standard normal, Marsaglia polar method (second deviate cached)
  double next_gaussian();

  Rng substream(std::uint64_t stream_id) const;
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

// SplitMix64 finalizer, usable as a standalone 64-bit mixer.
std::uint64_t mix64(std::uint64_t x);

// Order-sensitive combination of integer keys into one 64-bit hash.
std::uint64_t hash_key(std::initializer_list<std::uint64_t> parts);

// Stateless keyed uniform in [0, 1); the fixed map behind every
// "deterministic given (ids...)" synthetic quantity.
double keyed_unit(std::initializer_list<std::uint64_t> parts);

}  // namespace moe2
