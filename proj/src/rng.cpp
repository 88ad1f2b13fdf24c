#include "moe2/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace moe2 {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ULL;
}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_key(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x8445D61A4E774912ULL;
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p + kGamma));
  return h;
}

double keyed_unit(std::initializer_list<std::uint64_t> parts) {
  return static_cast<double>(hash_key(parts) >> 11) * 0x1.0p-53;
}

Rng::Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

std::uint64_t Rng::next_u64() {
  state_ += kGamma;
  return mix64(state_);
}

double Rng::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_uniform(double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("next_uniform: lo > hi");
  return lo + (hi - lo) * next_unit();
}

std::uint64_t Rng::next_below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("next_below: bound == 0");
  const std::uint64_t threshold = (0ULL - bound) % bound;  // 2^64 mod bound
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

int Rng::next_int(int lo, int hi) {
  if (lo > hi) throw std::invalid_argument("next_int: lo > hi");
  const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1ULL;
  return lo + static_cast<int>(next_below(span));
}

double Rng::next_gaussian() {
  if (have_cached_) {
    have_cached_ = false;
    return cached_;
  }
  for (;;) {
    const double u = 2.0 * next_unit() - 1.0;
    const double v = 2.0 * next_unit() - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) {
      const double m = std::sqrt(-2.0 * std::log(s) / s);
      cached_ = v * m;
      have_cached_ = true;
      return u * m;
    }
  }
}

Rng Rng::substream(std::uint64_t stream_id) const {
  return Rng(hash_key({seed_, kStreamSalt, stream_id}));
}

}  // namespace moe2
