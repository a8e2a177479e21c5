#include "cpgm/rng.hpp"

#include <cmath>
#include <numbers>

#include "cpgm/errors.hpp"

namespace cpgm {
namespace {

// splitmix64: tiny, well-mixed, and stable across platforms.
std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  std::uint64_t s = x;
  return splitmix64(s);
}

std::uint64_t fnv1a(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return mix(master, stream);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
  return mix(master, fnv1a(tag));
}

RandomSource::RandomSource(std::uint64_t seed) : seed_(seed), state_(seed) {
  // Warm up so nearby seeds do not yield nearby first draws.
  splitmix64(state_);
  splitmix64(state_);
}

std::uint64_t RandomSource::next_u64() { return splitmix64(state_); }

std::uint64_t RandomSource::next_below(std::uint64_t bound) {
  if (bound == 0) throw ContractError("next_below: bound must be positive");
  // Rejection-free modulo; bias is negligible for bounds << 2^64.
  return next_u64() % bound;
}

double RandomSource::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomSource::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RandomSource::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller on (0,1] x [0,1).
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

int RandomSource::uniform_int(int lo, int hi) {
  if (hi < lo) throw ContractError("uniform_int: hi < lo");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(next_below(span));
}

RandomSource RandomSource::derive(std::uint64_t stream) const {
  return RandomSource(derive_seed(seed_, stream));
}

RandomSource RandomSource::derive(std::string_view tag) const {
  return RandomSource(derive_seed(seed_, tag));
}

}  // namespace cpgm
