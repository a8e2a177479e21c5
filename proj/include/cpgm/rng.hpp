#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace cpgm {

// Deterministic stream derivation: every random draw in a run flows from a
// single master seed through named sub-streams, so reruns are bit-identical.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

// Seeded random source. Normal variates use an explicit Box-Muller transform
// rather than std::normal_distribution so the draw sequence depends only on
// the engine, not on the standard library implementation.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();
  std::uint64_t next_below(std::uint64_t bound);  // uniform in [0, bound)
  double uniform();                               // [0, 1)
  double uniform(double lo, double hi);
  double normal();  // standard normal
  int uniform_int(int lo, int hi);  // inclusive bounds

  RandomSource derive(std::uint64_t stream) const;
  RandomSource derive(std::string_view tag) const;

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cpgm
