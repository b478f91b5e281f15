#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "topodepth/textio.hpp"

namespace topodepth {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

// Seeded generator with a fixed sampling recipe. std distributions are
// implementation-defined, so uniform/normal mapping is done here and the
// stream of values is pinned by this code alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Box-Muller with the spare value cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // [0, n)
  int bounded(int n) {
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

  std::vector<double> normal_vec(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = normal();
    return v;
  }

  // Fisher-Yates; std::shuffle is not pinned across library versions.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// All randomness in the pipeline fans out from one root seed into named
// streams (trajectory noise, hole punching, eps draws, weight init, split
// shuffle, ...). Re-seeding one purpose never disturbs another, and per-step
// streams make training resumable without serializing generator state.
inline Rng named_rng(std::uint64_t root_seed, std::string_view purpose,
                     std::uint64_t index = 0) {
  std::uint64_t s = detail::splitmix64(root_seed ^ fnv1a64(purpose));
  s = detail::splitmix64(s ^ (0x9e3779b97f4a7c15ULL + index));
  return Rng(s);
}

}  // namespace topodepth
