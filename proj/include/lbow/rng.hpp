#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace lbow {

// Deterministic random stream. All draws are derived from the raw
// mt19937_64 output instead of std::*_distribution, whose results are
// implementation-defined; with a fixed seed the stream is identical
// across compilers and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : gen_(seed) {}

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform01() { return (gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer on [0, n). Rejection sampling, no modulo bias.
  int uniform_int(int n);

  // Gumbel(0,1) draw: -log(-log(u)), u clamped away from 0 by 1e-20.
  // The upper side needs no clamp: uniform01() never returns 1.
  double gumbel();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[i], v[static_cast<size_t>(j)]);
    }
  }

  uint64_t raw() { return gen_(); }

  std::string state() const;
  void set_state(const std::string& s);

 private:
  std::mt19937_64 gen_;
};

}  // namespace lbow
