#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ivra {

// Deterministic random source. mt19937_64 has a standard-mandated output
// sequence and the float mappings below avoid std::*_distribution, whose
// algorithms are implementation-defined, so streams replay bit-identically
// on any platform.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 24 bits of mantissa.
  float uniform() {
    return static_cast<float>(gen_() >> 40) * (1.0f / 16777216.0f);
  }

  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; pairs are drawn eagerly so the stream
  // position depends only on the number of calls.
  float gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    float u1 = uniform();
    while (u1 <= 0.0f) u1 = uniform();
    const float u2 = uniform();
    const float r = std::sqrt(-2.0f * std::log(u1));
    const float theta = 6.28318530717958647692f * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }

 private:
  std::mt19937_64 gen_;
  float spare_ = 0.0f;
  bool have_spare_ = false;
};

}  // namespace ivra
