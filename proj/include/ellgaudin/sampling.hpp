#pragma once

#include <random>
#include <string_view>

#include "ellgaudin/core.hpp"
#include "ellgaudin/report.hpp"

namespace ellgaudin {

// mt19937_64 with a fixed bits-to-double mapping, so streams are identical
// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform01(); }
  std::uint64_t next() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

struct SamplingPolicy {
  double re_half = 0.4;
  double im_half = 0.3;
  double den_guard = 0.05;
  int max_retries = 20;
};

cplx draw_additive(Rng& rng, const SamplingPolicy& pol);

// Draws every variable in mask. z and w are drawn as exp(2 pi i s) with s
// drawn like an additive variable.
Point draw_point(Rng& rng, const SamplingPolicy& pol, std::uint16_t mask);

// Evaluates fn(point) -> Residual at `samples` accepted points and merges the
// results. A SingularityError discards the attempt and redraws, at most
// max_retries times per point.
template <class F>
Residual sample_residual(int samples, Rng& rng, const SamplingPolicy& pol, std::uint16_t mask, F&& fn) {
  Residual total;
  for (int s = 0; s < samples; ++s) {
    int tries = 0;
    for (;;) {
      Point p = draw_point(rng, pol, mask);
      try {
        total.merge(fn(p));
        break;
      } catch (const SingularityError&) {
        if (++tries >= pol.max_retries)
          throw SamplingExhaustedError("no regular sample point after repeated draws");
      }
    }
  }
  return total;
}

}  // namespace ellgaudin
