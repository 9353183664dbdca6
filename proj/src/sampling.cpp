#include "ellgaudin/sampling.hpp"

#include <cmath>

namespace ellgaudin {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

cplx draw_additive(Rng& rng, const SamplingPolicy& pol) {
  const double re = rng.uniform(-pol.re_half, pol.re_half);
  const double im = rng.uniform(-pol.im_half, pol.im_half);
  return {re, im};
}

Point draw_point(Rng& rng, const SamplingPolicy& pol, std::uint16_t mask) {
  Point p;
  for (int i = 0; i < kVarCount; ++i) {
    if (!(mask & (1u << i))) continue;
    const cplx s = draw_additive(rng, pol);
    p.x[i] = is_multiplicative(i) ? std::exp(2.0 * kI * kPi * s) : s;
  }
  return p;
}

}  // namespace ellgaudin
