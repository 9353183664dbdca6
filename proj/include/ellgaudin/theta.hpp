#pragma once

#include <vector>

#include "ellgaudin/core.hpp"

namespace ellgaudin {

struct ResidualReport;

// Modulus of the elliptic curve plus the series policy. Build with make().
struct EllipticParams {
  cplx tau{0.0, 1.1};
  double series_tol = 1e-16;
  int max_terms = 200;

  cplx nome;            // exp(i pi tau)
  cplx normalization;   // pi * d/dz theta_1(0, nome)

  static EllipticParams make(cplx tau, double series_tol = 1e-16, int max_terms = 200);
};

// Odd theta function normalized by theta'(0) = 1.
cplx theta(cplx u, const EllipticParams& p);

// order <= 4.
cplx theta_deriv(int order, cplx u, const EllipticParams& p);

// out[k] = k-th derivative at u for k = 0..max_order. No order cap; used by the
// Taylor evaluator, which needs a few orders past the public limit.
void theta_derivatives(cplx u, int max_order, const EllipticParams& p, cplx* out);

// max over sampled u of |theta(u+tau) + exp(-2 pi i u - pi i tau) theta(u)| / (1+|theta(u)|)
ResidualReport theta_quasi_periodicity_residual(int samples, const EllipticParams& p,
                                                std::uint64_t rng_seed);

// theta_odd, theta_qp_1, theta_qp_tau and theta_norm over the same sampling box.
std::vector<ResidualReport> theta_axiom_residuals(int samples, const EllipticParams& p, std::uint64_t rng_seed);

}  // namespace ellgaudin
