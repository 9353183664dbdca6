#include "ellgaudin/theta.hpp"

#include <cmath>
#include <string>

#include "ellgaudin/report.hpp"
#include "ellgaudin/sampling.hpp"

namespace ellgaudin {

namespace {

// theta_1(z, q) derivatives up to max_order at z = pi*x by term-wise differentiation.
// out[k] = d^k/dz^k theta_1(z).
void theta1_series(cplx z, int max_order, const EllipticParams& p, cplx* out) {
  for (int k = 0; k <= max_order; ++k) out[k] = 0.0;
  const double im_tau = p.tau.imag();
  const double abs_im_z = std::abs(z.imag());
  double first_bound = 0.0;
  double last = 0.0;
  for (int k = 0; k < p.max_terms; ++k) {
    const double kh = k + 0.5;
    const cplx qk = std::exp(kI * kPi * p.tau * (kh * kh));
    const double m = 2.0 * k + 1.0;
    const cplx arg = m * z;
    const cplx s = std::sin(arg);
    const cplx c = std::cos(arg);
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    double mpow = 1.0;
    for (int d = 0; d <= max_order; ++d) {
      cplx trig;
      switch (d % 4) {
        case 0: trig = s; break;
        case 1: trig = c; break;
        case 2: trig = -s; break;
        default: trig = -c; break;
      }
      out[d] += 2.0 * sign * qk * mpow * trig;
      mpow *= m;
    }
    // Upper bound of this term's magnitude over all requested orders.
    const double bound = 2.0 * std::exp(-kPi * im_tau * kh * kh + m * abs_im_z) *
                         std::pow(m, static_cast<double>(max_order));
    if (k == 0) first_bound = bound;
    last = bound;
    double scale = first_bound;
    for (int d = 0; d <= max_order; ++d) scale = std::max(scale, std::abs(out[d]));
    if (k >= 1 && bound < p.series_tol * scale) return;
  }
  throw AccuracyError("theta series did not converge within max_terms", last);
}

}  // namespace

EllipticParams EllipticParams::make(cplx tau, double series_tol, int max_terms) {
  if (!(tau.imag() > 0.0)) throw ConstructionError("Im tau must be positive");
  EllipticParams p;
  p.tau = tau;
  p.series_tol = series_tol;
  p.max_terms = max_terms;
  if (!(series_tol > 0.0) || max_terms < 1)
    throw ConstructionError("series_tol must be positive and max_terms at least 1");
  p.nome = std::exp(kI * kPi * tau);
  if (std::abs(p.nome) >= 0.995) throw ConstructionError("|exp(i pi tau)| >= 0.995: series diverges");
  cplx d[2];
  theta1_series(0.0, 1, p, d);
  p.normalization = kPi * d[1];
  return p;
}

void theta_derivatives(cplx u, int max_order, const EllipticParams& p, cplx* out) {
  // Reduce u = r + m + k tau with |Re r| <= 1/2, |Im r| <= Im tau / 2.
  const double kf = std::round(u.imag() / p.tau.imag());
  cplx x = u - kf * p.tau;
  const double mf = std::round(x.real());
  const cplx r = x - mf;
  std::vector<cplx> base(static_cast<std::size_t>(max_order) + 1);
  theta1_series(kPi * r, max_order, p, base.data());
  double pipow = 1.0;
  for (int j = 0; j <= max_order; ++j) {
    base[j] *= pipow / p.normalization;
    pipow *= kPi;
  }
  if (kf == 0.0) {
    const double sign = std::fmod(std::abs(mf), 2.0) == 1.0 ? -1.0 : 1.0;
    for (int j = 0; j <= max_order; ++j) out[j] = sign * base[j];
    return;
  }
  // theta(r + m + k tau + t) = (-1)^{k+m} exp(-pi i k^2 tau - 2 pi i k (r+t)) theta(r+t)
  const cplx log_pref = kI * kPi * (kf + mf) - kI * kPi * kf * kf * p.tau - 2.0 * kI * kPi * kf * r;
  const cplx pref = std::exp(log_pref);
  const cplx rate = -2.0 * kI * kPi * kf;
  for (int mo = 0; mo <= max_order; ++mo) {
    cplx acc = 0.0;
    double binom = 1.0;
    for (int j = 0; j <= mo; ++j) {
      acc += binom * std::pow(rate, mo - j) * base[j];
      binom = binom * (mo - j) / (j + 1);
    }
    out[mo] = pref * acc;
  }
}

cplx theta_deriv(int order, cplx u, const EllipticParams& p) {
  if (order < 0 || order > 4) throw UsageError("theta_deriv supports orders 0..4");
  cplx out[5];
  theta_derivatives(u, order, p, out);
  return out[order];
}

cplx theta(cplx u, const EllipticParams& p) {
  cplx out[1];
  theta_derivatives(u, 0, p, out);
  return out[0];
}

ResidualReport theta_quasi_periodicity_residual(int samples, const EllipticParams& p,
                                                std::uint64_t rng_seed) {
  if (samples < 1) throw UsageError("samples must be at least 1");
  ResidualReport rep;
  rep.identity_id = "theta_qp_tau";
  rep.paper_anchor = "theta quasi-periodicity in tau";
  rep.seed = rng_seed;
  Rng rng(rng_seed);
  Residual res;
  for (int s = 0; s < samples; ++s) {
    // |Im u| <= Im tau, |Re u| <= 1/2
    const cplx u{rng.uniform(-0.5, 0.5), rng.uniform(-p.tau.imag(), p.tau.imag())};
    const cplx t = theta(u, p);
    const cplx lhs = theta(u + p.tau, p);
    const cplx rhs = -std::exp(-2.0 * kI * kPi * u - kI * kPi * p.tau) * t;
    res.add_scalar(lhs, rhs, std::abs(t));
  }
  rep.samples_used = samples;
  rep.max_abs = res.max_abs;
  rep.max_rel = res.max_rel;
  return rep;
}

std::vector<ResidualReport> theta_axiom_residuals(int samples, const EllipticParams& p, std::uint64_t rng_seed) {
  if (samples < 1) throw UsageError("samples must be at least 1");
  std::vector<ResidualReport> out;
  auto push = [&](const char* id, const char* anchor, const Residual& r) {
    ResidualReport rep;
    rep.identity_id = id;
    rep.paper_anchor = anchor;
    rep.seed = rng_seed;
    rep.samples_used = samples;
    rep.set(r);
    out.push_back(rep);
  };
  Rng rng(rng_seed);
  Residual odd, qp1;
  for (int s = 0; s < samples; ++s) {
    const cplx u{rng.uniform(-0.5, 0.5), rng.uniform(-p.tau.imag(), p.tau.imag())};
    const cplx t = theta(u, p);
    odd.add_scalar(theta(-u, p), -t, std::abs(t));
    qp1.add_scalar(theta(u + 1.0, p), -t, std::abs(t));
  }
  push("theta_odd", "theta oddness", odd);
  push("theta_qp_1", "theta quasi-periodicity in 1", qp1);
  ResidualReport tau = theta_quasi_periodicity_residual(samples, p, derive_seed(rng_seed, "qp_tau"));
  tau.seed = rng_seed;
  out.push_back(tau);
  Residual norm;
  norm.add_scalar(theta_deriv(1, 0.0, p), 1.0);
  norm.add(std::abs(theta(0.0, p)), 0.0);
  push("theta_norm", "theta'(0) = 1", norm);
  out.back().samples_used = 1;
  return out;
}

}  // namespace ellgaudin
