#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>

#include "ellgaudin/core.hpp"

namespace ellgaudin {

using Mat = Eigen::MatrixXcd;

// Running maximum of absolute and relative discrepancies.
// rel = |a-b| / (1 + scale), scale defaulting to max(|a|, |b|).
struct Residual {
  double max_abs = 0.0;
  double max_rel = 0.0;

  void add(double abs_err, double scale) {
    if (std::isnan(abs_err) || std::isnan(scale)) abs_err = INFINITY;
    max_abs = std::max(max_abs, abs_err);
    max_rel = std::max(max_rel, abs_err / (1.0 + scale));
  }
  void add_scalar(cplx a, cplx b) { add(std::abs(a - b), std::max(std::abs(a), std::abs(b))); }
  void add_scalar(cplx a, cplx b, double scale) { add(std::abs(a - b), scale); }
  void add_matrix(const Mat& a, const Mat& b) {
    const double diff = (a - b).cwiseAbs().maxCoeff();
    const double scale = std::max(a.size() ? a.cwiseAbs().maxCoeff() : 0.0,
                                  b.size() ? b.cwiseAbs().maxCoeff() : 0.0);
    add(diff, scale);
  }
  // A quantity that should vanish, measured against the size of what produced it.
  void add_zero(const Mat& x, double scale) { add(x.size() ? x.cwiseAbs().maxCoeff() : 0.0, scale); }
  void merge(const Residual& o) {
    max_abs = std::max(max_abs, o.max_abs);
    max_rel = std::max(max_rel, o.max_rel);
  }
};

struct ResidualReport {
  std::string identity_id;
  std::string paper_anchor;
  int samples_used = 0;
  double max_abs = 0.0;
  double max_rel = 0.0;
  double tol = 0.0;
  bool pass = false;
  double wall_time_ms = 0.0;
  std::uint64_t seed = 0;
  std::string status = "ok";  // "ok" or "error"
  std::string message;

  void set(const Residual& r) {
    max_abs = r.max_abs;
    max_rel = r.max_rel;
  }
  void finalize(double tolerance) {
    tol = tolerance;
    pass = status == "ok" && max_rel < tol;
  }
};

}  // namespace ellgaudin
