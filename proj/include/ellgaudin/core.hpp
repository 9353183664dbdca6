#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <string>

namespace ellgaudin {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

enum class ErrorCode : int {
  usage = 1,
  construction = 2,
  accuracy = 3,
  singular = 4,
  capability = 5,
  sampling_exhausted = 6,
  internal = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& w) : Error(ErrorCode::usage, w) {}
};
struct ConstructionError : Error {
  explicit ConstructionError(const std::string& w) : Error(ErrorCode::construction, w) {}
};
struct AccuracyError : Error {
  AccuracyError(const std::string& w, double last_term)
      : Error(ErrorCode::accuracy, w), last_term_magnitude(last_term) {}
  double last_term_magnitude;
};
// Thrown when a sample point lands too close to a pole; callers resample.
struct SingularityError : Error {
  explicit SingularityError(const std::string& w) : Error(ErrorCode::singular, w) {}
};
struct CapabilityError : Error {
  explicit CapabilityError(const std::string& w) : Error(ErrorCode::capability, w) {}
};
struct SamplingExhaustedError : Error {
  explicit SamplingExhaustedError(const std::string& w) : Error(ErrorCode::sampling_exhausted, w) {}
};

// Variables of the coefficient layer. u, v and the dynamical variables are
// additive (step hbar); z, w are multiplicative (step q^2 = exp(2 pi i hbar)).
enum class Var : std::uint8_t { u = 0, v = 1, z = 2, w = 3, l1 = 4, l2 = 5, l3 = 6, l4 = 7 };

inline constexpr int kVarCount = 8;
inline constexpr int kMaxRank = 4;

inline constexpr int idx(Var x) { return static_cast<int>(x); }
inline constexpr Var lam(int k) { return static_cast<Var>(4 + k); }  // k is 0-based
inline constexpr bool is_multiplicative(Var x) { return x == Var::z || x == Var::w; }
inline constexpr bool is_multiplicative(int i) { return i == 2 || i == 3; }
inline constexpr std::uint16_t bit(Var x) { return static_cast<std::uint16_t>(1u << idx(x)); }
inline constexpr std::uint16_t lambda_mask(int n) {
  return static_cast<std::uint16_t>(((1u << n) - 1u) << 4);
}

std::string var_name(Var x);

struct Point {
  std::array<cplx, kVarCount> x{};

  cplx& operator[](Var v) { return x[idx(v)]; }
  const cplx& operator[](Var v) const { return x[idx(v)]; }
  cplx& lambda(int k) { return x[4 + k]; }
  const cplx& lambda(int k) const { return x[4 + k]; }

  bool operator==(const Point& o) const { return std::memcmp(x.data(), o.x.data(), sizeof(x)) == 0; }
  // Copy keeping only the variables in mask (others zeroed); used for cache keys.
  Point masked(std::uint16_t mask) const {
    Point p;
    for (int i = 0; i < kVarCount; ++i)
      if (mask & (1u << i)) p.x[i] = x[i];
    return p;
  }
};

struct PointHash {
  std::size_t operator()(const Point& p) const {
    std::uint64_t h = 1469598103934665603ull;
    const auto* b = reinterpret_cast<const unsigned char*>(p.x.data());
    for (std::size_t i = 0; i < sizeof(p.x); ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace ellgaudin
