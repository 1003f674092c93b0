#pragma once

#include <vector>

namespace idsgp {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // 0.5·log(2π)

/// log Φ(x), Φ the standard normal CDF. Below x = -6 a continued-fraction
/// Mills-ratio branch keeps full relative precision where Φ underflows.
double log_ndtr(double x);

/// d/dx log Φ(x) = φ(x)/Φ(x).
double dlog_ndtr(double x);

/// Standard normal CDF.
double ndtr(double x);

/// Physicists' Gauss–Hermite rule: ∫ e^{-t²} g(t) dt ≈ Σ w_q g(t_q).
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Golub–Welsch nodes/weights for `q` points (q ≥ 1).
GaussHermite gauss_hermite(std::size_t q);

}  // namespace idsgp
