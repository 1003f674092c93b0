#include "idsgp/linalg.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>

#include "idsgp/errors.hpp"

namespace idsgp {

namespace {

bool try_factor(ConstMatrixMap a, double jitter, MatrixMap out) {
  const Eigen::Index n = a.rows();
  out = a;
  out.diagonal().array() += jitter;
  // In-place LLT on the lower triangle; reject non-positive or non-finite pivots.
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = out(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= out(j, k) * out(j, k);
    if (!(pivot > 0.0) || !std::isfinite(pivot)) return false;
    const double ljj = std::sqrt(pivot);
    out(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = out(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= out(i, k) * out(j, k);
      out(i, j) = s / ljj;
    }
  }
  out.triangularView<Eigen::StrictlyUpper>().setZero();
  return true;
}

}  // namespace

double cholesky_jitter_inplace(ConstMatrixMap a, MatrixMap out, const JitterPolicy& policy) {
  if (try_factor(a, 0.0, out)) return 0.0;
  // Jitter is relative to mean(diag); fall back to max|diag| (or 1) when that
  // mean is not positive so the schedule always makes progress.
  double scale = a.rows() > 0 ? a.diagonal().mean() : 1.0;
  if (!(scale > 0.0)) scale = a.rows() > 0 ? a.diagonal().cwiseAbs().maxCoeff() : 1.0;
  if (!(scale > 0.0)) scale = 1.0;
  const double cap = policy.cap * scale;
  double jitter = policy.base * scale;
  double last = 0.0;
  while (jitter <= cap) {
    if (try_factor(a, jitter, out)) return jitter;
    last = jitter;
    jitter *= policy.growth;
  }
  std::ostringstream os;
  os << "cholesky: matrix not positive definite after jitter escalation (last jitter "
     << last << ", cap " << cap << ")";
  throw NotPositiveDefiniteError(os.str(), last);
}

CholFactor chol_jitter(const Tensor& a, const JitterPolicy& policy) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) {
    throw ShapeError("chol_jitter: expected a square matrix, got " + to_string(a.shape()));
  }
  auto am = a.as_matrix();
  const double asym = (am - am.transpose()).cwiseAbs().maxCoeff();
  if (a.numel() > 0 && asym > 1e-8) {
    std::ostringstream os;
    os << "chol_jitter: matrix is not symmetric (max |A - Aᵀ| = " << asym << ")";
    throw ShapeError(os.str());
  }
  CholFactor f{Tensor(a.shape()), 0.0};
  f.jitter_used = cholesky_jitter_inplace(am, f.lower.as_matrix(), policy);
  return f;
}

Tensor solve_lower(const Tensor& lower, const Tensor& rhs) {
  if (lower.rank() != 2 || lower.dim(0) != lower.dim(1) ||
      rhs.as_matrix().rows() != lower.as_matrix().rows()) {
    throw ShapeError("solve_lower: shapes " + to_string(lower.shape()) + " and " +
                     to_string(rhs.shape()));
  }
  Tensor out = rhs;
  lower.as_matrix().triangularView<Eigen::Lower>().solveInPlace(out.as_matrix());
  return out;
}

Tensor solve_lower_transposed(const Tensor& lower, const Tensor& rhs) {
  if (lower.rank() != 2 || lower.dim(0) != lower.dim(1) ||
      rhs.as_matrix().rows() != lower.as_matrix().rows()) {
    throw ShapeError("solve_lower_transposed: shapes " + to_string(lower.shape()) + " and " +
                     to_string(rhs.shape()));
  }
  Tensor out = rhs;
  lower.as_matrix().transpose().triangularView<Eigen::Upper>().solveInPlace(out.as_matrix());
  return out;
}

double log_det(const CholFactor& chol) {
  return 2.0 * chol.lower.as_matrix().diagonal().array().log().sum();
}

double gauss_kl(const Tensor& m, const Tensor& lower_q, const CholFactor& k_chol) {
  const std::size_t M = k_chol.lower.dim(0);
  if (m.numel() != M || lower_q.rank() != 2 || lower_q.dim(0) != M || lower_q.dim(1) != M) {
    throw ShapeError("gauss_kl: m " + to_string(m.shape()) + ", L_q " +
                     to_string(lower_q.shape()) + ", K " + to_string(k_chol.lower.shape()));
  }
  auto lq = lower_q.as_matrix();
  if ((lq.diagonal().array() <= 0.0).any()) {
    throw NumericError("gauss_kl: L_q must have a strictly positive diagonal");
  }
  const Tensor a = solve_lower(k_chol.lower, lower_q);
  const Tensor b = solve_lower(k_chol.lower, m.reshaped({M, 1}));
  const double trace = a.as_matrix().squaredNorm();
  const double maha = b.as_matrix().squaredNorm();
  const double logdet_s = 2.0 * lq.diagonal().array().log().sum();
  return 0.5 * (trace + maha - double(M) + log_det(k_chol) - logdet_s);
}

}  // namespace idsgp
