#pragma once

#include "idsgp/tensor.hpp"

namespace idsgp {

/// Diagonal jitter schedule for Cholesky factorizations. Jitter values are
/// relative to mean(diag(A)). The first attempt is unjittered; afterwards the
/// jitter starts at `base` and is multiplied by `growth` up to `cap`.
struct JitterPolicy {
  double base = 1e-6;
  double growth = 2.0;
  double cap = 1e-2;
};

struct CholFactor {
  Tensor lower;
  double jitter_used = 0.0;
};

/// Lower Cholesky factor of `a` (row-major, n×n) written into `out`.
/// Returns the absolute jitter that was added to the diagonal.
/// Throws NotPositiveDefiniteError once the cap is exceeded.
double cholesky_jitter_inplace(ConstMatrixMap a, MatrixMap out, const JitterPolicy& policy);

/// Factorize a symmetric matrix with jitter escalation.
/// Throws ShapeError if `a` is not square or not symmetric within 1e-8.
CholFactor chol_jitter(const Tensor& a, const JitterPolicy& policy = {});

/// L⁻¹B for lower-triangular L.
Tensor solve_lower(const Tensor& lower, const Tensor& rhs);
/// L⁻ᵀB for lower-triangular L.
Tensor solve_lower_transposed(const Tensor& lower, const Tensor& rhs);

double log_det(const CholFactor& chol);

/// KL[N(m, L_q L_qᵀ) | N(0, K)] where K is given by its Cholesky factor.
/// Uses triangular solves only.
double gauss_kl(const Tensor& m, const Tensor& lower_q, const CholFactor& k_chol);

}  // namespace idsgp
