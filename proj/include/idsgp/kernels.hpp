#pragma once

#include <string>

#include "idsgp/autodiff.hpp"
#include "idsgp/tensor.hpp"

namespace idsgp {

enum class KernelKind { matern32, rbf };

std::string to_string(KernelKind kind);
KernelKind parse_kernel_kind(const std::string& text);

/// Stationary kernel hyperparameters on log scale. A single-element
/// lengthscale is isotropic; d elements give per-dimension (ARD) scaling.
struct KernelParams {
  KernelKind kind = KernelKind::matern32;
  Tensor log_lengthscale = Tensor::vector({0.0});
  double log_amplitude = 0.0;

  bool ard() const { return log_lengthscale.numel() > 1; }
};

/// Kernel hyperparameters as tape variables.
struct KernelVars {
  KernelKind kind = KernelKind::matern32;
  ad::Var log_lengthscale;
  ad::Var log_amplitude;
};

/// Binds params onto a tape; as parameters (receiving gradients) or constants.
KernelVars bind(ad::Tape& tape, const KernelParams& params, bool trainable,
                const std::string& prefix = "kernel.");

/// Cross-covariance between the rows of A (n×d) and B (m×d), or the batched
/// form (b,n,d)×(b,m,d) → (b,n,m).
ad::Var kernel_matrix(const KernelVars& k, ad::Var a, ad::Var b);
/// k(x, x) for n points: σ_f² repeated.
ad::Var kernel_diag(const KernelVars& k, std::size_t n);

Tensor kernel_matrix(const KernelParams& params, const Tensor& a, const Tensor& b);
Tensor kernel_diag(const KernelParams& params, const Tensor& a);

/// Median-heuristic initialization: log of the median pairwise distance of a
/// (≤1000-point) subsample, per dimension when `ard`; amplitude log(target_std).
KernelParams init_kernel_params(KernelKind kind, const Tensor& x, bool ard, double target_std);

}  // namespace idsgp
