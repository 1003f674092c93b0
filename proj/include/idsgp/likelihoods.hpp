#pragma once

#include <string>

#include "idsgp/autodiff.hpp"
#include "idsgp/special.hpp"

namespace idsgp {

enum class LikelihoodKind { gaussian, probit };

std::string to_string(LikelihoodKind kind);
LikelihoodKind parse_likelihood_kind(const std::string& text);

struct LikelihoodParams {
  LikelihoodKind kind = LikelihoodKind::gaussian;
  /// log σ², used by the gaussian likelihood only.
  double log_noise = -2.302585092994046;  // log(0.1)
  /// Gauss–Hermite nodes for the probit expectation.
  std::size_t quadrature_nodes = 64;
};

struct LikelihoodVars {
  LikelihoodKind kind = LikelihoodKind::gaussian;
  ad::Var log_noise;
  GaussHermite rule;
};

LikelihoodVars bind(ad::Tape& tape, const LikelihoodParams& params, bool trainable,
                    const std::string& prefix = "lik.");

/// Throws DataError for probit labels outside {-1,+1}.
void validate_targets(LikelihoodKind kind, const Tensor& y);

/// E_{N(f; mu, var)}[log p(y | f)] per point. Closed form for gaussian,
/// Gauss–Hermite for probit.
ad::Var expected_loglik(const LikelihoodVars& lik, ad::Var mu, ad::Var var, const Tensor& y);

/// log ∫ p(y | f) N(f; mu, var) df per point (exact for both likelihoods).
ad::Var predictive_loglik(const LikelihoodVars& lik, ad::Var mu, ad::Var var, const Tensor& y);

Tensor expected_loglik(const LikelihoodParams& params, const Tensor& mu, const Tensor& var,
                       const Tensor& y);
Tensor predictive_loglik(const LikelihoodParams& params, const Tensor& mu, const Tensor& var,
                         const Tensor& y);

/// P(y = +1) under the probit likelihood: Φ(mu / sqrt(1 + var)).
double probit_class_probability(double mu, double var);

}  // namespace idsgp
