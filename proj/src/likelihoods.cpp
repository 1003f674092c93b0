#include "idsgp/likelihoods.hpp"

#include <cmath>

#include "idsgp/errors.hpp"

namespace idsgp {

std::string to_string(LikelihoodKind kind) {
  return kind == LikelihoodKind::gaussian ? "gaussian" : "probit";
}

LikelihoodKind parse_likelihood_kind(const std::string& text) {
  if (text == "gaussian") return LikelihoodKind::gaussian;
  if (text == "probit") return LikelihoodKind::probit;
  throw ConfigError("model.likelihood",
                    "unknown likelihood '" + text + "' (expected gaussian or probit)");
}

LikelihoodVars bind(ad::Tape& tape, const LikelihoodParams& params, bool trainable,
                    const std::string& prefix) {
  LikelihoodVars lik;
  lik.kind = params.kind;
  if (params.kind == LikelihoodKind::gaussian) {
    lik.log_noise = trainable ? tape.parameter(prefix + "log_noise", Tensor::scalar(params.log_noise))
                              : tape.constant(Tensor::scalar(params.log_noise));
  } else {
    lik.rule = gauss_hermite(params.quadrature_nodes);
  }
  return lik;
}

void validate_targets(LikelihoodKind kind, const Tensor& y) {
  if (kind != LikelihoodKind::probit) return;
  for (double v : y.data()) {
    if (v != 1.0 && v != -1.0) {
      throw DataError("probit likelihood: label " + std::to_string(v) + " is not in {-1,+1}");
    }
  }
}

namespace {

void check_inputs(ad::Var mu, ad::Var var, const Tensor& y) {
  const std::size_t n = y.numel();
  if (mu.value().numel() != n || var.value().numel() != n || mu.shape().size() != 1 ||
      var.shape().size() != 1) {
    throw ShapeError("likelihood: mu " + to_string(mu.shape()) + ", var " +
                     to_string(var.shape()) + ", y " + to_string(y.shape()) +
                     " must be vectors of equal length");
  }
  for (double v : var.value().data()) {
    if (v < 0.0) throw NumericError("likelihood: negative latent variance " + std::to_string(v));
  }
}

}  // namespace

ad::Var expected_loglik(const LikelihoodVars& lik, ad::Var mu, ad::Var var, const Tensor& y) {
  check_inputs(mu, var, y);
  validate_targets(lik.kind, y);
  ad::Tape& tape = *mu.tape();
  const std::size_t n = y.numel();
  if (lik.kind == LikelihoodKind::gaussian) {
    ad::Var resid = ad::sub(tape.constant(y.reshaped({n})), mu);
    ad::Var spread = ad::add(ad::mul(resid, resid), var);
    ad::Var half_precision = ad::scale(ad::exp(ad::neg(lik.log_noise)), -0.5);
    ad::Var log_norm = ad::add_scalar(ad::scale(lik.log_noise, -0.5), -kLogSqrt2Pi);
    return ad::sadd(log_norm, ad::smul(half_precision, spread));
  }
  // f_q = mu + sqrt(2 var) t_q;  E ≈ π^{-1/2} Σ_q w_q log Φ(y f_q)
  const std::size_t q = lik.rule.nodes.size();
  Tensor nodes(Shape{1, q}, std::vector<double>(lik.rule.nodes));
  Tensor weights(Shape{q, 1});
  const double inv_sqrt_pi = 1.0 / std::sqrt(std::acos(-1.0));
  for (std::size_t i = 0; i < q; ++i) weights[i] = lik.rule.weights[i] * inv_sqrt_pi;
  Tensor labels(Shape{n, q});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < q; ++j) labels(i, j) = y[i];

  ad::Var sd = ad::reshape(ad::sqrt(ad::clamp_min(ad::scale(var, 2.0), 1e-200)), {n, 1});
  ad::Var centre = ad::matmul(ad::reshape(mu, {n, 1}), tape.constant(Tensor(Shape{1, q}, 1.0)));
  ad::Var f = ad::add(centre, ad::matmul(sd, tape.constant(nodes)));
  ad::Var logphi = ad::log_ndtr(ad::mul(tape.constant(labels), f));
  return ad::reshape(ad::matmul(logphi, tape.constant(weights)), {n});
}

ad::Var predictive_loglik(const LikelihoodVars& lik, ad::Var mu, ad::Var var, const Tensor& y) {
  check_inputs(mu, var, y);
  validate_targets(lik.kind, y);
  ad::Tape& tape = *mu.tape();
  const std::size_t n = y.numel();
  if (lik.kind == LikelihoodKind::gaussian) {
    ad::Var total = ad::sadd(ad::exp(lik.log_noise), var);
    ad::Var resid = ad::sub(tape.constant(y.reshaped({n})), mu);
    ad::Var maha = ad::mul(ad::mul(resid, resid), ad::exp(ad::neg(ad::log(total))));
    return ad::add_scalar(ad::add(ad::scale(ad::log(total), -0.5), ad::scale(maha, -0.5)),
                          -kLogSqrt2Pi);
  }
  ad::Var z = ad::mul(mu, ad::exp(ad::scale(ad::log(ad::add_scalar(var, 1.0)), -0.5)));
  return ad::log_ndtr(ad::mul(tape.constant(y.reshaped({n})), z));
}

Tensor expected_loglik(const LikelihoodParams& params, const Tensor& mu, const Tensor& var,
                       const Tensor& y) {
  ad::Tape tape;
  LikelihoodVars lik = bind(tape, params, false);
  return expected_loglik(lik, tape.constant(mu), tape.constant(var), y).value();
}

Tensor predictive_loglik(const LikelihoodParams& params, const Tensor& mu, const Tensor& var,
                         const Tensor& y) {
  ad::Tape tape;
  LikelihoodVars lik = bind(tape, params, false);
  return predictive_loglik(lik, tape.constant(mu), tape.constant(var), y).value();
}

double probit_class_probability(double mu, double var) {
  return ndtr(mu / std::sqrt(1.0 + var));
}

}  // namespace idsgp
