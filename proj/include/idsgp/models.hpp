#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "idsgp/autodiff.hpp"
#include "idsgp/kernels.hpp"
#include "idsgp/likelihoods.hpp"
#include "idsgp/linalg.hpp"
#include "idsgp/parameters.hpp"

// Exact GP, sparse variational GP (one global q(u)) and input-dependent
// sparse GP (a network emits Z, m, L per input point).
//
// q(u) is not whitened: m and L parameterize N(m, LLᵀ) directly. The
// variational marginal of f at x given (Z, m, L) is
//   mean = k_xZ K_Z⁻¹ m
//   var  = k(x,x) - |Lk⁻¹ k_Zx|² + |Lᵀ Lk⁻ᵀ Lk⁻¹ k_Zx|²       (K_Z = Lk Lkᵀ)

namespace idsgp {

enum class ModelKind { exact, vsgp, idsgp };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

/// Floor added after softplus on the diagonal of every unpacked L.
inline constexpr double kCholFloor = 1e-6;

struct ModelSpec {
  ModelKind kind = ModelKind::idsgp;
  KernelKind kernel = KernelKind::matern32;
  LikelihoodKind likelihood = LikelihoodKind::gaussian;
  std::size_t input_dim = 1;
  std::size_t num_inducing = 2;
  /// Hidden layer widths of the amortization network.
  std::vector<std::size_t> hidden{50, 50};
  bool ard = false;
  /// Keep the VSGP inducing inputs fixed during training.
  bool freeze_inducing = false;
  std::size_t quadrature_nodes = 64;
  JitterPolicy jitter;
};

struct VariationalState {
  Tensor Z;  // M×d
  Tensor m;  // M
  Tensor L;  // M×M lower triangular, positive diagonal
};

/// Fully connected tanh network; weights[l] is (in, out), the last layer is
/// linear. Output packing: Z (M·d, row-major), m (M), then the lower triangle
/// of L row by row (M(M+1)/2) with raw diagonal entries.
struct AmortNet {
  std::size_t input_dim = 1;
  std::size_t num_inducing = 1;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  std::size_t output_dim() const;
};

std::size_t amort_output_dim(std::size_t input_dim, std::size_t num_inducing);
std::size_t packed_lower_size(std::size_t m);

struct GpHyperparameters {
  KernelParams kernel;
  LikelihoodParams likelihood;
  JitterPolicy jitter;
};

struct PredictiveDistribution {
  Tensor mean;
  /// Variance of the latent f(x*), clamped at 0.
  Tensor variance;
  bool latent_only = true;
  /// Points whose raw variance fell below -1e-10 before clamping.
  std::size_t clamped = 0;
  double min_raw_variance = 0.0;
};

// Value-level operations.

/// Dense exact GP. N = 0 gives the prior.
PredictiveDistribution exact_gp_predict(const Tensor& X, const Tensor& y,
                                        const GpHyperparameters& hyper, const Tensor& X_star);
/// log N(y; 0, K + σ²I).
double exact_gp_logml(const Tensor& X, const Tensor& y, const GpHyperparameters& hyper);

/// (N/n) Σ E_q[log p(y_i | f_i)] - KL[q(u) | p(u)].
double vsgp_elbo(const Tensor& X_batch, const Tensor& y_batch, std::size_t n_total,
                 const VariationalState& state, const GpHyperparameters& hyper);
PredictiveDistribution vsgp_predict(const VariationalState& state, const GpHyperparameters& hyper,
                                    const Tensor& X_star);

VariationalState amort_forward(const AmortNet& net, const Tensor& x);
/// (N/n) Σ E_i - (1/n) Σ KL_i with the network evaluated at each batch input.
double idsgp_elbo(const Tensor& X_batch, const Tensor& y_batch, std::size_t n_total,
                  const AmortNet& net, const GpHyperparameters& hyper);
PredictiveDistribution idsgp_predict(const AmortNet& net, const GpHyperparameters& hyper,
                                     const Tensor& X_star);

// Tape-level building blocks.

struct LowerFactor {
  ad::Var L;     // (B,M,M)
  ad::Var diag;  // (B,M), the diagonal of L
};

/// Packed raw rows (B, M(M+1)/2) → L with softplus + kCholFloor diagonal.
LowerFactor unpack_lower(ad::Var raw, std::size_t m);
/// A fixed lower-triangular (B,M,M) tensor as a constant factor.
LowerFactor constant_lower(ad::Tape& tape, const Tensor& lower);

struct SparseMarginals {
  ad::Var mean;  // B·P
  ad::Var var;   // B·P, before clamping
  ad::Var kl;    // Σ_b KL[q_b(u) | p_b(u)]; empty when not requested
};

/// Z (B,M,d), m (B,M,1), L factor, X (B,P,d). Batch element b uses its own
/// K_{Z_b} factorization for all of its P points.
SparseMarginals sparse_marginals(const KernelVars& kernel, ad::Var Z, ad::Var m,
                                 const LowerFactor& L, ad::Var X, const JitterPolicy& jitter,
                                 bool with_kl = true);

struct NetVars {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
};

NetVars bind(ad::Tape& tape, const AmortNet& net, bool trainable, const std::string& prefix = "net.");

struct AmortOutputs {
  ad::Var Z;  // (n,M,d)
  ad::Var m;  // (n,M,1)
  LowerFactor L;
};

AmortOutputs amort_forward(const NetVars& net, ad::Var X, std::size_t input_dim,
                           std::size_t num_inducing);

ad::Var vsgp_elbo(const KernelVars& kernel, const LikelihoodVars& lik, ad::Var Z, ad::Var m,
                  const LowerFactor& L, const Tensor& X_batch, const Tensor& y_batch,
                  std::size_t n_total, const JitterPolicy& jitter);
ad::Var idsgp_elbo(const KernelVars& kernel, const LikelihoodVars& lik, const NetVars& net,
                   std::size_t num_inducing, const Tensor& X_batch, const Tensor& y_batch,
                   std::size_t n_total, const JitterPolicy& jitter);
ad::Var exact_gp_logml(const KernelVars& kernel, const LikelihoodVars& lik, const Tensor& X,
                       const Tensor& y, const JitterPolicy& jitter);

// Whole models: a spec plus a flat named parameter set.
//
// Parameter names: kernel.log_lengthscale, kernel.log_amplitude, lik.log_noise
// (gaussian), vsgp.Z / vsgp.m / vsgp.L_raw (packed), net.W<l> / net.b<l>,
// exact.X / exact.y (training data, always frozen).

struct Model {
  ModelSpec spec;
  ParameterSet params;
  std::set<std::string> frozen;

  GpHyperparameters hyper() const;
  VariationalState variational_state() const;
  AmortNet net() const;
};

/// Deterministic initialization from training data (inputs standardized).
/// The initial IDSGP network emits (Z₀, 0, chol(K_{Z₀})) for every input and
/// the initial VSGP state is (Z₀, 0, chol(K_{Z₀})), so both start at the prior.
Model init_model(const ModelSpec& spec, const Tensor& X, const Tensor& y, std::uint64_t seed);

void set_hyper(Model& model, const GpHyperparameters& hyper);
void set_variational_state(Model& model, const VariationalState& state);
void set_net(Model& model, const AmortNet& net);

/// The training objective on a batch: ELBO estimate for the sparse models,
/// log marginal likelihood of the stored data for the exact model.
ad::Var model_objective(const Model& model, const std::map<std::string, ad::Var>& vars,
                        const Tensor& X_batch, const Tensor& y_batch, std::size_t n_total);
double model_objective(const Model& model, const Tensor& X_batch, const Tensor& y_batch,
                       std::size_t n_total);

PredictiveDistribution predict(const Model& model, const Tensor& X_star);

/// Inverse of softplus(v) + kCholFloor for a positive diagonal entry.
double raw_from_diagonal(double l_ii);
Tensor pack_lower(const Tensor& lower);

}  // namespace idsgp
