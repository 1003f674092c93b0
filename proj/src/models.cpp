#include "idsgp/models.hpp"

#include <algorithm>
#include <cmath>

#include "idsgp/errors.hpp"
#include "idsgp/random.hpp"

namespace idsgp {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::exact: return "exact";
    case ModelKind::vsgp: return "vsgp";
    case ModelKind::idsgp: return "idsgp";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "exact") return ModelKind::exact;
  if (text == "vsgp") return ModelKind::vsgp;
  if (text == "idsgp") return ModelKind::idsgp;
  throw ConfigError("model.kind", "unknown model kind '" + text + "' (expected exact, vsgp or idsgp)");
}

std::size_t packed_lower_size(std::size_t m) { return m * (m + 1) / 2; }

std::size_t amort_output_dim(std::size_t input_dim, std::size_t num_inducing) {
  return num_inducing * input_dim + num_inducing + packed_lower_size(num_inducing);
}

std::size_t AmortNet::output_dim() const { return amort_output_dim(input_dim, num_inducing); }

double raw_from_diagonal(double l_ii) {
  const double v = l_ii - kCholFloor;
  if (!(v > 0.0)) {
    throw NumericError("diagonal entry " + std::to_string(l_ii) + " is below the Cholesky floor");
  }
  return v + std::log(-std::expm1(-v));
}

Tensor pack_lower(const Tensor& lower) {
  if (lower.rank() != 2 || lower.dim(0) != lower.dim(1)) {
    throw ShapeError("pack_lower: expected a square matrix, got " + to_string(lower.shape()));
  }
  const std::size_t m = lower.dim(0);
  Tensor raw(Shape{packed_lower_size(m)});
  std::size_t t = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j <= i; ++j) raw[t++] = i == j ? raw_from_diagonal(lower(i, i)) : lower(i, j);
  return raw;
}

namespace {

// Row-major lower-triangular packing: (i, j) with j ≤ i lives at i(i+1)/2 + j.
std::size_t tri(std::size_t i, std::size_t j) { return i * (i + 1) / 2 + j; }

std::vector<long> diagonal_index(std::size_t m) {
  std::vector<long> idx(m * m, -1);
  for (std::size_t i = 0; i < m; ++i) idx[i * m + i] = long(i);
  return idx;
}

std::vector<long> flat_diagonal(std::size_t m) {
  std::vector<long> idx(m);
  for (std::size_t i = 0; i < m; ++i) idx[i] = long(i * m + i);
  return idx;
}

ad::Var log_det_from_factor(ad::Var lower, std::size_t batch, std::size_t m) {
  ad::Var diag = ad::gather_last(ad::reshape(lower, {batch, m * m}), flat_diagonal(m));
  return ad::scale(ad::sum(ad::log(diag)), 2.0);
}

PredictiveDistribution finish(Tensor mean, Tensor var) {
  PredictiveDistribution out;
  out.min_raw_variance = var.numel() ? *std::min_element(var.data().begin(), var.data().end()) : 0.0;
  for (double& v : var.data()) {
    if (v < -1e-10) ++out.clamped;
    v = std::max(v, 0.0);
  }
  out.mean = std::move(mean);
  out.variance = std::move(var);
  return out;
}

void require_inputs(const char* op, const Tensor& X, std::size_t d) {
  if (X.rank() != 2 || X.dim(1) != d) {
    throw ShapeError(std::string(op) + ": inputs of shape " + to_string(X.shape()) +
                     " do not have " + std::to_string(d) + " columns");
  }
}

void require_batch(const char* op, const Tensor& X, const Tensor& y, std::size_t n_total) {
  if (X.rank() != 2 || y.numel() != X.dim(0)) {
    throw ShapeError(std::string(op) + ": batch inputs " + to_string(X.shape()) + " and targets " +
                     to_string(y.shape()) + " disagree");
  }
  if (X.dim(0) == 0) throw ShapeError(std::string(op) + ": empty batch");
  if (X.dim(0) > n_total) {
    throw ShapeError(std::string(op) + ": batch of " + std::to_string(X.dim(0)) +
                     " points exceeds the training set size " + std::to_string(n_total));
  }
}

LikelihoodVars likelihood_vars(ad::Tape& tape, const GpHyperparameters& hyper) {
  return bind(tape, hyper.likelihood, false);
}

constexpr std::size_t kPredictChunk = 1024;

}  // namespace

LowerFactor unpack_lower(ad::Var raw, std::size_t m) {
  const std::size_t t = packed_lower_size(m);
  if (raw.value().numel() % std::max<std::size_t>(t, 1) != 0 || raw.shape().back() != t) {
    throw ShapeError("unpack_lower: packed rows " + to_string(raw.shape()) + " do not hold " +
                     std::to_string(t) + " entries");
  }
  const std::size_t batch = raw.value().numel() / t;
  ad::Var rows = ad::reshape(raw, {batch, t});
  std::vector<long> diag_idx(m), off_idx(m * m, -1);
  for (std::size_t i = 0; i < m; ++i) {
    diag_idx[i] = long(tri(i, i));
    for (std::size_t j = 0; j < i; ++j) off_idx[i * m + j] = long(tri(i, j));
  }
  ad::Var diag = ad::add_scalar(ad::softplus(ad::gather_last(rows, diag_idx)), kCholFloor);
  ad::Var full = ad::add(ad::gather_last(rows, off_idx), ad::gather_last(diag, diagonal_index(m)));
  return {ad::reshape(full, {batch, m, m}), diag};
}

LowerFactor constant_lower(ad::Tape& tape, const Tensor& lower) {
  const std::size_t m = lower.dim(lower.rank() - 1);
  const std::size_t batch = lower.numel() / (m * m);
  Tensor diag(Shape{batch, m});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < m; ++i) diag[b * m + i] = lower[b * m * m + i * m + i];
  return {tape.constant(lower.reshaped({batch, m, m})), tape.constant(std::move(diag))};
}

SparseMarginals sparse_marginals(const KernelVars& kernel, ad::Var Z, ad::Var m,
                                 const LowerFactor& L, ad::Var X, const JitterPolicy& jitter,
                                 bool with_kl) {
  const Shape zs = Z.shape();
  const Shape xs = X.shape();
  if (zs.size() != 3 || xs.size() != 3 || zs[0] != xs[0] || zs[2] != xs[2]) {
    throw ShapeError("sparse_marginals: Z " + to_string(zs) + " and X " + to_string(xs) +
                     " must be (B,M,d) and (B,P,d)");
  }
  const std::size_t B = zs[0], M = zs[1], P = xs[1];
  if (m.shape() != Shape{B, M, 1} || L.L.shape() != Shape{B, M, M}) {
    throw ShapeError("sparse_marginals: m " + to_string(m.shape()) + " and L " +
                     to_string(L.L.shape()) + " do not match Z " + to_string(zs));
  }
  ad::Tape& tape = *Z.tape();
  ad::Var lk = ad::cholesky(kernel_matrix(kernel, Z, Z), jitter);
  ad::Var a = ad::trisolve(lk, kernel_matrix(kernel, Z, X));  // Lk⁻¹ K_ZX
  ad::Var bm = ad::trisolve(lk, m);                           // Lk⁻¹ m
  ad::Var mean = ad::reshape(ad::matmul(ad::transpose(a), bm), {B * P});

  ad::Var c = ad::trisolve(lk, a, true);  // K_Z⁻¹ K_ZX
  ad::Var dq = ad::matmul(ad::transpose(L.L), c);
  ad::Var ones = tape.constant(Tensor(Shape{B, 1, M}, 1.0));
  ad::Var explained = ad::reshape(ad::matmul(ones, ad::mul(a, a)), {B * P});
  ad::Var retained = ad::reshape(ad::matmul(ones, ad::mul(dq, dq)), {B * P});
  ad::Var var = ad::add(ad::sub(kernel_diag(kernel, B * P), explained), retained);
  if (!with_kl) return {mean, var, {}};

  ad::Var w = ad::trisolve(lk, L.L);
  ad::Var trace = ad::sum(ad::mul(w, w));
  ad::Var maha = ad::sum(ad::mul(bm, bm));
  ad::Var logdet_k = log_det_from_factor(lk, B, M);
  ad::Var logdet_s = ad::scale(ad::sum(ad::log(L.diag)), 2.0);
  ad::Var kl = ad::scale(
      ad::add_scalar(ad::sub(ad::add(ad::add(trace, maha), logdet_k), logdet_s), -double(B * M)),
      0.5);
  return {mean, var, kl};
}

NetVars bind(ad::Tape& tape, const AmortNet& net, bool trainable, const std::string& prefix) {
  NetVars vars;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const std::string i = std::to_string(l);
    vars.weights.push_back(trainable ? tape.parameter(prefix + "W" + i, net.weights[l])
                                     : tape.constant(net.weights[l]));
    vars.biases.push_back(trainable ? tape.parameter(prefix + "b" + i, net.biases[l])
                                    : tape.constant(net.biases[l]));
  }
  return vars;
}

AmortOutputs amort_forward(const NetVars& net, ad::Var X, std::size_t input_dim,
                           std::size_t num_inducing) {
  if (X.shape().size() != 2 || X.shape()[1] != input_dim) {
    throw ShapeError("amort_forward: inputs " + to_string(X.shape()) + " do not have " +
                     std::to_string(input_dim) + " columns");
  }
  if (net.weights.empty()) throw ShapeError("amort_forward: network has no layers");
  ad::Tape& tape = *X.tape();
  const std::size_t n = X.shape()[0];
  const std::size_t d = input_dim, M = num_inducing;
  ad::Var ones = tape.constant(Tensor(Shape{n, 1}, 1.0));
  ad::Var h = X;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const std::size_t width = net.biases[l].value().numel();
    ad::Var z = ad::add(ad::matmul(h, net.weights[l]),
                        ad::matmul(ones, ad::reshape(net.biases[l], {1, width})));
    h = l + 1 < net.weights.size() ? ad::tanh(z) : z;
  }
  const std::size_t out = h.shape()[1];
  if (out != amort_output_dim(d, M)) {
    throw ShapeError("amort_forward: network emits " + std::to_string(out) + " values, packing needs " +
                     std::to_string(amort_output_dim(d, M)));
  }
  AmortOutputs o;
  o.Z = ad::reshape(ad::slice_last(h, 0, M * d), {n, M, d});
  o.m = ad::reshape(ad::slice_last(h, M * d, M * d + M), {n, M, 1});
  o.L = unpack_lower(ad::slice_last(h, M * d + M, out), M);
  return o;
}

ad::Var vsgp_elbo(const KernelVars& kernel, const LikelihoodVars& lik, ad::Var Z, ad::Var m,
                  const LowerFactor& L, const Tensor& X_batch, const Tensor& y_batch,
                  std::size_t n_total, const JitterPolicy& jitter) {
  require_batch("vsgp_elbo", X_batch, y_batch, n_total);
  ad::Tape& tape = *Z.tape();
  const std::size_t n = X_batch.dim(0), d = X_batch.dim(1);
  const std::size_t M = Z.shape()[0];
  if (Z.shape() != Shape{M, d}) {
    throw ShapeError("vsgp_elbo: Z " + to_string(Z.shape()) + " does not match inputs " +
                     to_string(X_batch.shape()));
  }
  ad::Var x = tape.constant(X_batch.reshaped({1, n, d}));
  SparseMarginals q = sparse_marginals(kernel, ad::reshape(Z, {1, M, d}),
                                       ad::reshape(m, {1, M, 1}), L, x, jitter);
  ad::Var e = expected_loglik(lik, q.mean, ad::clamp_min(q.var, 0.0), y_batch);
  return ad::sub(ad::scale(ad::sum(e), double(n_total) / double(n)), q.kl);
}

ad::Var idsgp_elbo(const KernelVars& kernel, const LikelihoodVars& lik, const NetVars& net,
                   std::size_t num_inducing, const Tensor& X_batch, const Tensor& y_batch,
                   std::size_t n_total, const JitterPolicy& jitter) {
  require_batch("idsgp_elbo", X_batch, y_batch, n_total);
  ad::Tape& tape = *kernel.log_amplitude.tape();
  const std::size_t n = X_batch.dim(0), d = X_batch.dim(1);
  AmortOutputs o = amort_forward(net, tape.constant(X_batch), d, num_inducing);
  // Each batch input is its own meta-point.
  ad::Var x = tape.constant(X_batch.reshaped({n, 1, d}));
  SparseMarginals q = sparse_marginals(kernel, o.Z, o.m, o.L, x, jitter);
  ad::Var e = expected_loglik(lik, q.mean, ad::clamp_min(q.var, 0.0), y_batch);
  return ad::sub(ad::scale(ad::sum(e), double(n_total) / double(n)),
                 ad::scale(q.kl, 1.0 / double(n)));
}

ad::Var exact_gp_logml(const KernelVars& kernel, const LikelihoodVars& lik, const Tensor& X,
                       const Tensor& y, const JitterPolicy& jitter) {
  if (lik.kind != LikelihoodKind::gaussian) {
    throw ConfigError("model.likelihood", "the exact GP supports only the gaussian likelihood");
  }
  ad::Tape& tape = *kernel.log_amplitude.tape();
  const std::size_t n = X.rank() == 2 ? X.dim(0) : 0;
  if (y.numel() != n) {
    throw ShapeError("exact_gp_logml: inputs " + to_string(X.shape()) + " and targets " +
                     to_string(y.shape()) + " disagree");
  }
  if (n == 0) return tape.constant(Tensor::scalar(0.0));
  ad::Var xv = tape.constant(X);
  ad::Var cov = ad::add(kernel_matrix(kernel, xv, xv),
                        ad::smul(ad::exp(lik.log_noise), tape.constant(Tensor::identity(n))));
  ad::Var lk = ad::cholesky(cov, jitter);
  ad::Var alpha = ad::trisolve(lk, tape.constant(y.reshaped({n, 1})));
  ad::Var half_logdet = ad::scale(log_det_from_factor(lk, 1, n), 0.5);
  return ad::add_scalar(ad::sub(ad::scale(ad::sum(ad::mul(alpha, alpha)), -0.5), half_logdet),
                        -double(n) * kLogSqrt2Pi);
}

// Value-level wrappers.

PredictiveDistribution exact_gp_predict(const Tensor& X, const Tensor& y,
                                        const GpHyperparameters& hyper, const Tensor& X_star) {
  if (hyper.likelihood.kind != LikelihoodKind::gaussian) {
    throw ConfigError("model.likelihood", "the exact GP supports only the gaussian likelihood");
  }
  const std::size_t t = X_star.dim(0);
  const std::size_t n = X.rank() == 2 ? X.dim(0) : 0;
  Tensor prior = kernel_diag(hyper.kernel, X_star);
  if (n == 0) return finish(Tensor(Shape{t}, 0.0), prior);
  require_inputs("exact_gp_predict", X_star, X.dim(1));
  if (y.numel() != n) throw ShapeError("exact_gp_predict: inputs and targets disagree");

  Tensor cov = kernel_matrix(hyper.kernel, X, X);
  auto cm = cov.as_matrix();
  cm = (0.5 * (cm + cm.transpose())).eval();
  cm.diagonal().array() += std::exp(hyper.likelihood.log_noise);
  const CholFactor chol = chol_jitter(cov, hyper.jitter);
  const Tensor a = solve_lower(chol.lower, kernel_matrix(hyper.kernel, X, X_star));
  const Tensor alpha = solve_lower(chol.lower, y.reshaped({n, 1}));
  Tensor mean(Shape{t});
  Tensor var = prior;
  mean.as_matrix() = a.as_matrix().transpose() * alpha.as_matrix();
  var.as_matrix() -= a.as_matrix().colwise().squaredNorm().transpose();
  return finish(std::move(mean), std::move(var));
}

double exact_gp_logml(const Tensor& X, const Tensor& y, const GpHyperparameters& hyper) {
  ad::Tape tape;
  KernelVars k = bind(tape, hyper.kernel, false);
  return exact_gp_logml(k, likelihood_vars(tape, hyper), X, y, hyper.jitter).value().item();
}

double vsgp_elbo(const Tensor& X_batch, const Tensor& y_batch, std::size_t n_total,
                 const VariationalState& state, const GpHyperparameters& hyper) {
  ad::Tape tape;
  KernelVars k = bind(tape, hyper.kernel, false);
  LikelihoodVars lik = likelihood_vars(tape, hyper);
  return vsgp_elbo(k, lik, tape.constant(state.Z), tape.constant(state.m),
                   constant_lower(tape, state.L), X_batch, y_batch, n_total, hyper.jitter)
      .value()
      .item();
}

PredictiveDistribution vsgp_predict(const VariationalState& state, const GpHyperparameters& hyper,
                                    const Tensor& X_star) {
  const std::size_t M = state.Z.dim(0), d = state.Z.dim(1);
  require_inputs("vsgp_predict", X_star, d);
  const std::size_t t = X_star.dim(0);
  Tensor mean(Shape{t}), var(Shape{t});
  for (std::size_t start = 0; start < t; start += kPredictChunk) {
    const std::size_t c = std::min(kPredictChunk, t - start);
    ad::Tape tape;
    KernelVars k = bind(tape, hyper.kernel, false);
    Tensor xc(Shape{1, c, d},
              std::vector<double>(X_star.data().begin() + std::ptrdiff_t(start * d),
                                  X_star.data().begin() + std::ptrdiff_t((start + c) * d)));
    SparseMarginals q = sparse_marginals(
        k, tape.constant(state.Z.reshaped({1, M, d})), tape.constant(state.m.reshaped({1, M, 1})),
        constant_lower(tape, state.L), tape.constant(std::move(xc)), hyper.jitter, false);
    std::copy_n(q.mean.value().data().begin(), c, mean.data().begin() + std::ptrdiff_t(start));
    std::copy_n(q.var.value().data().begin(), c, var.data().begin() + std::ptrdiff_t(start));
  }
  return finish(std::move(mean), std::move(var));
}

VariationalState amort_forward(const AmortNet& net, const Tensor& x) {
  if (x.numel() != net.input_dim) {
    throw ShapeError("amort_forward: input of shape " + to_string(x.shape()) + " but the network expects d=" +
                     std::to_string(net.input_dim));
  }
  ad::Tape tape;
  NetVars vars = bind(tape, net, false);
  const std::size_t M = net.num_inducing, d = net.input_dim;
  AmortOutputs o = amort_forward(vars, tape.constant(x.reshaped({1, d})), d, M);
  return {o.Z.value().reshaped({M, d}), o.m.value().reshaped({M}), o.L.L.value().reshaped({M, M})};
}

double idsgp_elbo(const Tensor& X_batch, const Tensor& y_batch, std::size_t n_total,
                  const AmortNet& net, const GpHyperparameters& hyper) {
  ad::Tape tape;
  KernelVars k = bind(tape, hyper.kernel, false);
  LikelihoodVars lik = likelihood_vars(tape, hyper);
  NetVars vars = bind(tape, net, false);
  return idsgp_elbo(k, lik, vars, net.num_inducing, X_batch, y_batch, n_total, hyper.jitter)
      .value()
      .item();
}

// No gradients are needed here, so the forward pass runs on plain Eigen
// matrices; each point then gets its own M×M factorization.
PredictiveDistribution idsgp_predict(const AmortNet& net, const GpHyperparameters& hyper,
                                     const Tensor& X_star) {
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const std::size_t d = net.input_dim, M = net.num_inducing;
  require_inputs("idsgp_predict", X_star, d);
  if (net.weights.empty()) throw ShapeError("idsgp_predict: network has no layers");
  const std::size_t t = X_star.dim(0);
  RowMatrix h = Eigen::Map<const RowMatrix>(X_star.data().data(), Eigen::Index(t), Eigen::Index(d));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const Tensor& w = net.weights[l];
    RowMatrix z = h * Eigen::Map<const RowMatrix>(w.data().data(), Eigen::Index(w.dim(0)), Eigen::Index(w.dim(1)));
    z.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(net.biases[l].data().data(), z.cols());
    h = l + 1 < net.weights.size() ? RowMatrix(z.array().tanh()) : std::move(z);
  }
  if (std::size_t(h.cols()) != amort_output_dim(d, M)) {
    throw ShapeError("idsgp_predict: network emits " + std::to_string(h.cols()) + " values, packing needs " +
                     std::to_string(amort_output_dim(d, M)));
  }

  Tensor mean(Shape{t}), var(Shape{t});
  Tensor Z(Shape{M, d}), x(Shape{1, d});
  Eigen::MatrixXd L(M, M);
  for (std::size_t i = 0; i < t; ++i) {
    const double* row = h.row(Eigen::Index(i)).data();
    std::copy_n(row, M * d, Z.data().begin());
    std::copy_n(X_star.data().begin() + std::ptrdiff_t(i * d), d, x.data().begin());
    const Eigen::Map<const Eigen::VectorXd> m(row + M * d, Eigen::Index(M));
    const double* packed = row + M * d + M;
    L.setZero();
    for (std::size_t r = 0; r < M; ++r) {
      for (std::size_t c = 0; c < r; ++c) L(Eigen::Index(r), Eigen::Index(c)) = packed[tri(r, c)];
      const double raw = packed[tri(r, r)];
      L(Eigen::Index(r), Eigen::Index(r)) = std::max(raw, 0.0) + std::log1p(std::exp(-std::abs(raw))) + kCholFloor;
    }
    const CholFactor kc = chol_jitter(kernel_matrix(hyper.kernel, Z, Z), hyper.jitter);
    const auto lk = Eigen::Map<const RowMatrix>(kc.lower.data().data(), Eigen::Index(M), Eigen::Index(M))
                        .triangularView<Eigen::Lower>();
    const Tensor kzx = kernel_matrix(hyper.kernel, Z, x);
    const Eigen::VectorXd a = lk.solve(Eigen::Map<const Eigen::VectorXd>(kzx.data().data(), Eigen::Index(M)));
    const Eigen::VectorXd c = lk.transpose().solve(a);
    const Eigen::VectorXd dq = L.transpose() * c;
    mean[i] = a.dot(lk.solve(m));
    var[i] = kernel_diag(hyper.kernel, x)[0] - a.squaredNorm() + dq.squaredNorm();
  }
  return finish(std::move(mean), std::move(var));
}

// Whole-model plumbing.

GpHyperparameters Model::hyper() const {
  GpHyperparameters h;
  h.kernel.kind = spec.kernel;
  h.kernel.log_lengthscale = params.at("kernel.log_lengthscale");
  h.kernel.log_amplitude = params.at("kernel.log_amplitude").item();
  h.likelihood.kind = spec.likelihood;
  h.likelihood.quadrature_nodes = spec.quadrature_nodes;
  if (spec.likelihood == LikelihoodKind::gaussian) {
    h.likelihood.log_noise = params.at("lik.log_noise").item();
  }
  h.jitter = spec.jitter;
  return h;
}

VariationalState Model::variational_state() const {
  if (spec.kind != ModelKind::vsgp) throw std::logic_error("variational_state: not a VSGP model");
  const std::size_t M = spec.num_inducing;
  ad::Tape tape;
  LowerFactor l = unpack_lower(tape.constant(params.at("vsgp.L_raw").reshaped({1, packed_lower_size(M)})), M);
  return {params.at("vsgp.Z"), params.at("vsgp.m"), l.L.value().reshaped({M, M})};
}

AmortNet Model::net() const {
  if (spec.kind != ModelKind::idsgp) throw std::logic_error("net: not an IDSGP model");
  AmortNet net;
  net.input_dim = spec.input_dim;
  net.num_inducing = spec.num_inducing;
  for (std::size_t l = 0; l <= spec.hidden.size(); ++l) {
    net.weights.push_back(params.at("net.W" + std::to_string(l)));
    net.biases.push_back(params.at("net.b" + std::to_string(l)));
  }
  return net;
}

void set_hyper(Model& model, const GpHyperparameters& hyper) {
  model.params.set("kernel.log_lengthscale", hyper.kernel.log_lengthscale);
  model.params.set("kernel.log_amplitude", Tensor::scalar(hyper.kernel.log_amplitude));
  if (model.spec.likelihood == LikelihoodKind::gaussian) {
    model.params.set("lik.log_noise", Tensor::scalar(hyper.likelihood.log_noise));
  }
}

void set_variational_state(Model& model, const VariationalState& state) {
  model.params.set("vsgp.Z", state.Z);
  model.params.set("vsgp.m", state.m.reshaped({state.m.numel()}));
  model.params.set("vsgp.L_raw", pack_lower(state.L));
}

void set_net(Model& model, const AmortNet& net) {
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    model.params.set("net.W" + std::to_string(l), net.weights[l]);
    model.params.set("net.b" + std::to_string(l), net.biases[l]);
  }
}

namespace {

Tensor rows_of(const Tensor& X, const std::vector<std::size_t>& idx) {
  const std::size_t d = X.dim(1);
  Tensor out(Shape{idx.size(), d});
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t c = 0; c < d; ++c) out(i, c) = X(idx[i], c);
  return out;
}

Tensor prior_factor(const KernelParams& kernel, const Tensor& Z, const JitterPolicy& jitter) {
  Tensor k = kernel_matrix(kernel, Z, Z);
  auto km = k.as_matrix();
  km = (0.5 * (km + km.transpose())).eval();
  return chol_jitter(k, jitter).lower;
}

}  // namespace

Model init_model(const ModelSpec& spec, const Tensor& X, const Tensor& y, std::uint64_t seed) {
  require_inputs("init_model", X, spec.input_dim);
  const std::size_t n = X.dim(0), d = spec.input_dim, M = spec.num_inducing;
  if (y.numel() != n) throw ShapeError("init_model: inputs and targets disagree");
  if (n == 0) throw DataError("init_model: empty training set");
  if (spec.kind != ModelKind::exact && M == 0) {
    throw ConfigError("model.num_inducing", "at least one inducing point is required");
  }
  validate_targets(spec.likelihood, y);

  Model model;
  model.spec = spec;
  Rng rng(seed);

  double y_std = 1.0;
  if (spec.likelihood == LikelihoodKind::gaussian) {
    const Eigen::VectorXd yv = y.to_eigen();
    const double var = (yv.array() - yv.mean()).square().mean();
    if (var > 0.0) y_std = std::sqrt(var);
  }
  GpHyperparameters hyper;
  hyper.kernel = init_kernel_params(spec.kernel, X, spec.ard && d > 1, y_std);
  hyper.likelihood.kind = spec.likelihood;
  hyper.likelihood.log_noise = std::log(0.1 * y_std * y_std);
  hyper.likelihood.quadrature_nodes = spec.quadrature_nodes;
  hyper.jitter = spec.jitter;
  set_hyper(model, hyper);

  switch (spec.kind) {
    case ModelKind::exact: {
      if (spec.likelihood != LikelihoodKind::gaussian) {
        throw ConfigError("model.likelihood", "the exact GP supports only the gaussian likelihood");
      }
      model.params.set("exact.X", X);
      model.params.set("exact.y", y.reshaped({n}));
      model.frozen = {"exact.X", "exact.y"};
      break;
    }
    case ModelKind::vsgp: {
      if (M > n) {
        throw ConfigError("model.num_inducing", "VSGP needs M ≤ N distinct training points (M=" +
                                                    std::to_string(M) + ", N=" + std::to_string(n) + ")");
      }
      std::vector<std::size_t> idx(M);
      if (M == n) {
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
      } else {
        std::vector<std::size_t> perm = permutation(n, rng);
        std::copy_n(perm.begin(), M, idx.begin());
      }
      VariationalState s;
      s.Z = rows_of(X, idx);
      s.m = Tensor(Shape{M}, 0.0);
      s.L = prior_factor(hyper.kernel, s.Z, spec.jitter);
      set_variational_state(model, s);
      if (spec.freeze_inducing) model.frozen.insert("vsgp.Z");
      break;
    }
    case ModelKind::idsgp: {
      AmortNet net;
      net.input_dim = d;
      net.num_inducing = M;
      std::vector<std::size_t> widths{d};
      widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
      widths.push_back(amort_output_dim(d, M));
      for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l], out = widths[l + 1];
        Tensor w(Shape{in, out}, 0.0);
        if (l + 2 < widths.size()) {
          const double a = std::sqrt(6.0 / double(in + out));
          std::uniform_real_distribution<double> u(-a, a);
          for (double& v : w.data()) v = u(rng);
        }
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(Shape{out}, 0.0);
      }
      // Final layer: zero weights, biases packing (Z₀, 0, chol(K_{Z₀})).
      std::vector<std::size_t> perm = permutation(n, rng);
      std::vector<std::size_t> idx(M);
      for (std::size_t i = 0; i < M; ++i) idx[i] = perm[i % n];
      Tensor z0 = rows_of(X, idx);
      const Eigen::MatrixXd xm = X.to_eigen();
      const Eigen::RowVectorXd sd =
          ((xm.rowwise() - xm.colwise().mean()).array().square().colwise().mean()).sqrt();
      std::normal_distribution<double> noise(0.0, 1.0);
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t c = 0; c < d; ++c) z0(i, c) += 0.01 * sd(Eigen::Index(c)) * noise(rng);
      const Tensor raw_l = pack_lower(prior_factor(hyper.kernel, z0, spec.jitter));
      Tensor& bias = net.biases.back();
      std::copy(z0.data().begin(), z0.data().end(), bias.data().begin());
      std::copy(raw_l.data().begin(), raw_l.data().end(),
                bias.data().begin() + std::ptrdiff_t(M * d + M));
      set_net(model, net);
      break;
    }
  }
  return model;
}

ad::Var model_objective(const Model& model, const std::map<std::string, ad::Var>& vars,
                        const Tensor& X_batch, const Tensor& y_batch, std::size_t n_total) {
  const ModelSpec& spec = model.spec;
  KernelVars k{spec.kernel, vars.at("kernel.log_lengthscale"), vars.at("kernel.log_amplitude")};
  LikelihoodVars lik;
  lik.kind = spec.likelihood;
  if (spec.likelihood == LikelihoodKind::gaussian) lik.log_noise = vars.at("lik.log_noise");
  else lik.rule = gauss_hermite(spec.quadrature_nodes);

  switch (spec.kind) {
    case ModelKind::exact:
      return exact_gp_logml(k, lik, model.params.at("exact.X"), model.params.at("exact.y"),
                            spec.jitter);
    case ModelKind::vsgp: {
      const std::size_t M = spec.num_inducing;
      LowerFactor l = unpack_lower(ad::reshape(vars.at("vsgp.L_raw"), {1, packed_lower_size(M)}), M);
      return vsgp_elbo(k, lik, vars.at("vsgp.Z"), vars.at("vsgp.m"), l, X_batch, y_batch, n_total,
                       spec.jitter);
    }
    case ModelKind::idsgp: {
      NetVars net;
      for (std::size_t l = 0; l <= spec.hidden.size(); ++l) {
        net.weights.push_back(vars.at("net.W" + std::to_string(l)));
        net.biases.push_back(vars.at("net.b" + std::to_string(l)));
      }
      return idsgp_elbo(k, lik, net, spec.num_inducing, X_batch, y_batch, n_total, spec.jitter);
    }
  }
  throw std::logic_error("model_objective: unknown model kind");
}

double model_objective(const Model& model, const Tensor& X_batch, const Tensor& y_batch,
                       std::size_t n_total) {
  ad::Tape tape;
  auto vars = model.params.bind(tape, model.frozen);
  return model_objective(model, vars, X_batch, y_batch, n_total).value().item();
}

PredictiveDistribution predict(const Model& model, const Tensor& X_star) {
  switch (model.spec.kind) {
    case ModelKind::exact:
      return exact_gp_predict(model.params.at("exact.X"), model.params.at("exact.y"), model.hyper(),
                              X_star);
    case ModelKind::vsgp: return vsgp_predict(model.variational_state(), model.hyper(), X_star);
    case ModelKind::idsgp: return idsgp_predict(model.net(), model.hyper(), X_star);
  }
  throw std::logic_error("predict: unknown model kind");
}

}  // namespace idsgp
