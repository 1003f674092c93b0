#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "idsgp/errors.hpp"
#include "idsgp/models.hpp"
#include "oracles.hpp"

using namespace idsgp;

namespace {

GpHyperparameters gaussian_hyper(std::size_t d, double log_ls = 0.0, double log_amp = 0.0,
                                 double noise = 0.1) {
  GpHyperparameters h;
  h.kernel.log_lengthscale = Tensor(Shape{d}, log_ls);
  h.kernel.log_amplitude = log_amp;
  h.likelihood.kind = LikelihoodKind::gaussian;
  h.likelihood.log_noise = std::log(noise);
  return h;
}

AmortNet random_net(std::mt19937_64& rng, std::size_t d, std::size_t M,
                    std::vector<std::size_t> hidden, double final_sd = 0.3) {
  AmortNet net;
  net.input_dim = d;
  net.num_inducing = M;
  std::vector<std::size_t> widths{d};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(amort_output_dim(d, M));
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const bool last = l + 2 == widths.size();
    net.weights.push_back(oracle::random_tensor(rng, {widths[l], widths[l + 1]}, last ? final_sd : 0.7));
    net.biases.push_back(oracle::random_tensor(rng, {widths[l + 1]}, last ? 1.0 : 0.3));
  }
  return net;
}

// Network with zero weights whose bias packs (Z, m, L).
AmortNet constant_net(std::size_t d, const VariationalState& s) {
  const std::size_t M = s.Z.dim(0);
  AmortNet net;
  net.input_dim = d;
  net.num_inducing = M;
  const std::size_t out = amort_output_dim(d, M);
  net.weights.push_back(Tensor(Shape{d, 4}, 0.1));
  net.biases.push_back(Tensor(Shape{4}, 0.2));
  net.weights.push_back(Tensor(Shape{4, out}, 0.0));
  Tensor b(Shape{out});
  std::copy(s.Z.data().begin(), s.Z.data().end(), b.data().begin());
  std::copy(s.m.data().begin(), s.m.data().end(), b.data().begin() + std::ptrdiff_t(M * d));
  const Tensor raw = pack_lower(s.L);
  std::copy(raw.data().begin(), raw.data().end(), b.data().begin() + std::ptrdiff_t(M * d + M));
  net.biases.push_back(b);
  return net;
}

Tensor prior_chol(const GpHyperparameters& h, const Tensor& Z) {
  return chol_jitter(kernel_matrix(h.kernel, Z, Z), h.jitter).lower;
}

Tensor sample_y(std::mt19937_64& rng, const Tensor& X) {
  Tensor y(Shape{X.dim(0)});
  std::normal_distribution<double> n(0.0, 0.1);
  for (std::size_t i = 0; i < X.dim(0); ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < X.dim(1); ++c) s += std::sin(1.5 * X(i, c));
    y[i] = s + n(rng);
  }
  return y;
}

// Dense predictive equations with explicit inverses.
void dense_exact(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::MatrixXd& Xs,
                 double ls, double amp, double noise, Eigen::VectorXd& mean, Eigen::VectorXd& var) {
  const Eigen::VectorXd l = Eigen::VectorXd::Constant(X.cols(), ls);
  const Eigen::MatrixXd K = oracle::matern32_matrix(X, X, l, amp);
  const Eigen::MatrixXd Ks = oracle::matern32_matrix(X, Xs, l, amp);
  const Eigen::MatrixXd inv = (K + noise * Eigen::MatrixXd::Identity(X.rows(), X.rows())).inverse();
  mean = Ks.transpose() * inv * y;
  var = (amp * amp - (Ks.transpose() * inv * Ks).diagonal().array()).matrix();
}

}  // namespace

TEST_CASE("amort_forward: packing width") {
  CHECK(amort_output_dim(1, 2) == 7);
  CHECK(amort_output_dim(2, 3) == 6 + 3 + 6);
  CHECK(packed_lower_size(128) == 8256);
}

TEST_CASE("amort_forward: constant network returns its bias state for every input") {
  VariationalState s{Tensor::matrix(2, 1, {-0.5, 0.75}), Tensor::vector({0.0, 0.0}),
                     Tensor::identity(2)};
  const AmortNet net = constant_net(1, s);
  for (double x : {-3.0, 0.0, 0.4, 10.0}) {
    const VariationalState out = amort_forward(net, Tensor::vector({x}));
    CHECK(out.Z == s.Z);
    CHECK(out.m == s.m);
    CHECK(out.L(0, 1) == 0.0);
    CHECK(out.L(1, 0) == 0.0);
    CHECK(std::abs(out.L(0, 0) - 1.0) <= 1e-15);
    CHECK(std::abs(out.L(1, 1) - 1.0) <= 1e-15);
  }
}

TEST_CASE("amort_forward: inducing points depend on the input") {
  std::mt19937_64 rng(4);
  const AmortNet net = random_net(rng, 2, 3, {8});
  const VariationalState a = amort_forward(net, Tensor::vector({0.1, -0.2}));
  const VariationalState b = amort_forward(net, Tensor::vector({0.1 + 1e-3, -0.2}));
  CHECK((a.Z.to_eigen() - b.Z.to_eigen()).norm() > 0.0);
  CHECK((a.L.to_eigen().diagonal().array() > 0.0).all());
  CHECK(a.L(0, 1) == 0.0);
  CHECK_THROWS_AS(amort_forward(net, Tensor::vector({1, 2, 3})), ShapeError);
}

TEST_CASE("pack_lower and unpack_lower round-trip") {
  const Tensor l = Tensor::matrix(3, 3, {1.5, 0, 0, -0.3, 0.2, 0, 0.7, 0.1, 3.0});
  ad::Tape tape;
  LowerFactor f = unpack_lower(tape.constant(pack_lower(l).reshaped({1, 6})), 3);
  const Eigen::MatrixXd back = f.L.value().reshaped({3, 3}).to_eigen();
  CHECK((back - l.to_eigen()).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK_THROWS_AS(pack_lower(Tensor::matrix(1, 1, {1e-7})), NumericError);
}

TEST_CASE("exact_gp_predict: worked cases") {
  const Tensor X = Tensor::matrix(3, 1, {-1.0, 0.2, 1.3});
  const Tensor y = Tensor::vector({0.5, -0.4, 1.1});
  SUBCASE("noiseless interpolation") {
    GpHyperparameters h = gaussian_hyper(1, 0.0, 0.0, 1e-12);
    const PredictiveDistribution p = exact_gp_predict(X, y, h, Tensor::matrix(1, 1, {0.2}));
    CHECK(std::abs(p.mean[0] - (-0.4)) <= 1e-4);
    CHECK(std::abs(p.variance[0]) <= 1e-4);
  }
  SUBCASE("empty training set gives the prior") {
    GpHyperparameters h = gaussian_hyper(1, 0.0, std::log(1.5));
    const PredictiveDistribution p =
        exact_gp_predict(Tensor(Shape{0, 1}), Tensor(Shape{0}), h, Tensor::matrix(2, 1, {0.0, 3.0}));
    CHECK(p.mean == Tensor(Shape{2}, 0.0));
    for (double v : p.variance.data()) CHECK(v == doctest::Approx(2.25).epsilon(1e-14));
  }
  SUBCASE("N = 3 matches the dense formula") {
    GpHyperparameters h = gaussian_hyper(1, 0.3, -0.2, 0.05);
    const Tensor xs = Tensor::matrix(4, 1, {-2.0, 0.0, 0.7, 2.5});
    const PredictiveDistribution p = exact_gp_predict(X, y, h, xs);
    Eigen::VectorXd mean, var;
    dense_exact(X.to_eigen(), y.to_eigen(), xs.to_eigen(), std::exp(0.3), std::exp(-0.2), 0.05,
                mean, var);
    for (int i = 0; i < 4; ++i) {
      CHECK(std::abs(p.mean[i] - mean(i)) <= 1e-10);
      CHECK(std::abs(p.variance[i] - var(i)) <= 1e-10);
    }
  }
  SUBCASE("probit is unsupported") {
    GpHyperparameters h = gaussian_hyper(1);
    h.likelihood.kind = LikelihoodKind::probit;
    CHECK_THROWS_AS(exact_gp_predict(X, Tensor::vector({1, -1, 1}), h, X), ConfigError);
    CHECK_THROWS_AS(exact_gp_logml(X, Tensor::vector({1, -1, 1}), h), ConfigError);
  }
}

TEST_CASE("exact_gp_logml: worked cases") {
  SUBCASE("single point") {
    GpHyperparameters h = gaussian_hyper(1, 0.0, 0.0, 1e-12);
    CHECK(exact_gp_logml(Tensor::matrix(1, 1, {0.3}), Tensor::vector({0.0}), h) ==
          doctest::Approx(-0.918939).epsilon(1e-6));
  }
  SUBCASE("N = 2 matches the dense formula") {
    GpHyperparameters h = gaussian_hyper(1, -0.4, 0.3, 0.2);
    const Tensor X = Tensor::matrix(2, 1, {0.1, 0.6});
    const Tensor y = Tensor::vector({0.8, -0.3});
    const Eigen::MatrixXd K = oracle::matern32_matrix(
        X.to_eigen(), X.to_eigen(), Eigen::VectorXd::Constant(1, std::exp(-0.4)), std::exp(0.3));
    CHECK(exact_gp_logml(X, y, h) == doctest::Approx(oracle::dense_logml(K, y.to_eigen(), 0.2)).epsilon(1e-12));
  }
  SUBCASE("with y = 0 the value decreases as the noise grows") {
    const Tensor X = Tensor::matrix(3, 1, {0.0, 0.5, 2.0});
    const Tensor y(Shape{3}, 0.0);
    double prev = INFINITY;
    for (double noise = 1e-3; noise < 100.0; noise *= 1.5) {
      const double v = exact_gp_logml(X, y, gaussian_hyper(1, 0.0, 0.0, noise));
      CHECK(v < prev);
      prev = v;
    }
  }
}

TEST_CASE("vsgp_elbo: prior state collapses to the prior marginals") {
  std::mt19937_64 rng(6);
  const Tensor X = oracle::random_tensor(rng, {12, 2});
  const Tensor y = sample_y(rng, X);
  const GpHyperparameters h = gaussian_hyper(2, 0.1, 0.2, 0.3);
  const Tensor Z = oracle::random_tensor(rng, {4, 2});
  const VariationalState s{Z, Tensor(Shape{4}, 0.0), prior_chol(h, Z)};
  const double elbo = vsgp_elbo(X, y, 12, s, h);
  const Tensor prior_var = kernel_diag(h.kernel, X);
  const Tensor e = expected_loglik(h.likelihood, Tensor(Shape{12}, 0.0), prior_var, y);
  double total = 0.0;
  for (double v : e.data()) total += v;
  CHECK(elbo == doctest::Approx(total).epsilon(1e-11));
  CHECK(vsgp_elbo(X, y, 12, s, h) == elbo);  // bitwise repeatable
  CHECK_THROWS_AS(vsgp_elbo(X, y, 5, s, h), ShapeError);
}

TEST_CASE("property: full-batch vsgp_elbo never exceeds exact_gp_logml") {
  std::mt19937_64 rng(10);
  const Tensor X = oracle::random_tensor(rng, {30, 2});
  const Tensor y = sample_y(rng, X);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = -INFINITY;
  for (int trial = 0; trial < 100; ++trial) {
    GpHyperparameters h = gaussian_hyper(2, 0.3 * n(rng), 0.3 * n(rng), std::exp(n(rng) - 1.0));
    h.kernel.log_lengthscale = Tensor::vector({0.3 * n(rng), 0.3 * n(rng)});
    const std::size_t M = 1 + trial % 8;
    const Tensor Z = oracle::random_tensor(rng, {M, 2});
    Eigen::MatrixXd l = 0.5 * Eigen::MatrixXd::Random(M, M);
    l = l.triangularView<Eigen::Lower>();
    l.diagonal() = l.diagonal().cwiseAbs().array() + 0.05;
    const VariationalState s{Z, oracle::random_tensor(rng, {M}), Tensor::from_eigen(l)};
    worst = std::max(worst, vsgp_elbo(X, y, 30, s, h) - exact_gp_logml(X, y, h));
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("vsgp: optimal q at Z = X reproduces the exact GP") {
  std::mt19937_64 rng(12);
  const Tensor X = oracle::random_tensor(rng, {30, 1}, 1.5);
  const Tensor y = sample_y(rng, X);
  const GpHyperparameters h = gaussian_hyper(1, 0.0, 0.0, 0.1);
  // With Z = X the optimal q(u) is the exact posterior of f at X:
  //   m = K (K + σ²I)⁻¹ y,  S = K - K (K + σ²I)⁻¹ K.
  const Eigen::MatrixXd K = kernel_matrix(h.kernel, X, X).to_eigen();
  const Eigen::MatrixXd C = K + 0.1 * Eigen::MatrixXd::Identity(30, 30);
  const Eigen::VectorXd m = K * C.ldlt().solve(y.to_eigen());
  Eigen::MatrixXd S = K - K * C.ldlt().solve(K);
  S = 0.5 * (S + S.transpose());
  const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(S).matrixL();
  const VariationalState s{X, Tensor::from_eigen(m), Tensor::from_eigen(L)};

  const Tensor xs = oracle::random_tensor(rng, {50, 1}, 1.5);
  const PredictiveDistribution sparse = vsgp_predict(s, h, xs);
  const PredictiveDistribution exact = exact_gp_predict(X, y, h, xs);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(std::abs(sparse.mean[i] - exact.mean[i]) <= 1e-6);
    CHECK(std::abs(sparse.variance[i] - exact.variance[i]) <= 1e-6);
  }
  CHECK(std::abs(vsgp_elbo(X, y, 30, s, h) - exact_gp_logml(X, y, h)) <= 1e-6);
}

TEST_CASE("vsgp_predict: prior state and the single inducing point case") {
  const GpHyperparameters h = gaussian_hyper(1, 0.2, 0.1);
  const Tensor xs = Tensor::matrix(3, 1, {-1.0, 0.3, 2.0});
  SUBCASE("prior") {
    const Tensor Z = Tensor::matrix(2, 1, {0.0, 1.0});
    const PredictiveDistribution p = vsgp_predict({Z, Tensor(Shape{2}, 0.0), prior_chol(h, Z)}, h, xs);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(std::abs(p.mean[i]) <= 1e-14);
      CHECK(std::abs(p.variance[i] - std::exp(0.2)) <= 1e-12);
    }
  }
  SUBCASE("M = 1 scalar formula") {
    const double z = 0.4, mu = 0.9, l = 0.35;
    const PredictiveDistribution p =
        vsgp_predict({Tensor::matrix(1, 1, {z}), Tensor::vector({mu}), Tensor::matrix(1, 1, {l})}, h, xs);
    const double kzz = std::exp(0.2);
    for (std::size_t i = 0; i < 3; ++i) {
      const double kxz = oracle::matern32(Eigen::VectorXd::Constant(1, xs[i]), Eigen::VectorXd::Constant(1, z),
                                          Eigen::VectorXd::Constant(1, std::exp(0.2)), std::exp(0.1));
      CHECK(p.mean[i] == doctest::Approx(kxz / kzz * mu).epsilon(1e-12));
      const double var = kzz + kxz * kxz / (kzz * kzz) * (l * l - kzz);
      // k(z,z) carries the r=0 clamp bias of about 1.5e-12·σ²
      CHECK(std::abs(p.variance[i] - var) <= 1e-11);
    }
  }
}

TEST_CASE("idsgp_elbo: constant network equals vsgp_elbo at the matching state") {
  std::mt19937_64 rng(14);
  const Tensor X = oracle::random_tensor(rng, {25, 2});
  const Tensor y = sample_y(rng, X);
  const GpHyperparameters h = gaussian_hyper(2, 0.2, -0.1, 0.2);
  const Tensor Z = oracle::random_tensor(rng, {3, 2});
  SUBCASE("prior state: per-point KL vanishes") {
    const VariationalState s{Z, Tensor(Shape{3}, 0.0), prior_chol(h, Z)};
    const double a = idsgp_elbo(X, y, 25, constant_net(2, s), h);
    CHECK(std::abs(a - vsgp_elbo(X, y, 25, s, h)) <= 1e-9);
  }
  SUBCASE("general state") {
    Eigen::MatrixXd l(3, 3);
    l << 0.8, 0, 0, 0.1, 0.5, 0, -0.2, 0.3, 0.9;
    const VariationalState s{Z, Tensor::vector({0.3, -0.6, 0.2}), Tensor::from_eigen(l)};
    const double a = idsgp_elbo(X, y, 25, constant_net(2, s), h);
    CHECK(std::abs(a - vsgp_elbo(X, y, 25, s, h)) <= 1e-9);
  }
}

TEST_CASE("idsgp_elbo: a single-point batch is N·E1 - KL1") {
  std::mt19937_64 rng(15);
  const AmortNet net = random_net(rng, 2, 3, {6});
  const GpHyperparameters h = gaussian_hyper(2, 0.3, 0.0, 0.2);
  const Tensor x = Tensor::matrix(1, 2, {0.4, -0.1});
  const Tensor y = Tensor::vector({0.7});
  const VariationalState s = amort_forward(net, x);
  const PredictiveDistribution q = vsgp_predict(s, h, x);
  const double e1 = expected_loglik(h.likelihood, q.mean, q.variance, y)[0];
  const double kl1 = gauss_kl(s.m, s.L, chol_jitter(kernel_matrix(h.kernel, s.Z, s.Z)));
  CHECK(idsgp_elbo(x, y, 40, net, h) == doctest::Approx(40.0 * e1 - kl1).epsilon(1e-10));
}

TEST_CASE("idsgp_predict: prior recovery and determinism") {
  std::mt19937_64 rng(16);
  const GpHyperparameters h = gaussian_hyper(2, 0.1, 0.3);
  const Tensor Z = oracle::random_tensor(rng, {3, 2});
  const AmortNet net = constant_net(2, {Z, Tensor(Shape{3}, 0.0), prior_chol(h, Z)});
  const Tensor xs = oracle::random_tensor(rng, {40, 2}, 2.0);
  const PredictiveDistribution p = idsgp_predict(net, h, xs);
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(std::abs(p.mean[i]) <= 1e-12);
    CHECK(std::abs(p.variance[i] - std::exp(0.6)) <= 1e-10);
  }
  const AmortNet rnd = random_net(rng, 2, 3, {5});
  const PredictiveDistribution twin = idsgp_predict(rnd, h, Tensor::matrix(2, 2, {0.3, 0.1, 0.3, 0.1}));
  CHECK(twin.mean[0] == twin.mean[1]);
  CHECK(twin.variance[0] == twin.variance[1]);
}

TEST_CASE("property: prior consistency for inducing points from random networks") {
  std::mt19937_64 rng(18);
  double worst_mean = 0.0, worst_var = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const AmortNet net = random_net(rng, 2, 4, {7}, 1.0);
    const GpHyperparameters h = gaussian_hyper(2, 0.2 * trial / 50.0, 0.1);
    const Tensor x = oracle::random_tensor(rng, {1, 2});
    const Tensor Z = amort_forward(net, x).Z;
    const PredictiveDistribution p = vsgp_predict({Z, Tensor(Shape{4}, 0.0), prior_chol(h, Z)}, h, x);
    worst_mean = std::max(worst_mean, std::abs(p.mean[0]));
    worst_var = std::max(worst_var, std::abs(p.variance[0] - std::exp(0.2)));
  }
  CHECK(worst_mean <= 1e-10);
  CHECK(worst_var <= 1e-10);
}

TEST_CASE("property: raw predictive variances stay above -1e-10") {
  std::mt19937_64 rng(19);
  double lowest = INFINITY;
  for (int trial = 0; trial < 30; ++trial) {
    const AmortNet net = random_net(rng, 2, 3, {6}, 0.5);
    const GpHyperparameters h = gaussian_hyper(2, 0.1, 0.0);
    const PredictiveDistribution p = idsgp_predict(net, h, oracle::random_tensor(rng, {50, 2}, 2.0));
    lowest = std::min(lowest, p.min_raw_variance);
    CHECK(p.clamped == 0);
  }
  CHECK(lowest >= -1e-10);
}

namespace {

oracle::GradCheck model_gradient_check(const Model& model, const Tensor& X, const Tensor& y,
                                       std::size_t n_total) {
  oracle::ParamMap at;
  for (const auto& [name, t] : model.params.entries())
    if (!model.frozen.count(name)) at.emplace(name, t);
  auto eval = [&](const oracle::ParamMap& p, oracle::ParamMap* grads) {
    Model m = model;
    for (const auto& [name, t] : p) m.params.set(name, t);
    ad::Tape tape;
    auto vars = m.params.bind(tape, m.frozen);
    ad::Var out = model_objective(m, vars, X, y, n_total);
    if (grads) *grads = tape.backward(out).by_name();
    return out.value().item();
  };
  oracle::ParamMap analytic;
  eval(at, &analytic);
  auto fd = oracle::finite_difference([&](const oracle::ParamMap& p) { return eval(p, nullptr); }, at);
  return oracle::compare(analytic, fd);
}

Model perturbed(Model m, std::mt19937_64& rng, double sd) {
  for (const auto& [name, t] : m.params.entries()) {
    if (m.frozen.count(name)) continue;
    Tensor v = t;
    Tensor noise = oracle::random_tensor(rng, v.shape(), sd);
    v += noise;
    m.params.set(name, v);
  }
  return m;
}

}  // namespace

TEST_CASE("property: end-to-end gradients match finite differences") {
  std::mt19937_64 rng(21);
  const Tensor X = oracle::random_tensor(rng, {20, 2});
  const Tensor y = sample_y(rng, X);
  Tensor labels(Shape{20});
  for (std::size_t i = 0; i < 20; ++i) labels[i] = y[i] > 0 ? 1.0 : -1.0;
  for (ModelKind kind : {ModelKind::idsgp, ModelKind::vsgp, ModelKind::exact}) {
    for (LikelihoodKind lik : {LikelihoodKind::gaussian, LikelihoodKind::probit}) {
      if (kind == ModelKind::exact && lik == LikelihoodKind::probit) continue;
      ModelSpec spec;
      spec.kind = kind;
      spec.likelihood = lik;
      spec.input_dim = 2;
      spec.num_inducing = 3;
      spec.hidden = {8};
      spec.ard = true;
      const Tensor& targets = lik == LikelihoodKind::probit ? labels : y;
      const Model m = perturbed(init_model(spec, X, targets, 3), rng, 0.1);
      // batch of 7 from N = 20
      Tensor xb(Shape{7, 2}, std::vector<double>(X.data().begin(), X.data().begin() + 14));
      Tensor yb(Shape{7}, std::vector<double>(targets.data().begin(), targets.data().begin() + 7));
      const auto r = model_gradient_check(m, xb, yb, 20);
      INFO(to_string(kind), "/", to_string(lik), " worst ", r.worst, " over ", r.checked);
      CHECK(r.max_rel_err <= 1e-4);
    }
  }
}

TEST_CASE("init_model: the initial IDSGP and VSGP are the prior") {
  std::mt19937_64 rng(22);
  const Tensor X = oracle::random_tensor(rng, {60, 2});
  const Tensor y = sample_y(rng, X);
  for (ModelKind kind : {ModelKind::idsgp, ModelKind::vsgp}) {
    ModelSpec spec;
    spec.kind = kind;
    spec.input_dim = 2;
    spec.num_inducing = 5;
    spec.ard = true;
    const Model m = init_model(spec, X, y, 9);
    const PredictiveDistribution p = predict(m, oracle::random_tensor(rng, {100, 2}, 1.5));
    const double prior = std::exp(2.0 * m.hyper().kernel.log_amplitude);
    for (std::size_t i = 0; i < 100; ++i) {
      CHECK(std::abs(p.mean[i]) <= 1e-8);
      CHECK(std::abs(p.variance[i] - prior) <= 1e-8);
    }
    const Model again = init_model(spec, X, y, 9);
    CHECK(again.params == m.params);
  }
}

TEST_CASE("init_model: VSGP inducing inputs are distinct training rows") {
  std::mt19937_64 rng(24);
  const Tensor X = oracle::random_tensor(rng, {15, 1});
  const Tensor y = sample_y(rng, X);
  ModelSpec spec;
  spec.kind = ModelKind::vsgp;
  spec.num_inducing = 6;
  const Model m = init_model(spec, X, y, 1);
  const Tensor& Z = m.params.at("vsgp.Z");
  for (std::size_t i = 0; i < 6; ++i) {
    int hits = 0;
    for (std::size_t j = 0; j < 15; ++j) hits += Z[i] == X[j];
    CHECK(hits == 1);
    for (std::size_t k = 0; k < i; ++k) CHECK(Z[i] != Z[k]);
  }
  spec.num_inducing = 15;
  spec.freeze_inducing = true;
  const Model all = init_model(spec, X, y, 1);
  CHECK(all.params.at("vsgp.Z") == X);
  CHECK(all.frozen.count("vsgp.Z") == 1);
  spec.num_inducing = 16;
  CHECK_THROWS_AS(init_model(spec, X, y, 1), ConfigError);
}
