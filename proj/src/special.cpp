#include "idsgp/special.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace idsgp {

namespace {

constexpr double kTailBranch = -6.0;

// Mills ratio R(t) = (1 - Φ(t)) / φ(t) for t ≥ 6, by backward evaluation of
// R(t) = 1/(t + 1/(t + 2/(t + 3/(t + ...)))).
double mills_ratio(double t) {
  double tail = t;
  for (int k = 80; k >= 1; --k) tail = t + k / tail;
  return 1.0 / tail;
}

}  // namespace

double ndtr(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double log_ndtr(double x) {
  if (x > 0.0) return std::log1p(-0.5 * std::erfc(x / std::sqrt(2.0)));
  if (x > kTailBranch) return std::log(0.5 * std::erfc(-x / std::sqrt(2.0)));
  return -0.5 * x * x - kLogSqrt2Pi + std::log(mills_ratio(-x));
}

double dlog_ndtr(double x) {
  if (x > kTailBranch) return std::exp(-0.5 * x * x - kLogSqrt2Pi - log_ndtr(x));
  return 1.0 / mills_ratio(-x);
}

namespace {

GaussHermite compute_gauss_hermite(std::size_t q) {
  // Jacobi matrix of the physicists' Hermite recurrence.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(Eigen::Index(q), Eigen::Index(q));
  for (std::size_t i = 1; i < q; ++i) {
    const double b = std::sqrt(double(i) / 2.0);
    jacobi(Eigen::Index(i), Eigen::Index(i - 1)) = b;
    jacobi(Eigen::Index(i - 1), Eigen::Index(i)) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  GaussHermite rule;
  rule.nodes.resize(q);
  rule.weights.resize(q);
  const double sqrt_pi = std::sqrt(std::acos(-1.0));
  for (std::size_t i = 0; i < q; ++i) {
    rule.nodes[i] = eig.eigenvalues()(Eigen::Index(i));
    const double v0 = eig.eigenvectors()(0, Eigen::Index(i));
    rule.weights[i] = sqrt_pi * v0 * v0;
  }
  // Symmetrize so that the rule is exactly even in t.
  for (std::size_t i = 0; i < q / 2; ++i) {
    const std::size_t j = q - 1 - i;
    const double t = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -t;
    rule.nodes[j] = t;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (q % 2 == 1) rule.nodes[q / 2] = 0.0;
  return rule;
}

}  // namespace

GaussHermite gauss_hermite(std::size_t q) {
  if (q == 0) throw std::invalid_argument("gauss_hermite: need at least one node");
  // Rules are requested once per training step; keep them per thread.
  thread_local std::map<std::size_t, GaussHermite> cache;
  auto it = cache.find(q);
  if (it == cache.end()) it = cache.emplace(q, compute_gauss_hermite(q)).first;
  return it->second;
}

}  // namespace idsgp
