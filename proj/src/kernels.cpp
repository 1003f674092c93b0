#include "idsgp/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "idsgp/errors.hpp"

namespace idsgp {

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::matern32: return "matern32";
    case KernelKind::rbf: return "rbf";
  }
  return "unknown";
}

KernelKind parse_kernel_kind(const std::string& text) {
  if (text == "matern32") return KernelKind::matern32;
  if (text == "rbf") return KernelKind::rbf;
  throw ConfigError("model.kernel", "unknown kernel '" + text + "' (expected matern32 or rbf)");
}

KernelVars bind(ad::Tape& tape, const KernelParams& params, bool trainable,
                const std::string& prefix) {
  KernelVars k;
  k.kind = params.kind;
  if (trainable) {
    k.log_lengthscale = tape.parameter(prefix + "log_lengthscale", params.log_lengthscale);
    k.log_amplitude = tape.parameter(prefix + "log_amplitude", Tensor::scalar(params.log_amplitude));
  } else {
    k.log_lengthscale = tape.constant(params.log_lengthscale);
    k.log_amplitude = tape.constant(Tensor::scalar(params.log_amplitude));
  }
  return k;
}

namespace {

// Divides every row of x (any rank, last axis d) by the lengthscale(s).
ad::Var scale_inputs(const KernelVars& k, ad::Var x) {
  ad::Tape& tape = *x.tape();
  ad::Var inv = ad::exp(ad::neg(k.log_lengthscale));
  const std::size_t d = x.shape().back();
  const std::size_t nl = k.log_lengthscale.value().numel();
  if (nl == 1) return ad::smul(inv, x);
  if (nl != d) {
    throw ShapeError("kernel: " + std::to_string(nl) + " lengthscales for inputs of dimension " +
                     std::to_string(d));
  }
  const std::size_t rows = x.value().numel() / d;
  ad::Var flat = ad::reshape(x, {rows, d});
  ad::Var spread = ad::matmul(tape.constant(Tensor(Shape{rows, 1}, 1.0)), ad::reshape(inv, {1, d}));
  return ad::reshape(ad::mul(flat, spread), x.shape());
}

}  // namespace

ad::Var kernel_matrix(const KernelVars& k, ad::Var a, ad::Var b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  const bool batched = sa.size() == 3;
  const bool ok = (sa.size() == 2 && sb.size() == 2 && sa[1] == sb[1]) ||
                  (sa.size() == 3 && sb.size() == 3 && sa[0] == sb[0] && sa[2] == sb[2]);
  if (!ok) {
    throw ShapeError("kernel_matrix: input shapes " + to_string(sa) + " and " + to_string(sb) +
                     " do not share a dimension");
  }
  ad::Tape& tape = *a.tape();
  const std::size_t batch = batched ? sa[0] : 1;
  const std::size_t n = batched ? sa[1] : sa[0];
  const std::size_t m = batched ? sb[1] : sb[0];
  const std::size_t d = sa.back();
  ad::Var as = ad::reshape(scale_inputs(k, a), {batch, n, d});
  ad::Var bs = ad::reshape(scale_inputs(k, b), {batch, m, d});

  // Squared distances |a|² + |b|² - 2 a·b, broadcast through ones-matmuls.
  ad::Var sqa = ad::reshape(ad::sum_last(ad::mul(as, as)), {batch, n, 1});
  ad::Var sqb = ad::reshape(ad::sum_last(ad::mul(bs, bs)), {batch, 1, m});
  ad::Var rows = ad::matmul(sqa, tape.constant(Tensor(Shape{batch, 1, m}, 1.0)));
  ad::Var cols = ad::matmul(tape.constant(Tensor(Shape{batch, n, 1}, 1.0)), sqb);
  ad::Var cross = ad::matmul(as, ad::transpose(bs));
  ad::Var d2 = ad::sub(ad::add(rows, cols), ad::scale(cross, 2.0));

  ad::Var shape;
  if (k.kind == KernelKind::matern32) {
    // r is clamped away from 0 so sqrt stays differentiable on the diagonal.
    ad::Var s = ad::scale(ad::sqrt(ad::clamp_min(d2, 1e-12)), std::sqrt(3.0));
    shape = ad::mul(ad::add_scalar(s, 1.0), ad::exp(ad::neg(s)));
  } else {
    shape = ad::exp(ad::scale(ad::clamp_min(d2, 0.0), -0.5));
  }
  ad::Var out = ad::smul(ad::exp(ad::scale(k.log_amplitude, 2.0)), shape);
  return batched ? out : ad::reshape(out, {n, m});
}

ad::Var kernel_diag(const KernelVars& k, std::size_t n) {
  ad::Tape& tape = *k.log_amplitude.tape();
  return ad::smul(ad::exp(ad::scale(k.log_amplitude, 2.0)), tape.constant(Tensor(Shape{n}, 1.0)));
}

Tensor kernel_matrix(const KernelParams& params, const Tensor& a, const Tensor& b) {
  if (a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1)) {
    // Same operations in the same order as the tape version, so results agree bitwise.
    using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Index n = Eigen::Index(a.dim(0)), m = Eigen::Index(b.dim(0)), d = Eigen::Index(a.dim(1));
    const std::size_t nl = params.log_lengthscale.numel();
    if (nl != 1 && nl != std::size_t(d)) {
      throw ShapeError("kernel: " + std::to_string(nl) + " lengthscales for inputs of dimension " +
                       std::to_string(d));
    }
    Eigen::RowVectorXd inv(d);
    for (Eigen::Index c = 0; c < d; ++c) inv[c] = std::exp(-params.log_lengthscale[nl == 1 ? 0 : std::size_t(c)]);
    const RowMatrix as = Eigen::Map<const RowMatrix>(a.data().data(), n, d).array().rowwise() * inv.array();
    const RowMatrix bst = (Eigen::Map<const RowMatrix>(b.data().data(), m, d).array().rowwise() * inv.array())
                              .matrix()
                              .transpose();
    Tensor cross_t(Shape{a.dim(0), b.dim(0)});
    Eigen::Map<RowMatrix> cross(cross_t.data().data(), n, m);
    cross.noalias() = Eigen::Map<const RowMatrix>(as.data(), n, d) * Eigen::Map<const RowMatrix>(bst.data(), d, m);
    auto sq = [](const double* row, Eigen::Index len, Eigen::Index stride) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < len; ++j) acc += row[j * stride] * row[j * stride];
      return acc;
    };
    RowMatrix d2(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sa = sq(as.data() + i * d, d, 1);
      for (Eigen::Index j = 0; j < m; ++j) d2(i, j) = (sa + sq(bst.data() + j, d, m)) - cross(i, j) * 2.0;
    }
    const double amp = std::exp(2.0 * params.log_amplitude);
    Tensor out(Shape{a.dim(0), b.dim(0)});
    Eigen::Map<RowMatrix> k(out.data().data(), n, m);
    if (params.kind == KernelKind::matern32) {
      const Eigen::ArrayXXd r = d2.array().max(1e-12).sqrt() * std::sqrt(3.0);
      k = amp * ((r + 1.0) * (-r).exp());
    } else {
      k = amp * (-0.5 * d2.array().max(0.0)).exp();
    }
    return out;
  }
  ad::Tape tape;
  KernelVars k = bind(tape, params, false);
  return kernel_matrix(k, tape.constant(a), tape.constant(b)).value();
}

Tensor kernel_diag(const KernelParams& params, const Tensor& a) {
  const double v = std::exp(2.0 * params.log_amplitude);
  return Tensor(Shape{a.rank() == 0 ? 1 : a.dim(0)}, v);
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(mid), v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + std::ptrdiff_t(mid));
  return 0.5 * (lo + hi);
}

}  // namespace

KernelParams init_kernel_params(KernelKind kind, const Tensor& x, bool ard, double target_std) {
  if (x.rank() != 2) throw ShapeError("init_kernel_params: expected N×d inputs");
  const std::size_t n = x.dim(0);
  const std::size_t d = x.dim(1);
  // Evenly strided subsample of at most 1000 rows.
  const std::size_t take = std::min<std::size_t>(n, 1000);
  std::vector<std::size_t> idx(take);
  for (std::size_t i = 0; i < take; ++i) idx[i] = i * n / std::max<std::size_t>(take, 1);

  KernelParams p;
  p.kind = kind;
  p.log_amplitude = target_std > 0.0 ? std::log(target_std) : 0.0;
  auto safe_log = [](double v) { return v > 0.0 && std::isfinite(v) ? std::log(v) : 0.0; };
  if (ard) {
    std::vector<double> ls(d);
    std::vector<double> dist;
    dist.reserve(take * (take - 1) / 2);
    for (std::size_t c = 0; c < d; ++c) {
      dist.clear();
      for (std::size_t i = 0; i < take; ++i)
        for (std::size_t j = i + 1; j < take; ++j) dist.push_back(std::abs(x(idx[i], c) - x(idx[j], c)));
      ls[c] = safe_log(median(dist));
    }
    p.log_lengthscale = Tensor::vector(ls);
  } else {
    std::vector<double> dist;
    for (std::size_t i = 0; i < take; ++i) {
      for (std::size_t j = i + 1; j < take; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double diff = x(idx[i], c) - x(idx[j], c);
          s += diff * diff;
        }
        dist.push_back(std::sqrt(s));
      }
    }
    p.log_lengthscale = Tensor::vector({safe_log(median(dist))});
  }
  return p;
}

}  // namespace idsgp
