#include "idsgp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "idsgp/errors.hpp"
#include "idsgp/special.hpp"

namespace idsgp::ad {

const Tensor& Var::value() const {
  if (!tape_) throw std::logic_error("Var: not bound to a tape");
  return tape_->value(id_);
}

const Tensor& Gradients::operator[](Var leaf) const {
  auto it = by_id_.find(leaf.id());
  if (it == by_id_.end()) throw std::out_of_range("Gradients: variable is not a parameter");
  return it->second;
}

const Tensor& Gradients::at(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::out_of_range("Gradients: unknown parameter " + name);
  return it->second;
}

Var Tape::parameter(std::string name, Tensor value) {
  if (!value.all_finite()) throw NumericError("parameter " + name + " is not finite");
  const std::size_t id = nodes_.size();
  nodes_.push_back(Node{std::move(value), {}, {}, true, 0.0});
  parameters_.emplace_back(id, std::move(name));
  return Var(this, id);
}

Var Tape::constant(Tensor value) {
  const std::size_t id = nodes_.size();
  nodes_.push_back(Node{std::move(value), {}, {}, false, 0.0});
  return Var(this, id);
}

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> parents,
                 Backward backward, double aux) {
  if (!value.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite output (numeric overflow)");
  }
  Node node{std::move(value), {}, {}, false, aux};
  node.parents.reserve(parents.size());
  for (const Var& p : parents) {
    if (p.tape() != this) throw std::invalid_argument(std::string(op) + ": operand from another tape");
    node.parents.push_back(p.id());
    node.needs_grad = node.needs_grad || nodes_[p.id()].needs_grad;
  }
  if (node.needs_grad) node.backward = std::move(backward);
  const std::size_t id = nodes_.size();
  nodes_.push_back(std::move(node));
  return Var(this, id);
}

Gradients Tape::backward(Var output) const {
  if (output.tape() != this) throw std::invalid_argument("backward: output is not on this tape");
  const Tensor& out = nodes_.at(output.id()).value;
  if (out.numel() != 1) {
    throw ShapeError("backward: output must be scalar, got shape " + to_string(out.shape()));
  }
  std::vector<Tensor> grads(output.id() + 1);
  std::vector<char> has(output.id() + 1, 0);
  grads[output.id()] = Tensor(out.shape(), 1.0);
  has[output.id()] = 1;

  std::vector<Tensor*> ptrs;
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!has[i] || !node.backward) continue;
    ptrs.assign(node.parents.size(), nullptr);
    for (std::size_t k = 0; k < node.parents.size(); ++k) {
      const std::size_t p = node.parents[k];
      if (!nodes_[p].needs_grad) continue;
      if (!has[p]) {
        grads[p] = Tensor(nodes_[p].value.shape(), 0.0);
        has[p] = 1;
      }
      ptrs[k] = &grads[p];
    }
    node.backward(grads[i], ptrs);
  }

  Gradients result;
  for (const auto& [id, name] : parameters_) {
    Tensor g = (id < has.size() && has[id]) ? grads[id] : Tensor(nodes_[id].value.shape(), 0.0);
    result.by_id_.emplace(id, g);
    result.by_name_.emplace(name, std::move(g));
  }
  return result;
}

namespace {

void require_same_shape(std::string_view op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()) + " differ");
  }
}

void require_scalar(std::string_view op, const Var& s) {
  if (s.value().numel() != 1) {
    throw ShapeError(std::string(op) + ": expected a single-element operand, got " +
                     to_string(s.shape()));
  }
}

template <class F, class DF>
Var unary(std::string_view op, Var a, F f, DF df) {
  Tape& tape = *a.tape();
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = f(x[i]);
  const std::size_t self = tape.size();
  return tape.record(op, std::move(y), {a},
                     [a, self, df, &tape](const Tensor& g, std::span<Tensor* const> p) {
                       const Tensor& x = a.value();
                       const Tensor& y = tape.value(self);
                       Tensor& ga = *p[0];
                       for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * df(x[i], y[i]);
                     });
}

// Batch-of-matrices view helpers. Rank 2 is a batch of one.
struct MatDims {
  std::size_t batch, rows, cols;
};

MatDims mat_dims(std::string_view op, const Tensor& t) {
  if (t.rank() == 2) return {1, t.dim(0), t.dim(1)};
  if (t.rank() == 3) return {t.dim(0), t.dim(1), t.dim(2)};
  throw ShapeError(std::string(op) + ": expected rank 2 or 3, got " + to_string(t.shape()));
}

MatrixMap mat(Tensor& t, const MatDims& d, std::size_t b) {
  return {t.data().data() + b * d.rows * d.cols, Eigen::Index(d.rows), Eigen::Index(d.cols)};
}

ConstMatrixMap mat(const Tensor& t, const MatDims& d, std::size_t b) {
  return {t.data().data() + b * d.rows * d.cols, Eigen::Index(d.rows), Eigen::Index(d.cols)};
}

Shape batched_shape(const Tensor& like, std::size_t rows, std::size_t cols) {
  if (like.rank() == 2) return {rows, cols};
  return {like.dim(0), rows, cols};
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor y = a.value();
  y += b.value();
  return a.tape()->record("add", std::move(y), {a, b},
                          [](const Tensor& g, std::span<Tensor* const> p) {
                            if (p[0]) *p[0] += g;
                            if (p[1]) *p[1] += g;
                          });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] -= bv[i];
  return a.tape()->record("sub", std::move(y), {a, b},
                          [](const Tensor& g, std::span<Tensor* const> p) {
                            if (p[0]) *p[0] += g;
                            if (p[1]) {
                              for (std::size_t i = 0; i < g.numel(); ++i) (*p[1])[i] -= g[i];
                            }
                          });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= bv[i];
  return a.tape()->record("mul", std::move(y), {a, b},
                          [a, b](const Tensor& g, std::span<Tensor* const> p) {
                            const Tensor& av = a.value();
                            const Tensor& bv = b.value();
                            if (p[0]) {
                              for (std::size_t i = 0; i < g.numel(); ++i) (*p[0])[i] += g[i] * bv[i];
                            }
                            if (p[1]) {
                              for (std::size_t i = 0; i < g.numel(); ++i) (*p[1])[i] += g[i] * av[i];
                            }
                          });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double c) {
  Tensor y = a.value();
  for (double& v : y.data()) v *= c;
  return a.tape()->record("scale", std::move(y), {a},
                          [c](const Tensor& g, std::span<Tensor* const> p) {
                            for (std::size_t i = 0; i < g.numel(); ++i) (*p[0])[i] += c * g[i];
                          });
}

Var add_scalar(Var a, double c) {
  Tensor y = a.value();
  for (double& v : y.data()) v += c;
  return a.tape()->record("add_scalar", std::move(y), {a},
                          [](const Tensor& g, std::span<Tensor* const> p) { *p[0] += g; });
}

Var smul(Var s, Var a) {
  require_scalar("smul", s);
  const double c = s.value()[0];
  Tensor y = a.value();
  for (double& v : y.data()) v *= c;
  return a.tape()->record("smul", std::move(y), {s, a},
                          [s, a](const Tensor& g, std::span<Tensor* const> p) {
                            const Tensor& av = a.value();
                            if (p[0]) {
                              double acc = 0.0;
                              for (std::size_t i = 0; i < g.numel(); ++i) acc += g[i] * av[i];
                              (*p[0])[0] += acc;
                            }
                            if (p[1]) {
                              const double c = s.value()[0];
                              for (std::size_t i = 0; i < g.numel(); ++i) (*p[1])[i] += c * g[i];
                            }
                          });
}

Var sadd(Var s, Var a) {
  require_scalar("sadd", s);
  const double c = s.value()[0];
  Tensor y = a.value();
  for (double& v : y.data()) v += c;
  return a.tape()->record("sadd", std::move(y), {s, a},
                          [](const Tensor& g, std::span<Tensor* const> p) {
                            if (p[0]) {
                              double acc = 0.0;
                              for (double v : g.data()) acc += v;
                              (*p[0])[0] += acc;
                            }
                            if (p[1]) *p[1] += g;
                          });
}

Var exp(Var a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var softplus(Var a) {
  return unary(
      "softplus", a,
      [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      });
}

Var tanh(Var a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sqrt(Var a) {
  return unary(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Var clamp_min(Var a, double lo) {
  return unary(
      "clamp_min", a, [lo](double x) { return x > lo ? x : lo; },
      [lo](double x, double) { return x > lo ? 1.0 : 0.0; });
}

Var log_ndtr(Var a) {
  return unary(
      "log_ndtr", a, [](double x) { return idsgp::log_ndtr(x); },
      [](double x, double) { return idsgp::dlog_ndtr(x); });
}

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const MatDims da = mat_dims("matmul", av);
  const MatDims db = mat_dims("matmul", bv);
  if (av.rank() != bv.rank() || da.batch != db.batch || da.cols != db.rows) {
    throw ShapeError("matmul: shapes " + to_string(av.shape()) + " and " +
                     to_string(bv.shape()) + " are incompatible");
  }
  Tensor y(batched_shape(av, da.rows, db.cols));
  const MatDims dy{da.batch, da.rows, db.cols};
  for (std::size_t k = 0; k < da.batch; ++k) mat(y, dy, k).noalias() = mat(av, da, k) * mat(bv, db, k);
  return a.tape()->record(
      "matmul", std::move(y), {a, b},
      [a, b, da, db, dy](const Tensor& g, std::span<Tensor* const> p) {
        const Tensor& av = a.value();
        const Tensor& bv = b.value();
        for (std::size_t k = 0; k < da.batch; ++k) {
          auto gk = mat(g, dy, k);
          if (p[0]) mat(*p[0], da, k).noalias() += gk * mat(bv, db, k).transpose();
          if (p[1]) mat(*p[1], db, k).noalias() += mat(av, da, k).transpose() * gk;
        }
      });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  const MatDims d = mat_dims("transpose", av);
  const MatDims dt{d.batch, d.cols, d.rows};
  Tensor y(batched_shape(av, d.cols, d.rows));
  for (std::size_t k = 0; k < d.batch; ++k) mat(y, dt, k) = mat(av, d, k).transpose();
  return a.tape()->record("transpose", std::move(y), {a},
                          [d, dt](const Tensor& g, std::span<Tensor* const> p) {
                            for (std::size_t k = 0; k < d.batch; ++k) {
                              mat(*p[0], d, k) += mat(g, dt, k).transpose();
                            }
                          });
}

Var reshape(Var a, Shape shape) {
  const Tensor& av = a.value();
  if (shape_numel(shape) != av.numel()) {
    throw ShapeError("reshape: cannot view " + to_string(av.shape()) + " as " + to_string(shape));
  }
  return a.tape()->record("reshape", av.reshaped(std::move(shape)), {a},
                          [](const Tensor& g, std::span<Tensor* const> p) {
                            for (std::size_t i = 0; i < g.numel(); ++i) (*p[0])[i] += g[i];
                          });
}

Var slice_last(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  if (av.rank() == 0 || begin > end || end > av.shape().back()) {
    throw ShapeError("slice_last: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for shape " + to_string(av.shape()));
  }
  const std::size_t width = av.shape().back();
  const std::size_t outer = av.numel() / std::max<std::size_t>(width, 1);
  const std::size_t w = end - begin;
  Shape shape = av.shape();
  shape.back() = w;
  Tensor y(shape);
  for (std::size_t r = 0; r < outer; ++r) {
    for (std::size_t j = 0; j < w; ++j) y[r * w + j] = av[r * width + begin + j];
  }
  return a.tape()->record("slice_last", std::move(y), {a},
                          [outer, width, begin, w](const Tensor& g, std::span<Tensor* const> p) {
                            for (std::size_t r = 0; r < outer; ++r) {
                              for (std::size_t j = 0; j < w; ++j) {
                                (*p[0])[r * width + begin + j] += g[r * w + j];
                              }
                            }
                          });
}

Var concat_last(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_last: no operands");
  Shape lead = parts.front().shape();
  if (lead.empty()) throw ShapeError("concat_last: scalar operand");
  lead.pop_back();
  for (const Var& v : parts) {
    Shape s = v.shape();
    if (s.empty()) throw ShapeError("concat_last: scalar operand");
    s.pop_back();
    if (s != lead) {
      throw ShapeError("concat_last: leading shape " + to_string(s) + " differs from " +
                       to_string(lead));
    }
  }
  const std::size_t outer = shape_numel(lead);
  // Folded pairwise: one two-parent node per additional operand.
  Tape& tape = *parts.front().tape();
  Var acc = parts.front();
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const std::size_t wa = acc.shape().back();
    const std::size_t wb = parts[k].shape().back();
    const std::size_t wt = wa + wb;
    const Tensor& av = acc.value();
    const Tensor& bv = parts[k].value();
    Shape s = lead;
    s.push_back(wt);
    Tensor out(s);
    for (std::size_t r = 0; r < outer; ++r) {
      for (std::size_t j = 0; j < wa; ++j) out[r * wt + j] = av[r * wa + j];
      for (std::size_t j = 0; j < wb; ++j) out[r * wt + wa + j] = bv[r * wb + j];
    }
    acc = tape.record("concat_last", std::move(out), {acc, parts[k]},
                      [outer, wa, wb, wt](const Tensor& g, std::span<Tensor* const> p) {
                        for (std::size_t r = 0; r < outer; ++r) {
                          if (p[0]) {
                            for (std::size_t j = 0; j < wa; ++j) (*p[0])[r * wa + j] += g[r * wt + j];
                          }
                          if (p[1]) {
                            for (std::size_t j = 0; j < wb; ++j) (*p[1])[r * wb + j] += g[r * wt + wa + j];
                          }
                        }
                      });
  }
  return acc;
}

Var gather_last(Var a, const std::vector<long>& index) {
  const Tensor& av = a.value();
  if (av.rank() == 0) throw ShapeError("gather_last: scalar operand");
  const std::size_t width = av.shape().back();
  for (long i : index) {
    if (i >= long(width)) {
      throw ShapeError("gather_last: index " + std::to_string(i) + " out of range for shape " +
                       to_string(av.shape()));
    }
  }
  const std::size_t outer = av.numel() / std::max<std::size_t>(width, 1);
  const std::size_t w = index.size();
  Shape shape = av.shape();
  shape.back() = w;
  Tensor y(shape);
  for (std::size_t r = 0; r < outer; ++r) {
    for (std::size_t j = 0; j < w; ++j) {
      if (index[j] >= 0) y[r * w + j] = av[r * width + std::size_t(index[j])];
    }
  }
  return a.tape()->record("gather_last", std::move(y), {a},
                          [outer, width, w, index](const Tensor& g, std::span<Tensor* const> p) {
                            for (std::size_t r = 0; r < outer; ++r) {
                              for (std::size_t j = 0; j < w; ++j) {
                                if (index[j] >= 0) (*p[0])[r * width + std::size_t(index[j])] += g[r * w + j];
                              }
                            }
                          });
}

Var sum(Var a) {
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  return a.tape()->record("sum", Tensor::scalar(acc), {a},
                          [](const Tensor& g, std::span<Tensor* const> p) {
                            const double gv = g[0];
                            for (double& v : p[0]->data()) v += gv;
                          });
}

Var sum_last(Var a) {
  const Tensor& av = a.value();
  if (av.rank() == 0) throw ShapeError("sum_last: scalar operand");
  const std::size_t width = av.shape().back();
  Shape shape = av.shape();
  shape.pop_back();
  Tensor y(shape);
  const std::size_t outer = y.numel();
  for (std::size_t r = 0; r < outer; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < width; ++j) acc += av[r * width + j];
    y[r] = acc;
  }
  return a.tape()->record("sum_last", std::move(y), {a},
                          [outer, width](const Tensor& g, std::span<Tensor* const> p) {
                            for (std::size_t r = 0; r < outer; ++r) {
                              for (std::size_t j = 0; j < width; ++j) (*p[0])[r * width + j] += g[r];
                            }
                          });
}

Var cholesky(Var a, const JitterPolicy& policy) {
  const Tensor& av = a.value();
  const MatDims d = mat_dims("cholesky", av);
  if (d.rows != d.cols) throw ShapeError("cholesky: non-square operand " + to_string(av.shape()));
  Tensor y(av.shape());
  RowMatrix symmetric(d.rows, d.cols);
  double max_jitter = 0.0;
  for (std::size_t k = 0; k < d.batch; ++k) {
    auto ak = mat(av, d, k);
    symmetric = 0.5 * (ak + ak.transpose());
    ConstMatrixMap sym_map(symmetric.data(), symmetric.rows(), symmetric.cols());
    max_jitter = std::max(max_jitter, cholesky_jitter_inplace(sym_map, mat(y, d, k), policy));
  }
  Tape& tape = *a.tape();
  const std::size_t self = tape.size();
  return tape.record(
      "cholesky", std::move(y), {a},
      [d, self, &tape](const Tensor& g, std::span<Tensor* const> p) {
        const Tensor& lv = tape.value(self);
        RowMatrix phi(d.rows, d.cols);
        for (std::size_t k = 0; k < d.batch; ++k) {
          auto l = mat(lv, d, k);
          RowMatrix gbar = mat(g, d, k).triangularView<Eigen::Lower>();
          phi.noalias() = l.transpose() * gbar;
          phi.triangularView<Eigen::StrictlyUpper>().setZero();
          phi.diagonal() *= 0.5;
          RowMatrix s = 0.5 * (phi + phi.transpose());
          // L⁻ᵀ S L⁻¹, applied as two upper-triangular solves.
          l.transpose().triangularView<Eigen::Upper>().solveInPlace(s);
          RowMatrix st = s.transpose();
          l.transpose().triangularView<Eigen::Upper>().solveInPlace(st);
          mat(*p[0], d, k) += st.transpose();
        }
      },
      max_jitter);
}

Var trisolve(Var lower, Var rhs, bool transposed) {
  const Tensor& lv = lower.value();
  const Tensor& bv = rhs.value();
  const MatDims dl = mat_dims("trisolve", lv);
  const MatDims db = mat_dims("trisolve", bv);
  if (lv.rank() != bv.rank() || dl.batch != db.batch || dl.rows != dl.cols || dl.cols != db.rows) {
    throw ShapeError("trisolve: shapes " + to_string(lv.shape()) + " and " +
                     to_string(bv.shape()) + " are incompatible");
  }
  Tensor x = bv;
  for (std::size_t k = 0; k < dl.batch; ++k) {
    auto l = mat(lv, dl, k);
    auto xk = mat(x, db, k);
    if (transposed) {
      l.transpose().triangularView<Eigen::Upper>().solveInPlace(xk);
    } else {
      l.triangularView<Eigen::Lower>().solveInPlace(xk);
    }
  }
  Tape& tape = *lower.tape();
  const std::size_t self = tape.size();
  return tape.record(
      "trisolve", std::move(x), {lower, rhs},
      [lower, dl, db, self, transposed, &tape](const Tensor& g, std::span<Tensor* const> p) {
        const Tensor& lv = lower.value();
        const Tensor& xv = tape.value(self);
        RowMatrix bbar(db.rows, db.cols);
        for (std::size_t k = 0; k < dl.batch; ++k) {
          auto l = mat(lv, dl, k);
          auto xk = mat(xv, db, k);
          bbar = mat(g, db, k);
          if (transposed) {
            l.triangularView<Eigen::Lower>().solveInPlace(bbar);
          } else {
            l.transpose().triangularView<Eigen::Upper>().solveInPlace(bbar);
          }
          if (p[1]) mat(*p[1], db, k) += bbar;
          if (p[0]) {
            RowMatrix lbar = transposed ? RowMatrix(xk * bbar.transpose())
                                        : RowMatrix(bbar * xk.transpose());
            mat(*p[0], dl, k) -= RowMatrix(lbar.triangularView<Eigen::Lower>());
          }
        }
      });
}

}  // namespace idsgp::ad
