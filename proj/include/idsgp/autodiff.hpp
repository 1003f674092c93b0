#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "idsgp/linalg.hpp"
#include "idsgp/tensor.hpp"

// Tape-based reverse-mode differentiation over dense double tensors.
//
// A Tape records every primitive as a node holding its value and a backward
// closure. Nodes are appended in evaluation order, so walking the tape from
// the end is a reverse topological traversal. Broadcasting is limited to
// scalar-with-tensor (smul/sadd); everything else needs matching shapes or an
// explicit reshape/matmul with a constant.
//
// Rank-3 tensors are batches of matrices along the leading axis; matmul,
// transpose, cholesky and trisolve act per batch element.

namespace idsgp::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradients of a scalar with respect to every registered parameter.
class Gradients {
 public:
  const Tensor& operator[](Var leaf) const;
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return by_name_.count(name) != 0; }
  const std::map<std::string, Tensor>& by_name() const noexcept { return by_name_; }

 private:
  friend class Tape;
  std::map<std::size_t, Tensor> by_id_;
  std::map<std::string, Tensor> by_name_;
};

class Tape {
 public:
  /// Called with the output gradient and one pointer per parent; a pointer is
  /// null when that parent needs no gradient. Closures accumulate (+=).
  using Backward = std::function<void(const Tensor& grad, std::span<Tensor* const> parents)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that receives a gradient in backward().
  Var parameter(std::string name, Tensor value);
  /// Leaf that never receives a gradient.
  Var constant(Tensor value);

  /// Appends a node. Throws NumericError if `value` is not finite.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> parents,
             Backward backward, double aux = 0.0);

  /// Reverse sweep from a scalar output.
  Gradients backward(Var output) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool needs_grad(Var v) const { return nodes_.at(v.id()).needs_grad; }
  /// Op-specific scalar recorded with a node (cholesky: largest jitter used).
  double aux(Var v) const { return nodes_.at(v.id()).aux; }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> parents;
    Backward backward;
    bool needs_grad = false;
    double aux = 0.0;
  };
  std::vector<Node> nodes_;
  std::vector<std::pair<std::size_t, std::string>> parameters_;
};

// Elementwise, identical shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
/// s·a where s holds a single element.
Var smul(Var s, Var a);
/// s + a where s holds a single element.
Var sadd(Var s, Var a);

Var exp(Var a);
Var log(Var a);
Var softplus(Var a);
Var tanh(Var a);
Var sqrt(Var a);
Var clamp_min(Var a, double lo);
Var log_ndtr(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }

/// (m,k)·(k,n), or batched (b,m,k)·(b,k,n).
Var matmul(Var a, Var b);
/// Swap the last two axes of a rank-2 or rank-3 tensor.
Var transpose(Var a);
Var reshape(Var a, Shape shape);
/// Elements [begin, end) along the last axis.
Var slice_last(Var a, std::size_t begin, std::size_t end);
Var concat_last(const std::vector<Var>& parts);
/// Output element j along the last axis is input element index[j], or 0
/// where index[j] < 0.
Var gather_last(Var a, const std::vector<long>& index);

/// Sum of all elements, rank-0 result.
Var sum(Var a);
/// Sum over the last axis.
Var sum_last(Var a);

/// Lower Cholesky factor of sym(a) with jitter escalation; rank 2 or 3.
Var cholesky(Var a, const JitterPolicy& policy = {});
/// L⁻¹B (or L⁻ᵀB when `transposed`) for lower-triangular L.
Var trisolve(Var lower, Var rhs, bool transposed = false);

}  // namespace idsgp::ad
