#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "heloc/tensor.hpp"

namespace heloc {

/// A learnable tensor and its accumulated gradient.
struct Param {
  Tensor2 value;
  Tensor2 grad;

  Param() = default;
  explicit Param(Tensor2 v) : value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad = Tensor2(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Tensor2& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  /// Value of a 1×1 result.
  double scalar() const;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records forward operations and replays their vector-Jacobian products in
/// reverse order. Gradients accumulate additively into every recorded input.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor2& grad_out)>;

  /// When param gradients are deferred, backward() leaves Param::grad untouched
  /// until flush_param_grads() is called.
  explicit Tape(bool defer_param_grads = false) : defer_param_grads_(defer_param_grads) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor2 value);
  /// Records the current value of p; backward adds into p.grad.
  Var param(Param& p);

  Var record(Tensor2 value, std::initializer_list<Var> inputs, BackwardFn backward);

  void backward(Var output, const Tensor2& seed);
  /// Seeds a 1×1 output with 1.
  void backward(Var output);
  void flush_param_grads() const;

  const Tensor2& value(Var v) const { return nodes_[v.id_].value; }
  /// Gradient of v after backward(); zeros if nothing flowed into v.
  Tensor2 grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id_].requires_grad; }
  void add_grad(Var v, const Tensor2& g);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }

 private:
  struct Node {
    Tensor2 value;
    Tensor2 grad;
    BackwardFn backward;
    Param* param = nullptr;
    bool requires_grad = false;
  };

  Var make(std::size_t id) { return Var(this, id); }

  std::vector<Node> nodes_;
  bool defer_param_grads_;
};

enum class Activation { identity, relu, tanh };

namespace ad {

Var matmul(Var a, Var b);
/// a · bᵀ
Var matmul_nt(Var a, Var b);
/// s · x for a fixed sparse operator s.
Var spmm(const CsrMatrix& s, Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
/// Adds a 1×cols row to every row of x.
Var add_row(Var x, Var row);
Var relu(Var x);
Var tanh(Var x);
Var exp(Var x);
Var activate(Var x, Activation act);
Var softmax_rows(Var x);
Var layer_norm_rows(Var x, Var gain, Var bias, double eps);
/// 1×cols mean over rows.
Var mean_rows(Var x);
/// 1×1 sum of all entries.
Var sum(Var x);
/// Σ_i Σ_c −targets[i][c] · log softmax(logits_i)_c, as a 1×1 value.
Var soft_cross_entropy(Var logits, const Tensor2& targets);
/// Σ_t [‖x_a − x_p‖² − ‖x_a − x_n‖² + offset_t]₊ over row-index triples (a, p, n).
Var triplet_hinge(Var x, std::span<const std::array<std::size_t, 3>> triples,
                  std::span<const double> offsets);

}  // namespace ad

/// Builds a scalar objective on the given tape from the current Param values.
using ObjectiveFn = std::function<Var(Tape&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Floor on the denominator of the relative error so that coordinates whose
/// true gradient is zero are judged by absolute error instead.
inline constexpr double kGradCheckFloor = 1e-6;

/// Compares tape gradients with central differences (f(p+h) − f(p−h)) / 2h for
/// every coordinate of every param. Relative error per coordinate is
/// |analytic − numeric| / max(|analytic|, |numeric|, kGradCheckFloor).
/// Param values are restored on return; Param grads are overwritten.
GradCheckResult finite_diff_check(const ObjectiveFn& f, std::span<Param* const> params,
                                  double h = 1e-5);

}  // namespace heloc
