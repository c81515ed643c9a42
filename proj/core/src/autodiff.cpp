#include "heloc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "heloc/error.hpp"

namespace heloc {

const Tensor2& Var::value() const { return tape_->value(*this); }

double Var::scalar() const {
  const Tensor2& v = value();
  if (v.size() != 1) throw ShapeError("scalar() on a " + std::to_string(v.rows()) + "x" +
                                      std::to_string(v.cols()) + " value");
  return v[0];
}

Var Tape::constant(Tensor2 value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return make(nodes_.size() - 1);
}

Var Tape::param(Param& p) {
  nodes_.push_back(Node{p.value, {}, {}, &p, true});
  return make(nodes_.size() - 1);
}

Var Tape::record(Tensor2 value, std::initializer_list<Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (Var in : inputs) {
    if (in.tape_ != this) throw Error("operands recorded on different tapes");
    needs = needs || nodes_[in.id_].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, nullptr,
                        needs});
  return make(nodes_.size() - 1);
}

void Tape::add_grad(Var v, const Tensor2& g) {
  Node& n = nodes_[v.id_];
  if (!n.requires_grad) return;
  if (n.grad.empty() && !n.value.empty())
    n.grad = g;
  else
    n.grad += g;
}

Tensor2 Tape::grad(Var v) const {
  const Node& n = nodes_[v.id_];
  if (n.grad.empty()) return Tensor2(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var output, const Tensor2& seed) {
  if (nodes_.empty()) return;
  if (!seed.same_shape(value(output))) throw ShapeError("backward seed shape mismatch");
  for (Node& n : nodes_) n.grad = Tensor2();
  add_grad(output, seed);
  for (std::size_t i = output.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    const Tensor2 g = n.grad;
    n.backward(*this, g);
  }
  if (!defer_param_grads_) flush_param_grads();
}

void Tape::backward(Var output) {
  if (nodes_.empty()) return;
  backward(output, Tensor2(1, 1, 1.0));
}

void Tape::flush_param_grads() const {
  for (const Node& n : nodes_)
    if (n.param != nullptr && !n.grad.empty()) n.param->grad += n.grad;
}

namespace ad {
namespace {

Tape& tape_of(Var a) {
  if (a.tape() == nullptr) throw Error("operation on an unrecorded variable");
  return *a.tape();
}

void require_same(const Tensor2& a, const Tensor2& b, const char* op) {
  if (!a.same_shape(b)) throw ShapeError(std::string(op) + ": operand shapes differ");
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  return t.record(heloc::matmul(a.value(), b.value()), {a, b},
                  [a, b](Tape& tp, const Tensor2& g) {
                    if (tp.requires_grad(a)) tp.add_grad(a, heloc::matmul_nt(g, b.value()));
                    if (tp.requires_grad(b)) tp.add_grad(b, heloc::matmul_tn(a.value(), g));
                  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of(a);
  return t.record(heloc::matmul_nt(a.value(), b.value()), {a, b},
                  [a, b](Tape& tp, const Tensor2& g) {
                    if (tp.requires_grad(a)) tp.add_grad(a, heloc::matmul(g, b.value()));
                    if (tp.requires_grad(b)) tp.add_grad(b, heloc::matmul_tn(g, a.value()));
                  });
}

Var spmm(const CsrMatrix& s, Var x) {
  Tape& t = tape_of(x);
  return t.record(heloc::spmm(s, x.value()), {x},
                  [&s, x](Tape& tp, const Tensor2& g) { tp.add_grad(x, heloc::spmm_t(s, g)); });
}

Var add(Var a, Var b) {
  require_same(a.value(), b.value(), "add");
  return tape_of(a).record(a.value() + b.value(), {a, b}, [a, b](Tape& tp, const Tensor2& g) {
    tp.add_grad(a, g);
    tp.add_grad(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same(a.value(), b.value(), "sub");
  return tape_of(a).record(a.value() - b.value(), {a, b}, [a, b](Tape& tp, const Tensor2& g) {
    tp.add_grad(a, g);
    tp.add_grad(b, g * -1.0);
  });
}

Var mul(Var a, Var b) {
  require_same(a.value(), b.value(), "mul");
  Tensor2 out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor2& g) {
    if (tp.requires_grad(a)) {
      Tensor2 ga = g;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= b.value()[i];
      tp.add_grad(a, ga);
    }
    if (tp.requires_grad(b)) {
      Tensor2 gb = g;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= a.value()[i];
      tp.add_grad(b, gb);
    }
  });
}

Var scale(Var a, double s) {
  return tape_of(a).record(a.value() * s, {a},
                           [a, s](Tape& tp, const Tensor2& g) { tp.add_grad(a, g * s); });
}

Var add_row(Var x, Var row) {
  const Tensor2& xv = x.value();
  const Tensor2& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != xv.cols()) throw ShapeError("add_row: row must be 1xcols");
  Tensor2 out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += rv[c];
  return tape_of(x).record(std::move(out), {x, row}, [x, row](Tape& tp, const Tensor2& g) {
    tp.add_grad(x, g);
    if (tp.requires_grad(row)) {
      Tensor2 gr(1, g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gr[c] += g(r, c);
      tp.add_grad(row, gr);
    }
  });
}

Var relu(Var x) {
  return tape_of(x).record(heloc::relu(x.value()), {x}, [x](Tape& tp, const Tensor2& g) {
    Tensor2 gx = g;
    const Tensor2& xv = x.value();
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (!(xv[i] > 0.0)) gx[i] = 0.0;
    tp.add_grad(x, gx);
  });
}

Var tanh(Var x) {
  Tensor2 out = x.value();
  for (double& v : out.data()) v = std::tanh(v);
  return tape_of(x).record(out, {x}, [x, out](Tape& tp, const Tensor2& g) {
    Tensor2 gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= 1.0 - out[i] * out[i];
    tp.add_grad(x, gx);
  });
}

Var exp(Var x) {
  Tensor2 out = x.value();
  for (double& v : out.data()) v = std::exp(v);
  return tape_of(x).record(out, {x}, [x, out](Tape& tp, const Tensor2& g) {
    Tensor2 gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= out[i];
    tp.add_grad(x, gx);
  });
}

Var activate(Var x, Activation act) {
  switch (act) {
    case Activation::identity:
      return x;
    case Activation::relu:
      return relu(x);
    case Activation::tanh:
      return tanh(x);
  }
  return x;
}

Var softmax_rows(Var x) {
  Tensor2 out = heloc::softmax_rows(x.value());
  return tape_of(x).record(out, {x}, [x, out](Tape& tp, const Tensor2& g) {
    Tensor2 gx(out.rows(), out.cols());
    for (std::size_t r = 0; r < out.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < out.cols(); ++c) dot += g(r, c) * out(r, c);
      for (std::size_t c = 0; c < out.cols(); ++c) gx(r, c) = out(r, c) * (g(r, c) - dot);
    }
    tp.add_grad(x, gx);
  });
}

Var layer_norm_rows(Var x, Var gain, Var bias, double eps) {
  const Tensor2& xv = x.value();
  const std::size_t n = xv.cols();
  if (gain.value().size() != n || bias.value().size() != n)
    throw ShapeError("layer_norm_rows: gain/bias length must equal " + std::to_string(n));
  Tensor2 xhat(xv.rows(), n);
  std::vector<double> inv_std(xv.rows());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const auto in = xv.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) xhat(r, c) = (in[c] - mean) * inv_std[r];
  }
  Tensor2 out(xv.rows(), n);
  const Tensor2& gv = gain.value();
  const Tensor2& bv = bias.value();
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = 0; c < n; ++c) out(r, c) = gv[c] * xhat(r, c) + bv[c];

  return tape_of(x).record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tp,
                                                                           const Tensor2& g) {
        const std::size_t rows = xhat.rows();
        const std::size_t cols = xhat.cols();
        const Tensor2& gv = gain.value();
        if (tp.requires_grad(gain) || tp.requires_grad(bias)) {
          Tensor2 gg(gain.value().rows(), gain.value().cols());
          Tensor2 gb(bias.value().rows(), bias.value().cols());
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
              gg[c] += g(r, c) * xhat(r, c);
              gb[c] += g(r, c);
            }
          tp.add_grad(gain, gg);
          tp.add_grad(bias, gb);
        }
        if (tp.requires_grad(x)) {
          Tensor2 gx(rows, cols);
          const double inv_n = 1.0 / static_cast<double>(cols);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_d = 0.0;
            double mean_dx = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              const double d = g(r, c) * gv[c];
              mean_d += d;
              mean_dx += d * xhat(r, c);
            }
            mean_d *= inv_n;
            mean_dx *= inv_n;
            for (std::size_t c = 0; c < cols; ++c) {
              const double d = g(r, c) * gv[c];
              gx(r, c) = inv_std[r] * (d - mean_d - xhat(r, c) * mean_dx);
            }
          }
          tp.add_grad(x, gx);
        }
      });
}

Var mean_rows(Var x) {
  const Tensor2& xv = x.value();
  if (xv.rows() == 0) throw ShapeError("mean_rows of an empty matrix");
  Tensor2 out(1, xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = 0; c < xv.cols(); ++c) out[c] += xv(r, c);
  const double inv = 1.0 / static_cast<double>(xv.rows());
  out *= inv;
  return tape_of(x).record(std::move(out), {x}, [x, inv](Tape& tp, const Tensor2& g) {
    const Tensor2& xv = x.value();
    Tensor2 gx(xv.rows(), xv.cols());
    for (std::size_t r = 0; r < xv.rows(); ++r)
      for (std::size_t c = 0; c < xv.cols(); ++c) gx(r, c) = g[c] * inv;
    tp.add_grad(x, gx);
  });
}

Var sum(Var x) {
  return tape_of(x).record(Tensor2(1, 1, heloc::sum(x.value())), {x},
                           [x](Tape& tp, const Tensor2& g) {
                             tp.add_grad(x, Tensor2(x.rows(), x.cols(), g[0]));
                           });
}

Var soft_cross_entropy(Var logits, const Tensor2& targets) {
  require_same(logits.value(), targets, "soft_cross_entropy");
  const Tensor2 probs = heloc::softmax_rows(logits.value());
  double loss = 0.0;
  const Tensor2& z = logits.value();
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const auto row = z.row(r);
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - m);
    const double lse = m + std::log(s);
    for (std::size_t c = 0; c < z.cols(); ++c)
      if (targets(r, c) != 0.0) loss -= targets(r, c) * (z(r, c) - lse);
  }
  return tape_of(logits).record(
      Tensor2(1, 1, loss), {logits}, [logits, probs, targets](Tape& tp, const Tensor2& g) {
        Tensor2 gz(probs.rows(), probs.cols());
        for (std::size_t r = 0; r < probs.rows(); ++r) {
          double mass = 0.0;
          for (std::size_t c = 0; c < probs.cols(); ++c) mass += targets(r, c);
          for (std::size_t c = 0; c < probs.cols(); ++c)
            gz(r, c) = g[0] * (mass * probs(r, c) - targets(r, c));
        }
        tp.add_grad(logits, gz);
      });
}

Var triplet_hinge(Var x, std::span<const std::array<std::size_t, 3>> triples,
                  std::span<const double> offsets) {
  if (triples.size() != offsets.size()) throw ShapeError("triplet_hinge: one offset per triple");
  const Tensor2& xv = x.value();
  for (const auto& t : triples)
    for (std::size_t idx : t)
      if (idx >= xv.rows()) throw ShapeError("triplet_hinge: row index out of range");

  auto sqdist = [&xv](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t c = 0; c < xv.cols(); ++c) {
      const double d = xv(i, c) - xv(j, c);
      s += d * d;
    }
    return s;
  };
  std::vector<std::array<std::size_t, 3>> active;
  double loss = 0.0;
  for (std::size_t t = 0; t < triples.size(); ++t) {
    const auto [a, p, n] = triples[t];
    const double v = sqdist(a, p) - sqdist(a, n) + offsets[t];
    if (v > 0.0) {
      loss += v;
      active.push_back(triples[t]);
    }
  }
  return tape_of(x).record(
      Tensor2(1, 1, loss), {x}, [x, active = std::move(active)](Tape& tp, const Tensor2& g) {
        const Tensor2& xv = x.value();
        Tensor2 gx(xv.rows(), xv.cols());
        const double s = 2.0 * g[0];
        for (const auto& [a, p, n] : active) {
          for (std::size_t c = 0; c < xv.cols(); ++c) {
            const double ap = xv(a, c) - xv(p, c);
            const double an = xv(a, c) - xv(n, c);
            gx(a, c) += s * (ap - an);
            gx(p, c) -= s * ap;
            gx(n, c) += s * an;
          }
        }
        tp.add_grad(x, gx);
      });
}

}  // namespace ad

GradCheckResult finite_diff_check(const ObjectiveFn& f, std::span<Param* const> params, double h) {
  if (!(h > 0.0)) throw DomainError("finite_diff_check: step must be positive");
  for (Param* p : params) p->zero_grad();
  {
    Tape tape;
    Var out = f(tape);
    tape.backward(out);
  }
  auto evaluate = [&f] {
    Tape tape;
    return f(tape).scalar();
  };

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param& p = *params[pi];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + h;
      const double up = evaluate();
      p.value[i] = saved - h;
      const double down = evaluate();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p.grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.coordinates;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = pi;
        result.worst_index = i;
        result.analytic = analytic;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace heloc
