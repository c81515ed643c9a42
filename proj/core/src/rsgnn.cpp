#include "heloc/rsgnn.hpp"

#include <cmath>

#include "heloc/error.hpp"

namespace heloc {

Tensor2 glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor2 t(rows, cols);
  for (double& v : t.data()) v = rng.uniform(-a, a);
  return t;
}

RsgnnLayerParams RsgnnLayerParams::init(std::size_t dim, Rng& rng) {
  RsgnnLayerParams p;
  for (Param* w : {&p.w_q, &p.w_k, &p.w_v, &p.w_l, &p.gcn1, &p.gcn2})
    *w = Param(glorot_uniform(dim, dim, rng));
  p.ln1_gain = Param(Tensor2(1, dim, 1.0));
  p.ln1_bias = Param(Tensor2(1, dim, 0.0));
  p.ln2_gain = Param(Tensor2(1, dim, 1.0));
  p.ln2_bias = Param(Tensor2(1, dim, 0.0));
  return p;
}

std::vector<std::pair<std::string, Param*>> RsgnnLayerParams::named() {
  return {{"w_q", &w_q},           {"w_k", &w_k},           {"w_v", &w_v},
          {"w_l", &w_l},           {"gcn1", &gcn1},         {"gcn2", &gcn2},
          {"ln1_gain", &ln1_gain}, {"ln1_bias", &ln1_bias}, {"ln2_gain", &ln2_gain},
          {"ln2_bias", &ln2_bias}};
}

std::vector<std::pair<std::string, const Param*>> RsgnnLayerParams::named() const {
  std::vector<std::pair<std::string, const Param*>> out;
  for (auto& [name, p] : const_cast<RsgnnLayerParams*>(this)->named()) out.emplace_back(name, p);
  return out;
}

LayerVars bind(Tape& tape, RsgnnLayerParams& p) {
  return {tape.param(p.w_q),      tape.param(p.w_k),      tape.param(p.w_v),
          tape.param(p.w_l),      tape.param(p.gcn1),     tape.param(p.gcn2),
          tape.param(p.ln1_gain), tape.param(p.ln1_bias), tape.param(p.ln2_gain),
          tape.param(p.ln2_bias)};
}

LayerVars bind_frozen(Tape& tape, const RsgnnLayerParams& p) {
  return {tape.constant(p.w_q.value),      tape.constant(p.w_k.value),
          tape.constant(p.w_v.value),      tape.constant(p.w_l.value),
          tape.constant(p.gcn1.value),     tape.constant(p.gcn2.value),
          tape.constant(p.ln1_gain.value), tape.constant(p.ln1_bias.value),
          tape.constant(p.ln2_gain.value), tape.constant(p.ln2_bias.value)};
}

Var gcn_project(Var x, const CsrMatrix& propagation, Var w, Activation act) {
  return ad::activate(ad::matmul(ad::spmm(propagation, x), w), act);
}

AttentionOut residual_attention(Var q, Var k, Var v, Var prev, const CsrMatrix& propagation,
                                Var w_l, Activation act) {
  if (!q.value().same_shape(k.value()) || !q.value().same_shape(v.value()))
    throw ShapeError("residual_attention: q, k, v must share a shape");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  AttentionOut out;
  out.logits = ad::add(ad::scale(ad::matmul_nt(q, k), inv_sqrt_d), prev);
  out.attn = ad::softmax_rows(out.logits);
  out.x_attn = gcn_project(ad::matmul(out.attn, v), propagation, w_l, act);
  return out;
}

SublayerOut rsm_sublayer(Var x, const CsrMatrix& propagation, const LayerVars& params, Var prev,
                         const EncoderOptions& opts) {
  const Var q = gcn_project(x, propagation, params.w_q, opts.activation);
  const Var k = gcn_project(x, propagation, params.w_k, opts.activation);
  const Var v = gcn_project(x, propagation, params.w_v, opts.activation);
  const AttentionOut a = residual_attention(q, k, v, prev, propagation, params.w_l, opts.activation);
  const Var out = opts.residual ? ad::add(x, a.x_attn) : a.x_attn;
  return {out, a.logits, a.attn};
}

Var gcn_sublayer(Var x, const CsrMatrix& propagation, const LayerVars& params,
                 const EncoderOptions& opts) {
  const Var hidden = ad::relu(gcn_project(x, propagation, params.gcn1, Activation::identity));
  return gcn_project(hidden, propagation, params.gcn2, opts.activation);
}

SublayerOut rsgnn_layer(Var x, const CsrMatrix& propagation, const LayerVars& params, Var prev,
                        const EncoderOptions& opts) {
  SublayerOut result{x, prev, Var{}};
  Var mixed = x;
  if (opts.self_attention) {
    result = rsm_sublayer(x, propagation, params, prev, opts);
    mixed = result.out;
  }
  const double eps = opts.layer_norm_eps;
  const Var x_tilde = ad::layer_norm_rows(mixed, params.ln1_gain, params.ln1_bias, eps);
  const Var conv = gcn_sublayer(x_tilde, propagation, params, opts);
  result.out = ad::layer_norm_rows(ad::add(x_tilde, conv), params.ln2_gain, params.ln2_bias, eps);
  return result;
}

Var encode(Var x0, const CsrMatrix& propagation, std::span<const LayerVars> stack,
           const EncoderOptions& opts, EncodeTrace* trace) {
  if (propagation.rows != x0.rows()) throw ShapeError("encode: adjacency does not match input rows");
  Tape& tape = *x0.tape();
  const Var zeros = tape.constant(Tensor2(x0.rows(), x0.rows()));
  Var x = x0;
  Var prev = zeros;
  for (const LayerVars& layer : stack) {
    const SublayerOut out = rsgnn_layer(x, propagation, layer, prev, opts);
    x = out.out;
    prev = opts.residual && opts.self_attention ? out.logits : zeros;
    if (trace != nullptr && opts.self_attention) trace->attention.push_back(out.attn.value());
  }
  return x;
}

Tensor2 encode(const Tensor2& x0_ast, const AdjacencyPack& adjacency,
               std::span<const RsgnnLayerParams> stack, const EncoderOptions& opts,
               EncodeTrace* trace) {
  Tape tape;
  const CsrMatrix propagation = adjacency.normalized();
  std::vector<LayerVars> vars;
  vars.reserve(stack.size());
  for (const RsgnnLayerParams& p : stack) vars.push_back(bind_frozen(tape, p));
  return encode(tape.constant(x0_ast), propagation, vars, opts, trace).value();
}

}  // namespace heloc
