#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "heloc/ast.hpp"
#include "heloc/autodiff.hpp"
#include "heloc/random.hpp"

namespace heloc {

struct EncoderOptions {
  /// σ applied by the graph-convolution projections.
  Activation activation = Activation::relu;
  /// When false the attention sub-layer is bypassed: x̃ = LayerNorm(x).
  bool self_attention = true;
  /// When false neither the previous layer's scores nor the skip around the
  /// attention output are used.
  bool residual = true;
  double layer_norm_eps = 1e-5;
};

struct RsgnnLayerParams {
  Param w_q, w_k, w_v, w_l;
  Param gcn1, gcn2;
  Param ln1_gain, ln1_bias, ln2_gain, ln2_bias;

  /// Glorot-uniform weights; layer-norm gains 1 and biases 0.
  static RsgnnLayerParams init(std::size_t dim, Rng& rng);

  std::vector<std::pair<std::string, Param*>> named();
  std::vector<std::pair<std::string, const Param*>> named() const;
};

/// Uniform(−a, a) with a = √(6 / (rows + cols)).
Tensor2 glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);

/// A layer's parameters as recorded on one tape.
struct LayerVars {
  Var w_q, w_k, w_v, w_l, gcn1, gcn2, ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

/// Records params so that backward accumulates into their grads.
LayerVars bind(Tape& tape, RsgnnLayerParams& params);
/// Records params as constants.
LayerVars bind_frozen(Tape& tape, const RsgnnLayerParams& params);

/// σ(D̃⁻¹ Ã x w). `propagation` is D̃⁻¹ Ã and must outlive the tape's backward pass.
Var gcn_project(Var x, const CsrMatrix& propagation, Var w, Activation act);

struct AttentionOut {
  Var logits;  // q kᵀ / √H + prev, carried to the next layer
  Var attn;    // softmax_rows(logits)
  Var x_attn;  // σ(D̃⁻¹ Ã (attn v) w_l)
};

AttentionOut residual_attention(Var q, Var k, Var v, Var prev, const CsrMatrix& propagation,
                                Var w_l, Activation act);

struct SublayerOut {
  Var out;
  Var logits;
  Var attn;
};

/// q, k, v from their own projections; out = x + x_attn (or x_attn alone
/// without residuals).
SublayerOut rsm_sublayer(Var x, const CsrMatrix& propagation, const LayerVars& params, Var prev,
                         const EncoderOptions& opts);

/// σ(D̃⁻¹ Ã relu(D̃⁻¹ Ã x gcn1) gcn2)
Var gcn_sublayer(Var x, const CsrMatrix& propagation, const LayerVars& params,
                 const EncoderOptions& opts);

/// x̃ = LayerNorm(rsm_sublayer(x)); x_next = LayerNorm(x̃ + gcn_sublayer(x̃)).
SublayerOut rsgnn_layer(Var x, const CsrMatrix& propagation, const LayerVars& params, Var prev,
                        const EncoderOptions& opts);

struct EncodeTrace {
  std::vector<Tensor2> attention;  // one N×N matrix per layer
};

/// Folds rsgnn_layer over the stack with the carried scores starting at zero.
Var encode(Var x0, const CsrMatrix& propagation, std::span<const LayerVars> stack,
           const EncoderOptions& opts, EncodeTrace* trace = nullptr);

/// Forward-only convenience over frozen params.
Tensor2 encode(const Tensor2& x0_ast, const AdjacencyPack& adjacency,
               std::span<const RsgnnLayerParams> stack, const EncoderOptions& opts,
               EncodeTrace* trace = nullptr);

}  // namespace heloc
