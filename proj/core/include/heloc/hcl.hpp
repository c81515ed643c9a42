#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "heloc/ast.hpp"
#include "heloc/autodiff.hpp"
#include "heloc/config.hpp"
#include "heloc/random.hpp"
#include "heloc/rsgnn.hpp"

namespace heloc {

/// Encoder stack, level head and the two log-uncertainty weights.
struct HclParams {
  std::vector<RsgnnLayerParams> encoder;
  Param w_ast;    // H×C
  Param b_ast;    // 1×C
  Param theta_p;  // 1×1, weights the level-prediction loss
  Param tau_p;    // 1×1, weights the triplet loss

  static HclParams init(const TrainConfig& cfg, Rng& rng);

  std::vector<std::pair<std::string, Param*>> named();
  std::vector<std::pair<std::string, const Param*>> named() const;
  std::vector<Param*> all();
};

/// Level-head logits x·W_AST + b_AST.
Var nep_logits(Var x_nd, Var w_ast, Var b_ast);
Tensor2 nep_logits(const Tensor2& x_nd, const HclParams& params);

/// Σ_i −log softmax(logits_i)[level_i]. Throws DomainError for a level outside [0, C).
Var nep_loss(Var logits, std::span<const int> levels);
double nep_loss(const Tensor2& logits, std::span<const int> levels);

/// Σ over triples of [‖x_a − x_p‖² − ‖x_a − x_n‖² + Δl + α]₊; zero for an empty batch.
Var nro_loss(Var x_nd, const TripletBatch& batch, double margin);
double nro_loss(const Tensor2& x_nd, const TripletBatch& batch, double margin);

/// exp(−2θ′)·l_h + exp(−2τ′)·l_t + θ′ + τ′
Var joint_loss(Var l_h, Var l_t, Var theta_p, Var tau_p);
double joint_loss(double l_h, double l_t, double theta_p, double tau_p);

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment estimates for a fixed list of params.
struct AdamState {
  std::vector<Tensor2> m;
  std::vector<Tensor2> v;
  std::size_t t = 0;
};

/// One bias-corrected Adam update of every param from its grad.
void adam_step(std::span<Param* const> params, AdamState& state, const AdamOptions& opts);

/// A tree with everything training needs precomputed.
struct PreparedGraph {
  AstGraph graph;
  Tensor2 x0_ast;
  CsrMatrix propagation;

  static PreparedGraph make(AstGraph graph, const TrainConfig& cfg);
};

struct LossTerms {
  Var total;
  Var l_h;
  Var l_t;
};

/// Joint objective of one tree, with params recorded on `tape`. Disabled
/// objectives contribute neither their loss nor their uncertainty term.
LossTerms graph_objective(Tape& tape, const PreparedGraph& g, HclParams& params,
                          const TripletBatch& triples, const TrainConfig& cfg);

/// Final node representations of a tree under frozen encoder params.
Tensor2 encode_graph(const PreparedGraph& g, std::span<const RsgnnLayerParams> encoder,
                     const TrainConfig& cfg);

struct TrainLogRow {
  std::size_t step = 0;
  double loss = 0.0;
  double l_h = 0.0;
  double l_t = 0.0;
  double theta_p = 0.0;
  double tau_p = 0.0;
};

struct PretrainResult {
  TrainConfig config;
  HclParams params;
  std::vector<TrainLogRow> log;
  /// Generator state after the final step.
  std::string rng_state;
};

/// Trains with Adam on the joint objective summed over a batch of trees drawn
/// with replacement per step. Rows of the log report the loss before each
/// update. Throws NoSignalError when neither objective can produce a gradient.
PretrainResult pretrain(const std::vector<PreparedGraph>& corpus, const TrainConfig& cfg,
                        const std::function<void(const TrainLogRow&)>& on_step = {});

}  // namespace heloc
