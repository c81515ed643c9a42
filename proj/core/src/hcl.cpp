#include "heloc/hcl.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "heloc/embedding.hpp"
#include "heloc/error.hpp"
#include "heloc/parallel.hpp"

namespace heloc {

HclParams HclParams::init(const TrainConfig& cfg, Rng& rng) {
  validate(cfg);
  HclParams p;
  p.encoder.reserve(cfg.layers);
  for (std::size_t i = 0; i < cfg.layers; ++i) p.encoder.push_back(RsgnnLayerParams::init(cfg.dim, rng));
  p.w_ast = Param(glorot_uniform(cfg.dim, cfg.classes(), rng));
  p.b_ast = Param(Tensor2(1, cfg.classes()));
  p.theta_p = Param(Tensor2(1, 1));
  p.tau_p = Param(Tensor2(1, 1));
  return p;
}

std::vector<std::pair<std::string, Param*>> HclParams::named() {
  std::vector<std::pair<std::string, Param*>> out;
  for (std::size_t i = 0; i < encoder.size(); ++i)
    for (auto& [name, p] : encoder[i].named())
      out.emplace_back("encoder." + std::to_string(i) + "." + name, p);
  out.emplace_back("nep.w_ast", &w_ast);
  out.emplace_back("nep.b_ast", &b_ast);
  out.emplace_back("theta_p", &theta_p);
  out.emplace_back("tau_p", &tau_p);
  return out;
}

std::vector<std::pair<std::string, const Param*>> HclParams::named() const {
  std::vector<std::pair<std::string, const Param*>> out;
  for (auto& [name, p] : const_cast<HclParams*>(this)->named()) out.emplace_back(name, p);
  return out;
}

std::vector<Param*> HclParams::all() {
  std::vector<Param*> out;
  for (auto& entry : named()) out.push_back(entry.second);
  return out;
}

Var nep_logits(Var x_nd, Var w_ast, Var b_ast) { return ad::add_row(ad::matmul(x_nd, w_ast), b_ast); }

Tensor2 nep_logits(const Tensor2& x_nd, const HclParams& params) {
  Tape tape;
  return nep_logits(tape.constant(x_nd), tape.constant(params.w_ast.value),
                    tape.constant(params.b_ast.value))
      .value();
}

namespace {

Tensor2 one_hot_levels(std::size_t rows, std::size_t classes, std::span<const int> levels) {
  if (levels.size() != rows) throw ShapeError("nep_loss: one level per logit row required");
  Tensor2 targets(rows, classes);
  for (std::size_t i = 0; i < rows; ++i) {
    if (levels[i] < 0 || static_cast<std::size_t>(levels[i]) >= classes)
      throw DomainError("level " + std::to_string(levels[i]) + " outside [0, " +
                        std::to_string(classes) + ")");
    targets(i, static_cast<std::size_t>(levels[i])) = 1.0;
  }
  return targets;
}

std::vector<double> triplet_offsets(const TripletBatch& batch, double margin) {
  if (batch.delta_l.size() != batch.triples.size())
    throw ShapeError("nro_loss: one level gap per triple required");
  std::vector<double> offsets;
  offsets.reserve(batch.delta_l.size());
  for (int d : batch.delta_l) offsets.push_back(static_cast<double>(d) + margin);
  return offsets;
}

}  // namespace

Var nep_loss(Var logits, std::span<const int> levels) {
  return ad::soft_cross_entropy(logits, one_hot_levels(logits.rows(), logits.cols(), levels));
}

double nep_loss(const Tensor2& logits, std::span<const int> levels) {
  Tape tape;
  return nep_loss(tape.constant(logits), levels).scalar();
}

Var nro_loss(Var x_nd, const TripletBatch& batch, double margin) {
  const auto triples = batch.index_triples();
  const auto offsets = triplet_offsets(batch, margin);
  return ad::triplet_hinge(x_nd, triples, offsets);
}

double nro_loss(const Tensor2& x_nd, const TripletBatch& batch, double margin) {
  Tape tape;
  return nro_loss(tape.constant(x_nd), batch, margin).scalar();
}

Var joint_loss(Var l_h, Var l_t, Var theta_p, Var tau_p) {
  const Var wh = ad::exp(ad::scale(theta_p, -2.0));
  const Var wt = ad::exp(ad::scale(tau_p, -2.0));
  return ad::add(ad::add(ad::mul(wh, l_h), ad::mul(wt, l_t)), ad::add(theta_p, tau_p));
}

double joint_loss(double l_h, double l_t, double theta_p, double tau_p) {
  return std::exp(-2.0 * theta_p) * l_h + std::exp(-2.0 * tau_p) * l_t + theta_p + tau_p;
}

void adam_step(std::span<Param* const> params, AdamState& state, const AdamOptions& opts) {
  if (state.m.empty()) {
    for (const Param* p : params) {
      state.m.emplace_back(p->value.rows(), p->value.cols());
      state.v.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: param list changed between steps");
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(opts.beta1, t);
  const double c2 = 1.0 - std::pow(opts.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param& p = *params[k];
    Tensor2& m = state.m[k];
    Tensor2& v = state.v[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = opts.beta1 * m[i] + (1.0 - opts.beta1) * g;
      v[i] = opts.beta2 * v[i] + (1.0 - opts.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p.value[i] -= opts.lr * m_hat / (std::sqrt(v_hat) + opts.eps);
    }
  }
}

PreparedGraph PreparedGraph::make(AstGraph graph, const TrainConfig& cfg) {
  if (static_cast<std::size_t>(graph.depth()) > cfg.max_depth)
    throw CapError("max_depth", cfg.max_depth, static_cast<std::size_t>(graph.depth()));
  PreparedGraph g{std::move(graph), {}, {}};
  g.x0_ast = make_inputs(g.graph, cfg.embedder()).x0_ast;
  g.propagation = build_adjacency(g.graph).normalized();
  return g;
}

LossTerms graph_objective(Tape& tape, const PreparedGraph& g, HclParams& params,
                          const TripletBatch& triples, const TrainConfig& cfg) {
  std::vector<LayerVars> layers;
  layers.reserve(params.encoder.size());
  for (RsgnnLayerParams& layer : params.encoder) layers.push_back(bind(tape, layer));
  const Var x = encode(tape.constant(g.x0_ast), g.propagation, layers, cfg.encoder_options());

  const Var zero = tape.constant(Tensor2(1, 1));
  LossTerms terms{zero, zero, zero};
  if (!cfg.no_nep)
    terms.l_h = nep_loss(nep_logits(x, tape.param(params.w_ast), tape.param(params.b_ast)),
                         g.graph.levels());
  if (!cfg.no_nro) terms.l_t = nro_loss(x, triples, cfg.margin);

  if (!cfg.no_nep && !cfg.no_nro) {
    terms.total = joint_loss(terms.l_h, terms.l_t, tape.param(params.theta_p), tape.param(params.tau_p));
  } else if (!cfg.no_nep) {
    const Var theta = tape.param(params.theta_p);
    terms.total = ad::add(ad::mul(ad::exp(ad::scale(theta, -2.0)), terms.l_h), theta);
  } else if (!cfg.no_nro) {
    const Var tau = tape.param(params.tau_p);
    terms.total = ad::add(ad::mul(ad::exp(ad::scale(tau, -2.0)), terms.l_t), tau);
  }
  return terms;
}

Tensor2 encode_graph(const PreparedGraph& g, std::span<const RsgnnLayerParams> encoder,
                     const TrainConfig& cfg) {
  Tape tape;
  std::vector<LayerVars> layers;
  layers.reserve(encoder.size());
  for (const RsgnnLayerParams& layer : encoder) layers.push_back(bind_frozen(tape, layer));
  return encode(tape.constant(g.x0_ast), g.propagation, layers, cfg.encoder_options()).value();
}

PretrainResult pretrain(const std::vector<PreparedGraph>& corpus, const TrainConfig& cfg,
                        const std::function<void(const TrainLogRow&)>& on_step) {
  validate(cfg);
  if (corpus.empty()) throw DomainError("pretraining corpus is empty");
  if (cfg.no_nep && cfg.no_nro)
    throw NoSignalError("both objectives are disabled; nothing to train");
  if (cfg.no_nep) {
    const bool any_triplets = std::any_of(corpus.begin(), corpus.end(), [](const PreparedGraph& g) {
      return !sample_triplets(g.graph, 1, std::uint64_t{0}).no_valid_anchor;
    });
    if (!any_triplets)
      throw NoSignalError("no tree admits a triplet and level prediction is disabled");
  }

  Rng rng(cfg.seed);
  PretrainResult result{cfg, HclParams::init(cfg, rng), {}, {}};
  HclParams& params = result.params;
  const std::vector<Param*> all = params.all();
  AdamState adam;
  const AdamOptions adam_opts{cfg.lr};

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<std::size_t> picks(cfg.batch_size);
    std::vector<TripletBatch> triples(cfg.batch_size);
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      picks[b] = static_cast<std::size_t>(rng.index(corpus.size()));
      if (!cfg.no_nro) {
        const AstGraph& graph = corpus[picks[b]].graph;
        triples[b] = sample_triplets(graph, std::min(graph.size(), cfg.triplets_per_graph), rng);
      }
    }

    for (Param* p : all) p->zero_grad();
    std::vector<std::unique_ptr<Tape>> tapes(cfg.batch_size);
    std::vector<TrainLogRow> parts(cfg.batch_size);
    parallel_for(cfg.batch_size, [&](std::size_t b) {
      tapes[b] = std::make_unique<Tape>(/*defer_param_grads=*/true);
      const LossTerms terms = graph_objective(*tapes[b], corpus[picks[b]], params, triples[b], cfg);
      tapes[b]->backward(terms.total);
      parts[b].loss = terms.total.scalar();
      parts[b].l_h = terms.l_h.scalar();
      parts[b].l_t = terms.l_t.scalar();
    });

    TrainLogRow row;
    row.step = step;
    row.theta_p = params.theta_p.value[0];
    row.tau_p = params.tau_p.value[0];
    // Fixed reduction order keeps the run independent of thread scheduling.
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      tapes[b]->flush_param_grads();
      row.loss += parts[b].loss;
      row.l_h += parts[b].l_h;
      row.l_t += parts[b].l_t;
    }
    tapes.clear();
    result.log.push_back(row);
    if (on_step) on_step(row);
    adam_step(all, adam, adam_opts);
  }
  result.rng_state = rng.state();
  return result;
}

}  // namespace heloc
