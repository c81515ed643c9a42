// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
// A1 gradient fidelity, A2 hierarchy separation, A3 downstream smoke,
// A4 loss oracles, A5 structural invariants, A6 ablation direction.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "heloc/checkpoint.hpp"
#include "heloc/demo_parser.hpp"
#include "heloc/downstream.hpp"
#include "heloc/hcl.hpp"
#include "heloc/synth.hpp"
#include "support.hpp"

using namespace heloc;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string num(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

Tensor2 random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor2 t(r, c);
  for (double& v : t.data()) v = rng.uniform(-scale, scale);
  return t;
}

// ---- A1 -------------------------------------------------------------------

Outcome gradient_fidelity() {
  const auto start = Clock::now();
  Rng rng(2024);
  // Redraw until the tree admits triplets so both objectives carry gradient.
  AstGraph g = heloc::testing::random_tree(10, rng);
  while (sample_triplets(g, 1, std::uint64_t{0}).no_valid_anchor) g = heloc::testing::random_tree(10, rng);

  TrainConfig cfg = TrainConfig::desk();
  cfg.dim = 8;
  cfg.layers = 2;
  const PreparedGraph pg = PreparedGraph::make(g, cfg);
  HclParams params = HclParams::init(cfg, rng);
  params.theta_p.value[0] = rng.uniform(-0.5, 0.5);
  params.tau_p.value[0] = rng.uniform(-0.5, 0.5);
  const TripletBatch triples = sample_triplets(g, 10, rng);

  const GradCheckResult r = finite_diff_check(
      [&](Tape& t) { return graph_objective(t, pg, params, triples, cfg).total; }, params.all(), 1e-5);
  const double elapsed = seconds_since(start);
  const bool pass = r.max_rel_error < 1e-4 && elapsed < 30.0;
  return {pass, "max relative error " + num(r.max_rel_error, 3) + " over " + std::to_string(r.coordinates) +
                    " coordinates (worst " + params.named()[r.worst_param].first + "), " + num(elapsed, 3) + " s"};
}

// ---- A2 / A6 ----------------------------------------------------------------

std::vector<PreparedGraph> synthetic_trees(std::size_t count, ProgramFamily family, Rng& rng,
                                           const TrainConfig& cfg) {
  std::vector<PreparedGraph> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(PreparedGraph::make(parse_demo_source(generate_program(family, rng, 6), cfg.caps()), cfg));
  return out;
}

struct Hierarchy {
  double accuracy = 0.0;
  std::vector<double> distance;  // D(0), D(1), D(2)
  double train_seconds = 0.0;

  bool ordered() const { return distance[0] < distance[1] && distance[1] < distance[2]; }
  std::string describe() const {
    return "NEP accuracy " + num(accuracy) + ", D(0..2) = " + num(distance[0]) + " < " + num(distance[1]) + " < " +
           num(distance[2]) + (ordered() ? "" : " (not ordered)");
  }
};

/// Level accuracy over every node of the held-out trees, and the mean squared
/// distance between nodes at level gap 0, 1 and 2 averaged over trees.
Hierarchy evaluate_hierarchy(const PretrainResult& model, const std::vector<PreparedGraph>& held_out) {
  Hierarchy h;
  std::size_t correct = 0, total = 0;
  std::vector<double> sum(3, 0.0);
  std::vector<std::size_t> trees(3, 0);
  for (const PreparedGraph& g : held_out) {
    const Tensor2 x = encode_graph(g, model.params.encoder, model.config);
    const Tensor2 logits = nep_logits(x, model.params);
    const auto& levels = g.graph.levels();
    for (std::size_t i = 0; i < g.graph.size(); ++i) {
      correct += argmax(logits.row(i)) == static_cast<std::size_t>(levels[i]) ? 1 : 0;
      ++total;
    }
    std::vector<double> acc(3, 0.0);
    std::vector<std::size_t> pairs(3, 0);
    for (std::size_t i = 0; i < g.graph.size(); ++i)
      for (std::size_t j = i + 1; j < g.graph.size(); ++j) {
        const auto gap = static_cast<std::size_t>(std::abs(levels[i] - levels[j]));
        if (gap > 2) continue;
        double d = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) d += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
        acc[gap] += d;
        ++pairs[gap];
      }
    for (std::size_t gap = 0; gap < 3; ++gap)
      if (pairs[gap] > 0) {
        sum[gap] += acc[gap] / static_cast<double>(pairs[gap]);
        ++trees[gap];
      }
  }
  h.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  for (std::size_t gap = 0; gap < 3; ++gap)
    h.distance.push_back(trees[gap] > 0 ? sum[gap] / static_cast<double>(trees[gap]) : 0.0);
  return h;
}

/// The shared setup of A2, A3 and A6: 200 training trees, 50 unseen trees.
struct HierarchySetup {
  TrainConfig cfg;
  std::vector<PreparedGraph> train;
  std::vector<PreparedGraph> held_out;

  HierarchySetup() : cfg(TrainConfig::desk()) {
    cfg.seed = 7;
    Rng rng(1234);
    train = synthetic_trees(200, ProgramFamily::mixed, rng, cfg);
    held_out = synthetic_trees(50, ProgramFamily::mixed, rng, cfg);
  }
};

struct Pretrained {
  PretrainResult model;
  Hierarchy hierarchy;
};

Pretrained pretrain_and_evaluate(const HierarchySetup& setup, const TrainConfig& cfg) {
  const auto start = Clock::now();
  PretrainResult model = pretrain(setup.train, cfg);
  const double seconds = seconds_since(start);
  Hierarchy h = evaluate_hierarchy(model, setup.held_out);
  h.train_seconds = seconds;
  return {std::move(model), h};
}

Outcome hierarchy_separation(const Pretrained& full) {
  const Hierarchy& h = full.hierarchy;
  const bool pass = h.accuracy >= 0.90 && h.ordered() && h.train_seconds < 300.0;
  return {pass, h.describe() + ", pretraining " + num(h.train_seconds, 3) + " s"};
}

Outcome ablation_direction(const HierarchySetup& setup, const Pretrained& full) {
  TrainConfig cfg = setup.cfg;
  cfg.no_nro = true;
  const Pretrained ablated = pretrain_and_evaluate(setup, cfg);
  const Hierarchy& h = ablated.hierarchy;
  const double drop = full.hierarchy.accuracy - h.accuracy;
  const bool pass = !h.ordered() || drop >= 0.05;
  return {pass, "without NRO: " + h.describe() + ", accuracy drop " + num(100.0 * drop, 3) + " points"};
}

// ---- A3 -------------------------------------------------------------------

Outcome downstream_smoke(const PretrainResult& pretrained) {
  const auto start = Clock::now();
  const TrainConfig& cfg = pretrained.config;
  Rng rng(99);
  const auto loops = synthetic_trees(100, ProgramFamily::loops, rng, cfg);
  const auto branches = synthetic_trees(100, ProgramFamily::branches, rng, cfg);
  std::vector<const PreparedGraph*> all;
  std::vector<std::size_t> family;
  for (std::size_t i = 0; i < 100; ++i) {
    all.push_back(&loops[i]);
    family.push_back(0);
    all.push_back(&branches[i]);
    family.push_back(1);
  }

  // Classification: a seeded 80/20 split; the training part keeps 20% aside
  // for early stopping.
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  std::vector<LabeledGraph> fit, validation;
  std::vector<std::size_t> test(order.begin() + 160, order.end());
  for (std::size_t k = 0; k < 160; ++k)
    (k < 128 ? fit : validation).push_back({all[order[k]], family[order[k]]});
  FineTuneOptions opts;
  opts.epochs = 10;
  opts.lr = 1e-3;
  opts.seed = 5;
  const FineTuneResult tuned = fine_tune(pretrained.params.encoder, cfg, fit, validation, 2, opts);
  std::vector<std::size_t> predicted, truth;
  for (std::size_t i : test) {
    predicted.push_back(classify_predict(embed_graph(*all[i], tuned.encoder, cfg), tuned.head));
    truth.push_back(family[i]);
  }
  const double acc = accuracy(predicted, truth);

  // Clone detection with the pretrained encoder frozen.
  std::vector<std::vector<double>> vectors;
  for (const PreparedGraph* g : all) vectors.push_back(embed_graph(*g, pretrained.params.encoder, cfg).r);
  auto draw_pairs = [&](std::size_t count, bool same) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    while (pairs.size() < count) {
      const std::size_t a = rng.index(all.size()), b = rng.index(all.size());
      if (a == b || (family[a] == family[b]) != same) continue;
      pairs.emplace_back(a, b);
    }
    return pairs;
  };
  std::vector<bool> clone_pred, clone_truth;
  for (bool same : {true, false})
    for (auto [a, b] : draw_pairs(100, same)) {
      clone_pred.push_back(clone_predict(vectors[a], vectors[b]).is_clone);
      clone_truth.push_back(same);
    }
  const PrecisionRecall pr = prf1(clone_pred, clone_truth);

  // Clustering of the pooled vectors.
  const KMeansResult km = kmeans(vectors, 2, 11);
  std::vector<int> assigned, labels;
  for (std::size_t i = 0; i < all.size(); ++i) {
    assigned.push_back(static_cast<int>(km.assignments[i]));
    labels.push_back(static_cast<int>(family[i]));
  }
  const double score = ari(assigned, labels);

  const double elapsed = seconds_since(start);
  const bool pass = acc >= 0.95 && pr.f1 >= 0.90 && score >= 0.8 && elapsed < 300.0;
  return {pass, "classification accuracy " + num(acc) + ", clone F1 " + num(pr.f1) + " (P " + num(pr.precision) +
                    ", R " + num(pr.recall) + "), k-means ARI " + num(score) + ", " + num(elapsed, 3) + " s"};
}

// ---- A4 -------------------------------------------------------------------

std::vector<std::vector<double>> rows_of(const Tensor2& t) {
  std::vector<std::vector<double>> out;
  for (std::size_t r = 0; r < t.rows(); ++r) out.emplace_back(t.row(r).begin(), t.row(r).end());
  return out;
}

Outcome loss_oracles() {
  Rng rng(31337);
  double worst_nep = 0.0, worst_nro = 0.0;
  std::size_t ari_mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.index(10), c = 2 + rng.index(8), h = 1 + rng.index(8);
    const Tensor2 logits = random_tensor(n, c, rng, 4.0);
    std::vector<int> levels(n);
    for (int& l : levels) l = static_cast<int>(rng.index(c));
    worst_nep = std::max(worst_nep, std::abs(nep_loss(logits, levels) -
                                             heloc::testing::reference_nep_loss(rows_of(logits), levels)));

    const Tensor2 x = random_tensor(n, h, rng, 2.0);
    TripletBatch batch;
    std::vector<heloc::testing::RefTriple> ref;
    const std::size_t count = rng.index(10);
    for (std::size_t t = 0; t < count; ++t) {
      const std::size_t a = rng.index(n), p = rng.index(n), q = rng.index(n);
      const int gap = 1 + static_cast<int>(rng.index(5));
      batch.triples.push_back({a, p, q});
      batch.delta_l.push_back(gap);
      ref.push_back({a, p, q, gap});
    }
    worst_nro = std::max(worst_nro, std::abs(nro_loss(x, batch, 1.0) -
                                             heloc::testing::reference_nro_loss(rows_of(x), ref, 1.0)));

    const std::size_t m = 1 + rng.index(12);
    const auto ku = 1 + rng.index(4), kv = 1 + rng.index(4);
    std::vector<int> u(m), v(m);
    for (std::size_t i = 0; i < m; ++i) {
      u[i] = static_cast<int>(rng.index(ku));
      v[i] = static_cast<int>(rng.index(kv));
    }
    if (ari(u, v) != heloc::testing::reference_ari(u, v)) ++ari_mismatches;
  }
  const bool pass = worst_nep <= 1e-9 && worst_nro <= 1e-9 && ari_mismatches == 0;
  return {pass, "worst |nep - oracle| " + num(worst_nep, 3) + ", worst |nro - oracle| " + num(worst_nro, 3) +
                    ", ARI mismatches " + std::to_string(ari_mismatches) + "/100"};
}

// ---- A5 -------------------------------------------------------------------

Outcome structural_invariants() {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  Rng rng(555);
  EmbedderConfig emb;
  emb.dim = 6;

  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(20);
    const AstGraph g = heloc::testing::random_tree(n, rng);

    // Paths: one per leaf, each root-first with levels counting up.
    std::size_t leaves = 0;
    for (const AstNode& node : g.nodes()) leaves += node.children.empty() ? 1 : 0;
    expect(g.paths().size() == leaves, "path count differs from leaf count");
    for (const Path& p : g.paths())
      for (std::size_t k = 0; k < p.size(); ++k)
        expect(g.levels()[p[k]] == static_cast<int>(k), "path position disagrees with level");

    // Triplets respect the level constraints.
    const TripletBatch tb = sample_triplets(g, 20, rng);
    for (std::size_t t = 0; t < tb.triples.size(); ++t) {
      const Triplet& tr = tb.triples[t];
      const int la = g.levels()[tr.anchor], lp = g.levels()[tr.positive], ln = g.levels()[tr.negative];
      expect(tr.anchor != tr.positive && la == lp && la != ln && tb.delta_l[t] == std::abs(ln - la),
             "triplet violates level constraints");
    }

    // Attention rows and layer-norm statistics inside encode.
    const Tensor2 x0 = make_inputs(g, emb).x0_ast;
    std::vector<RsgnnLayerParams> stack;
    for (int l = 0; l < 2; ++l) stack.push_back(RsgnnLayerParams::init(6, rng));
    EncodeTrace trace;
    const AdjacencyPack adj = build_adjacency(g);
    const Tensor2 y = encode(x0, adj, stack, EncoderOptions{}, &trace);
    for (const Tensor2& a : trace.attention)
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        for (double v : a.row(r)) s += v;
        expect(std::abs(s - 1.0) < 1e-12, "attention row does not sum to 1");
      }
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double mean = 0.0, var = 0.0;
      for (double v : y.row(r)) mean += v;
      mean /= 6.0;
      for (double v : y.row(r)) var += (v - mean) * (v - mean);
      var /= 6.0;
      // Unit gain and zero bias: zero mean, unit variance up to eps.
      expect(std::abs(mean) < 1e-9 && std::abs(var - 1.0) < 1e-3, "layer-norm row statistics off");
    }

    // Permutation equivariance of encode.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
    const Tensor2 prop = adj.normalized().to_dense();
    Tensor2 prop_p(n, n), x0_p(n, 6);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) prop_p(i, j) = prop(perm[i], perm[j]);
      for (std::size_t c = 0; c < 6; ++c) x0_p(i, c) = x0(perm[i], c);
    }
    Tape tape;
    std::vector<LayerVars> vars;
    for (const auto& p : stack) vars.push_back(bind_frozen(tape, p));
    const CsrMatrix sp = CsrMatrix::from_dense(prop_p);
    const Tensor2 y_p = encode(tape.constant(x0_p), sp, vars, EncoderOptions{}).value();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < 6; ++c) worst = std::max(worst, std::abs(y_p(i, c) - y(perm[i], c)));
    expect(worst < 1e-10, "encode is not permutation equivariant");
  }

  // Checkpoint round trip and seed determinism of pretraining.
  TrainConfig cfg = TrainConfig::desk();
  cfg.dim = 6;
  cfg.batch_size = 4;
  cfg.steps = 3;
  cfg.seed = 8;
  std::vector<PreparedGraph> corpus;
  Rng prog_rng(3);
  for (int i = 0; i < 5; ++i)
    corpus.push_back(PreparedGraph::make(parse_demo_source(generate_program(ProgramFamily::mixed, prog_rng), cfg.caps()), cfg));
  const PretrainResult a = pretrain(corpus, cfg);
  const PretrainResult b = pretrain(corpus, cfg);
  const Checkpoint ca = make_checkpoint(a);
  expect(ca == make_checkpoint(b), "pretraining is not seed-deterministic");
  std::ostringstream bytes(std::ios::binary);
  write_checkpoint(bytes, ca);
  std::istringstream in(bytes.str(), std::ios::binary);
  const Checkpoint back = read_checkpoint(in);
  std::ostringstream again(std::ios::binary);
  write_checkpoint(again, back);
  expect(back == ca && again.str() == bytes.str(), "checkpoint round trip is not bit-identical");

  std::string detail = failures.empty() ? "all properties held on 50 random trees plus checkpoint and seed checks"
                                        : failures.front() + " (" + std::to_string(failures.size()) + " violations)";
  return {failures.empty(), detail};
}

void report(const char* id, const char* name, const Outcome& o, bool& all_pass) {
  std::printf("%s %s %s: %s\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  std::fflush(stdout);
  all_pass = all_pass && o.pass;
}

}  // namespace

int main() {
  bool all_pass = true;
  report("A1", "gradient fidelity", gradient_fidelity(), all_pass);

  const HierarchySetup setup;
  const Pretrained full = pretrain_and_evaluate(setup, setup.cfg);
  report("A2", "hierarchy separation", hierarchy_separation(full), all_pass);
  report("A3", "downstream smoke", downstream_smoke(full.model), all_pass);
  report("A4", "loss oracles", loss_oracles(), all_pass);
  report("A5", "structural invariants", structural_invariants(), all_pass);
  report("A6", "ablation direction", ablation_direction(setup, full), all_pass);
  return all_pass ? 0 : 1;
}
