#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "heloc/demo_parser.hpp"
#include "heloc/error.hpp"
#include "heloc/hcl.hpp"
#include "support.hpp"

using namespace heloc;
using heloc::testing::RefTriple;

namespace {

Tensor2 random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor2 t(r, c);
  for (double& v : t.data()) v = rng.uniform(-scale, scale);
  return t;
}

std::vector<std::vector<double>> rows_of(const Tensor2& t) {
  std::vector<std::vector<double>> out;
  for (std::size_t r = 0; r < t.rows(); ++r) out.emplace_back(t.row(r).begin(), t.row(r).end());
  return out;
}

TripletBatch batch_of(std::vector<Triplet> triples, std::vector<int> gaps) {
  TripletBatch b;
  b.triples = std::move(triples);
  b.delta_l = std::move(gaps);
  return b;
}

TrainConfig tiny_config() {
  TrainConfig cfg = TrainConfig::desk();
  cfg.dim = 8;
  cfg.layers = 2;
  cfg.batch_size = 4;
  cfg.steps = 3;
  cfg.lr = 1e-2;
  cfg.seed = 5;
  return cfg;
}

std::vector<PreparedGraph> tiny_corpus(const TrainConfig& cfg) {
  std::vector<PreparedGraph> corpus;
  for (const char* src : {"fn f(a){ a = a + 1; return a; }", "fn g(){ while (i < 3) { i = i + 1; } }",
                          "fn h(x){ if (x == 1) { print(x); } else { x = 2; } }"})
    corpus.push_back(PreparedGraph::make(parse_demo_source(src, cfg.caps()), cfg));
  return corpus;
}

}  // namespace

TEST_CASE("nep_logits") {
  TrainConfig cfg = tiny_config();
  Rng rng(1);
  HclParams p = HclParams::init(cfg, rng);
  CHECK(p.w_ast.value.rows() == 8);
  CHECK(p.w_ast.value.cols() == 9);
  CHECK(p.theta_p.value == Tensor2(1, 1));
  CHECK(p.tau_p.value == Tensor2(1, 1));
  p.w_ast.value.fill(0.0);
  CHECK(nep_logits(random_tensor(5, 8, rng), p) == Tensor2(5, 9));
  const Tensor2 one = nep_logits(random_tensor(1, 8, rng), p);
  CHECK(one.rows() == 1);
  CHECK(one.cols() == 9);
}

TEST_CASE("nep_loss") {
  const std::vector<int> levels{0, 3, 2, 1};
  CHECK(nep_loss(Tensor2(4, 5), levels) == doctest::Approx(4 * std::log(5.0)).epsilon(1e-14));
  CHECK(nep_loss(Tensor2::from_rows({{0, 0}, {0, std::log(3.0)}}), std::vector<int>{0, 1}) ==
        doctest::Approx(std::log(2.0) + std::log(4.0 / 3.0)).epsilon(1e-14));
  CHECK(nep_loss(Tensor2::from_rows({{200, 0, 0}}), std::vector<int>{0}) < 1e-80);
  CHECK_THROWS_AS(nep_loss(Tensor2(2, 3), std::vector<int>{0, 3}), DomainError);
  CHECK_THROWS_AS(nep_loss(Tensor2(2, 3), std::vector<int>{0}), ShapeError);
}

TEST_CASE("nro_loss") {
  const double margin = 1.0;
  const Tensor2 a = Tensor2::from_rows({{0, 0}, {1, 0}, {0, 2}});
  CHECK(nro_loss(a, batch_of({{0, 1, 2}}, {1}), margin) == 0.0);
  const Tensor2 b = Tensor2::from_rows({{0, 0}, {2, 0}, {1, 0}});
  CHECK(nro_loss(b, batch_of({{0, 1, 2}}, {2}), margin) == 6.0);
  CHECK(nro_loss(b, TripletBatch{}, margin) == 0.0);
  // Anchor on its positive with a far negative: the hinge floors at zero.
  const Tensor2 c = Tensor2::from_rows({{0, 0}, {0, 0}, {3, 0}});
  CHECK(nro_loss(c, batch_of({{0, 1, 2}}, {2}), margin) == 0.0);
  CHECK_THROWS_AS(nro_loss(c, batch_of({{0, 1, 5}}, {1}), margin), ShapeError);
}

TEST_CASE("joint_loss") {
  CHECK(joint_loss(1.5, 2.25, 0.0, 0.0) == 3.75);
  CHECK(joint_loss(0.0, 0.0, 1.0, 1.0) == 2.0);
  CHECK(joint_loss(2.0, 3.0, 0.5, -0.25) ==
        doctest::Approx(2.0 * std::exp(-1.0) + 3.0 * std::exp(0.5) + 0.25).epsilon(1e-14));

  Param theta(Tensor2(1, 1, 0.3)), tau(Tensor2(1, 1, -0.2));
  const double l_h = 2.5, l_t = 0.7;
  Tape tape;
  tape.backward(joint_loss(tape.constant(Tensor2(1, 1, l_h)), tape.constant(Tensor2(1, 1, l_t)),
                           tape.param(theta), tape.param(tau)));
  CHECK(theta.grad[0] == doctest::Approx(-2.0 * std::exp(-0.6) * l_h + 1.0).epsilon(1e-14));
  CHECK(tau.grad[0] == doctest::Approx(-2.0 * std::exp(0.4) * l_t + 1.0).epsilon(1e-14));
  const auto r = finite_diff_check(
      [&](Tape& t) {
        return joint_loss(t.constant(Tensor2(1, 1, l_h)), t.constant(Tensor2(1, 1, l_t)), t.param(theta),
                          t.param(tau));
      },
      std::vector<Param*>{&theta, &tau});
  CHECK(r.max_rel_error < 1e-8);
}

TEST_CASE("property: losses against direct evaluation") {
  Rng rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.index(12), c = 2 + rng.index(8), h = 1 + rng.index(6);
    const Tensor2 logits = random_tensor(n, c, rng, 5.0);
    std::vector<int> levels(n);
    for (int& l : levels) l = static_cast<int>(rng.index(c));
    const double nep = nep_loss(logits, levels);
    CHECK(nep >= 0.0);
    CHECK(std::abs(nep - heloc::testing::reference_nep_loss(rows_of(logits), levels)) <= 1e-9 * std::max(1.0, nep));

    const Tensor2 x = random_tensor(n, h, rng, 2.0);
    TripletBatch batch;
    std::vector<RefTriple> ref;
    for (std::size_t t = 0; t < 1 + rng.index(8); ++t) {
      const std::size_t a = rng.index(n), p = rng.index(n), q = rng.index(n);
      const int gap = 1 + static_cast<int>(rng.index(4));
      batch.triples.push_back({a, p, q});
      batch.delta_l.push_back(gap);
      ref.push_back({a, p, q, gap});
    }
    const double margin = rng.uniform(0.0, 2.0);
    const double nro = nro_loss(x, batch, margin);
    CHECK(nro >= 0.0);
    CHECK(std::abs(nro - heloc::testing::reference_nro_loss(rows_of(x), ref, margin)) <= 1e-9 * std::max(1.0, nro));
    CHECK(joint_loss(nep, nro, 0.0, 0.0) == nep + nro);
  }
}

TEST_CASE("adam_step") {
  SUBCASE("first step moves by the learning rate") {
    Param w(Tensor2(1, 1, 1.0));
    w.grad = Tensor2(1, 1, 2.0);
    AdamState state;
    std::vector<Param*> ps{&w};
    adam_step(ps, state, AdamOptions{0.1});
    CHECK(w.value[0] == doctest::Approx(0.9).epsilon(1e-9));
    CHECK(state.t == 1);
  }
  SUBCASE("zero gradients leave params alone") {
    Param w(Tensor2::from_rows({{0.5, -1.0}}));
    AdamState state;
    std::vector<Param*> ps{&w};
    for (int i = 0; i < 3; ++i) adam_step(ps, state, AdamOptions{});
    CHECK(w.value == Tensor2::from_rows({{0.5, -1.0}}));
  }
  SUBCASE("param list must stay fixed") {
    Param a(Tensor2(1, 1)), b(Tensor2(1, 1));
    AdamState state;
    std::vector<Param*> one{&a}, two{&a, &b};
    adam_step(one, state, AdamOptions{});
    CHECK_THROWS_AS(adam_step(two, state, AdamOptions{}), ShapeError);
  }
}

TEST_CASE("full objective gradient") {
  // Ten nodes over four levels with several same-level peers.
  const AstGraph g = heloc::testing::tree_from_parents({-1, 0, 0, 0, 1, 1, 2, 4, 4, 6});
  TrainConfig cfg = tiny_config();
  const PreparedGraph pg = PreparedGraph::make(g, cfg);
  Rng rng(9);
  HclParams params = HclParams::init(cfg, rng);
  params.theta_p.value[0] = 0.2;
  params.tau_p.value[0] = -0.1;
  const TripletBatch triples = sample_triplets(g, 10, rng);
  REQUIRE(!triples.empty());
  const auto r = finite_diff_check([&](Tape& t) { return graph_objective(t, pg, params, triples, cfg).total; },
                                   params.all(), 1e-5);
  INFO("worst param " << params.named()[r.worst_param].first << " analytic " << r.analytic << " numeric "
                      << r.numeric);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("graph objective drops disabled terms") {
  const AstGraph g = heloc::testing::Figure1::tree();
  TrainConfig cfg = tiny_config();
  const PreparedGraph pg = PreparedGraph::make(g, cfg);
  Rng rng(3);
  HclParams params = HclParams::init(cfg, rng);
  params.theta_p.value[0] = 0.5;
  params.tau_p.value[0] = 0.25;
  const TripletBatch triples = sample_triplets(g, 7, rng);
  Tape tape;
  const LossTerms both = graph_objective(tape, pg, params, triples, cfg);
  CHECK(both.total.scalar() ==
        doctest::Approx(joint_loss(both.l_h.scalar(), both.l_t.scalar(), 0.5, 0.25)).epsilon(1e-14));

  cfg.no_nro = true;
  const LossTerms nep_only = graph_objective(tape, pg, params, triples, cfg);
  CHECK(nep_only.l_t.scalar() == 0.0);
  CHECK(nep_only.total.scalar() == doctest::Approx(std::exp(-1.0) * nep_only.l_h.scalar() + 0.5).epsilon(1e-14));

  cfg.no_nro = false;
  cfg.no_nep = true;
  const LossTerms nro_only = graph_objective(tape, pg, params, triples, cfg);
  CHECK(nro_only.l_h.scalar() == 0.0);
  CHECK(nro_only.total.scalar() == doctest::Approx(std::exp(-0.5) * nro_only.l_t.scalar() + 0.25).epsilon(1e-14));
}

TEST_CASE("pretrain") {
  TrainConfig cfg = tiny_config();
  const auto corpus = tiny_corpus(cfg);

  SUBCASE("zero steps returns the initialization") {
    cfg.steps = 0;
    const PretrainResult r = pretrain(corpus, cfg);
    Rng rng(cfg.seed);
    const HclParams init = HclParams::init(cfg, rng);
    CHECK(r.log.empty());
    const auto got = r.params.named();
    const auto want = init.named();
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].second->value == want[i].second->value);
  }
  SUBCASE("first logged loss is the plain sum of both objectives") {
    cfg.batch_size = 1;
    std::vector<PreparedGraph> one;
    one.push_back(corpus[0]);
    const PretrainResult r = pretrain(one, cfg);
    REQUIRE(r.log.size() == 3);
    const TrainLogRow& first = r.log[0];
    CHECK(first.theta_p == 0.0);
    CHECK(first.loss == doctest::Approx(first.l_h + first.l_t).epsilon(1e-14));

    Rng rng(cfg.seed);
    const HclParams init = HclParams::init(cfg, rng);
    CHECK(rng.index(1) == 0);
    const AstGraph& g = one[0].graph;
    const TripletBatch triples = sample_triplets(g, std::min(g.size(), cfg.triplets_per_graph), rng);
    const Tensor2 x = encode_graph(one[0], init.encoder, cfg);
    CHECK(first.l_h == doctest::Approx(nep_loss(nep_logits(x, init), g.levels())).epsilon(1e-12));
    CHECK(first.l_t == doctest::Approx(nro_loss(x, triples, cfg.margin)).epsilon(1e-12));
  }
  SUBCASE("deterministic across runs and thread counts") {
    const PretrainResult a = pretrain(corpus, cfg);
    ::setenv("HELOC_THREADS", "1", 1);
    const PretrainResult b = pretrain(corpus, cfg);
    ::unsetenv("HELOC_THREADS");
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].loss == b.log[i].loss);
    CHECK(a.params.w_ast.value == b.params.w_ast.value);
    CHECK(a.rng_state == b.rng_state);
  }
  SUBCASE("training lowers the loss") {
    cfg.steps = 60;
    const PretrainResult r = pretrain(corpus, cfg);
    double early = 0.0, late = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
      early += r.log[i].loss;
      late += r.log[r.log.size() - 1 - i].loss;
    }
    CHECK(late < early);
  }
  SUBCASE("no training signal") {
    TrainConfig off = cfg;
    off.no_nep = true;
    off.no_nro = true;
    CHECK_THROWS_AS(pretrain(corpus, off), NoSignalError);
    TrainConfig nro_only = cfg;
    nro_only.no_nep = true;
    std::vector<PreparedGraph> chains;
    chains.push_back(PreparedGraph::make(heloc::testing::chain4(), cfg));
    CHECK_THROWS_AS(pretrain(chains, nro_only), NoSignalError);
    CHECK_NOTHROW(pretrain(corpus, nro_only));
    CHECK_THROWS_AS(pretrain({}, cfg), DomainError);
  }
  SUBCASE("trees deeper than the level head") {
    TrainConfig shallow = cfg;
    shallow.max_depth = 2;
    CHECK_THROWS_AS(PreparedGraph::make(heloc::testing::chain4(), shallow), CapError);
  }
}
