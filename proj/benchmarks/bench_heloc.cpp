#include <benchmark/benchmark.h>

#include <vector>

#include "heloc/demo_parser.hpp"
#include "heloc/downstream.hpp"
#include "heloc/hcl.hpp"
#include "heloc/synth.hpp"

using namespace heloc;

namespace {

std::vector<PreparedGraph> corpus(std::size_t count, const TrainConfig& cfg) {
  Rng rng(42);
  std::vector<PreparedGraph> out;
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(PreparedGraph::make(parse_demo_source(generate_program(ProgramFamily::mixed, rng, 6), cfg.caps()), cfg));
  return out;
}

void BM_Parse(benchmark::State& state) {
  Rng rng(1);
  const std::string src = generate_program(ProgramFamily::mixed, rng, 6);
  for (auto _ : state) benchmark::DoNotOptimize(parse_demo_source(src));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * src.size()));
}
BENCHMARK(BM_Parse);

void BM_Prepare(benchmark::State& state) {
  const TrainConfig cfg = TrainConfig::desk();
  Rng rng(2);
  const AstGraph g = parse_demo_source(generate_program(ProgramFamily::mixed, rng, 6));
  for (auto _ : state) benchmark::DoNotOptimize(PreparedGraph::make(g, cfg));
}
BENCHMARK(BM_Prepare);

// Arg: model dimension.
void BM_Encode(benchmark::State& state) {
  TrainConfig cfg = TrainConfig::desk();
  cfg.dim = static_cast<std::size_t>(state.range(0));
  const auto graphs = corpus(1, cfg);
  Rng rng(3);
  const HclParams params = HclParams::init(cfg, rng);
  for (auto _ : state) benchmark::DoNotOptimize(encode_graph(graphs[0], params.encoder, cfg));
  state.counters["nodes"] = static_cast<double>(graphs[0].graph.size());
}
BENCHMARK(BM_Encode)->Arg(16)->Arg(32)->Arg(64);

void BM_TrainStep(benchmark::State& state) {
  TrainConfig cfg = TrainConfig::desk();
  cfg.steps = 1;
  const auto graphs = corpus(32, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(pretrain(graphs, cfg));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * cfg.batch_size));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

// Arg: number of points.
void BM_KMeans(benchmark::State& state) {
  Rng rng(4);
  std::vector<std::vector<double>> points(static_cast<std::size_t>(state.range(0)), std::vector<double>(32));
  for (auto& p : points)
    for (double& v : p) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(kmeans(points, 8, 5));
}
BENCHMARK(BM_KMeans)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
