#include <benchmark/benchmark.h>

#include <map>
#include <memory>

#include "kgqa/gnn/gnn_model.hpp"
#include "kgqa/kg/paths.hpp"
#include "kgqa/pipeline/synthetic.hpp"
#include "kgqa/pipeline/vocab.hpp"
#include "kgqa/reasoner/subgraph.hpp"
#include "kgqa/scorer/text_encoder.hpp"

using namespace kgqa;

namespace {

// One synthetic benchmark and model per graph size, built on first use.
struct Setup {
  SyntheticBenchmark bench;
  std::shared_ptr<const TokenProvider> provider;
  std::unique_ptr<GnnModel> gnn;
  GraphIndex graph;

  explicit Setup(std::size_t entities) {
    SyntheticConfig sc;
    sc.entities = entities;
    sc.triples = 3 * entities;
    sc.train = 20;
    sc.valid = 0;
    sc.test = 0;
    bench = generate_synthetic(sc);
    provider = std::make_shared<const TokenProvider>(
        TokenProvider::trainable(corpus_vocabulary(bench.kg, std::span<const QaExample>(bench.train)), 32));
    gnn = std::make_unique<GnnModel>(provider, GnnConfig{.layers = 2, .dim = 32});
    graph = GraphIndex::build(bench.kg, *provider);
  }
};

Setup& setup(std::size_t entities) {
  static std::map<std::size_t, std::unique_ptr<Setup>> cache;
  auto& s = cache[entities];
  if (!s) s = std::make_unique<Setup>(entities);
  return *s;
}

void BM_GnnForward(benchmark::State& state) {
  auto& s = setup(static_cast<std::size_t>(state.range(0)));
  const auto& ex = s.bench.train.front();
  for (auto _ : state) benchmark::DoNotOptimize(s.gnn->distances(s.graph, ex, s.bench.kg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.bench.kg.triple_count()));
}
BENCHMARK(BM_GnnForward)->Arg(500)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_GnnForwardBackward(benchmark::State& state) {
  auto& s = setup(static_cast<std::size_t>(state.range(0)));
  const auto& ex = s.bench.train.front();
  nn::Rng rng(1);
  const auto pairs = GnnModel::sample_pairs(ex.answers, s.bench.kg.entity_count(), 32, rng);
  for (auto _ : state) {
    nn::Tape tape;
    const auto f = s.gnn->forward(tape, s.graph, ex, s.bench.kg);
    s.gnn->params().zero_grad();
    tape.backward(GnnModel::rank_loss(f.distances, pairs, 1.0));
  }
}
BENCHMARK(BM_GnnForwardBackward)->Arg(500)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_PathExtract(benchmark::State& state) {
  auto& s = setup(500);
  const auto len = static_cast<std::size_t>(state.range(0));
  std::uint32_t i = 0;
  for (auto _ : state) {
    const EntityId a{i % 500}, b{(i * 7 + 3) % 500};
    benchmark::DoNotOptimize(path_extract(s.bench.kg, a, b, len));
    ++i;
  }
}
BENCHMARK(BM_PathExtract)->Arg(2)->Arg(3);

void BM_ExpressionSet(benchmark::State& state) {
  auto& s = setup(500);
  const auto& ex = s.bench.train.front();
  std::vector<EntityId> cands;
  for (const auto& c : select_candidates(s.gnn->distances(s.graph, ex, s.bench.kg), 10)) {
    cands.push_back(c.entity);
  }
  for (auto _ : state) {
    const auto subs = extract_candidates(s.bench.kg, cands, ex.topic_entities, 2, false);
    benchmark::DoNotOptimize(build_expression_set(subs, ex.question, ex.topic_entities, s.bench.kg));
  }
}
BENCHMARK(BM_ExpressionSet);

void BM_TextEncodeBatch(benchmark::State& state) {
  auto& s = setup(500);
  TextEncoder enc(s.provider, {.dim = 32});
  std::vector<std::string> texts;
  for (const auto& ex : s.bench.train) texts.push_back(ex.question);
  for (auto _ : state) {
    nn::Tape tape;
    const TextEncoder::Bound bound(tape, enc);
    benchmark::DoNotOptimize(bound.encode_batch(texts).value());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(texts.size()));
}
BENCHMARK(BM_TextEncodeBatch);

}  // namespace

BENCHMARK_MAIN();
