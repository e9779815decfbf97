#include <benchmark/benchmark.h>

#include "attrevo/evolution.hpp"
#include "attrevo/mutation.hpp"
#include "attrevo/oracle.hpp"

namespace {

using namespace attrevo;

struct Bench {
  OracleWorld world = OracleWorld::build({});
  OracleEmbeddingBackend backend{world};
  TextEmbedder embedder{backend, TemplateSet::single_default()};
  EmbeddingStore train = world.generate(50, SplitTag::Train);
  Scorer scorer{train, embedder};
  JointObjective objective{scorer, kDefaultScoreTemperature};
  std::vector<Attribute> pool;
  Bench() {
    for (const auto& v : world.vocab()) pool.push_back(canonicalize(v));
    embedder.warm(world.vocab());
  }
  static Bench& get() {
    static Bench b;
    return b;
  }
};

void BM_JointLoss(benchmark::State& st) {
  auto& b = Bench::get();
  Rng rng(1);
  const auto bank = init_bank(b.pool, EngineConfig{}, b.objective, rng);
  const Classifier& c = bank.best();
  for (auto _ : st) benchmark::DoNotOptimize(b.objective.loss(c));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(b.train.size()));
}
BENCHMARK(BM_JointLoss);

void BM_ScoreTable(benchmark::State& st) {
  auto& b = Bench::get();
  const Classifier truth = b.world.truth_classifier();
  for (auto _ : st) benchmark::DoNotOptimize(b.scorer.score_table(truth, kDefaultScoreTemperature));
}
BENCHMARK(BM_ScoreTable);

void BM_EvolutionStep(benchmark::State& st) {
  auto& b = Bench::get();
  MockCompletionClient llm(b.world.vocab(), MockPolicy::SampleBest);
  const Mutator mutator(llm, {});
  EngineConfig cfg;
  cfg.seed = 3;
  cfg.max_iterations = 1u << 30;
  cfg.patience = 1u << 30;
  Rng rng(cfg.seed);
  auto state = EngineState::start(cfg, init_bank(b.pool, cfg, b.objective, rng), rng);
  for (auto _ : st) benchmark::DoNotOptimize(evolution_step(state, mutator, b.objective));
}
BENCHMARK(BM_EvolutionStep)->Unit(benchmark::kMillisecond);

void BM_ParseAttributes(benchmark::State& st) {
  std::string text = "Here are the attributes:\n";
  for (int i = 0; i < 10; ++i) text += std::to_string(i + 1) + ". Speckled  Amber cap number " + std::to_string(i) + "\n";
  for (auto _ : st) benchmark::DoNotOptimize(parse_attributes(text));
}
BENCHMARK(BM_ParseAttributes);

void BM_BuildPrompt(benchmark::State& st) {
  auto& b = Bench::get();
  std::vector<ScoredSet> history;
  for (std::size_t i = 0; i < 10; ++i) history.push_back({b.world.truth_set(i % 5).with_class_id(0), 1.0 / (1.0 + static_cast<double>(i))});
  for (auto _ : st) benchmark::DoNotOptimize(build_prompt(history, {}));
}
BENCHMARK(BM_BuildPrompt);

}  // namespace
BENCHMARK_MAIN();
