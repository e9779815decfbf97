#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "attrevo/error.hpp"
#include "attrevo/evalkit.hpp"
#include "attrevo/evolution.hpp"
#include "attrevo/oracle.hpp"
#include "test_support.hpp"

namespace attrevo {
namespace {

using testing::ScriptedCompletion;
using testing::set_of;

// Loss = number of classes whose set lacks the word "good", plus a small
// penalty per attribute so ties are rare.
class CountingObjective final : public Objective {
 public:
  explicit CountingObjective(std::size_t classes) : classes_(classes) {}
  [[nodiscard]] double loss(const Classifier& c) const override {
    double l = 0;
    for (const auto& s : c.sets()) {
      l += s.contains(canonicalize("good")) ? 0.0 : 1.0;
      l += 0.01 * static_cast<double>(s.size());
    }
    return l;
  }
  [[nodiscard]] std::size_t class_count() const override { return classes_; }

 private:
  std::size_t classes_;
};

std::vector<Attribute> pool_of(std::size_t n) {
  std::vector<Attribute> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(canonicalize("word " + std::to_string(i)));
  return out;
}

ClassifierBank bank_with_losses(const std::vector<double>& losses) {
  ClassifierBank bank;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    bank.insert(Classifier({set_of(0, {"x"})}, static_cast<int>(i)).with_loss(losses[i]));
  }
  return bank;
}

std::vector<std::size_t> draw_counts(const ClassifierBank& bank, std::size_t draws, double t, Rng& rng) {
  std::map<int, std::size_t> by_born;
  for (std::size_t done = 0; done < draws; done += 10) {
    for (const auto& c : sample_hypotheses(bank, 10, t, SamplingBias::Best, rng)) ++by_born[c.iteration_born()];
  }
  std::vector<std::size_t> out(bank.size(), 0);
  for (const auto& [born, n] : by_born) out[static_cast<std::size_t>(born)] = n;
  return out;
}

TEST(InitBank, ForcedDrawUsesWholePool) {
  EngineConfig cfg;
  cfg.initial_hypotheses = 1;
  Rng rng(1);
  const auto pool = pool_of(10);
  const auto bank = init_bank(pool, cfg, CountingObjective(3), rng);
  ASSERT_EQ(bank.size(), 1u);
  for (const auto& s : bank.entries()[0].sets()) {
    auto got = s.attributes();
    std::sort(got.begin(), got.end());
    auto want = pool;
    std::sort(want.begin(), want.end());
    EXPECT_EQ(got, want);
  }
}

TEST(InitBank, SameSeedSameBankAndAllScored) {
  EngineConfig cfg;
  const auto pool = pool_of(60);
  Rng a(5), b(5);
  const auto x = init_bank(pool, cfg, CountingObjective(4), a);
  const auto y = init_bank(pool, cfg, CountingObjective(4), b);
  EXPECT_EQ(x, y);
  EXPECT_EQ(x.size(), 20u);
  for (const auto& c : x.entries()) EXPECT_TRUE(c.loss().has_value());
}

TEST(InitBank, PoolTooSmall) {
  EngineConfig cfg;
  Rng rng(1);
  auto pool = pool_of(9);
  pool.push_back(pool[0]);  // duplicates do not count
  try {
    (void)init_bank(pool, cfg, CountingObjective(2), rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PoolTooSmall);
  }
}

// At the default score temperature chance gaps between random class scores
// are blown up into confident wrong predictions, so the loss sits well above
// ln C; at unit temperature it is close to ln C.
TEST(InitBank, RandomSetsAreUninformativeOnShuffledLabels) {
  const auto world = OracleWorld::build({});
  OracleEmbeddingBackend backend(world);
  TextEmbedder embedder(backend, TemplateSet::single_default());
  const auto train = world.generate(50, SplitTag::Train);
  std::vector<int> labels = train.labels();
  Rng shuffle(9);
  for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[shuffle.below(i)]);
  const auto shuffled = EmbeddingStore::create(train.dim(), 5, SplitTag::Train, train.data(), labels);
  Scorer scorer(shuffled, embedder);
  const JointObjective sharp(scorer, 0.01);
  const JointObjective flat(scorer, 1.0);
  std::vector<Attribute> pool;
  for (const auto& v : world.vocab()) pool.push_back(canonicalize(v));
  Rng rng(3);
  const auto bank = init_bank(pool, {}, flat, rng);
  ASSERT_EQ(bank.size(), 20u);
  for (const auto& c : bank.entries()) {
    EXPECT_NEAR(*c.loss(), std::log(5.0), 0.5);
    EXPECT_GT(sharp.loss(c), std::log(5.0));
    EXPECT_NEAR(accuracy(c, scorer), 0.2, 0.12);
  }
}

TEST(Sampling, SortedWorstFirstWithReplacement) {
  const auto bank = bank_with_losses({0.3, 0.1, 0.9});
  Rng rng(2);
  const auto s = sample_hypotheses(bank, 10, 1.0, SamplingBias::Best, rng);
  ASSERT_EQ(s.size(), 10u);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_GE(*s[i - 1].loss(), *s[i].loss());
}

TEST(Sampling, EqualLossesAreUniform) {
  const auto bank = bank_with_losses(std::vector<double>(10, 0.5));
  Rng rng(4);
  const auto counts = draw_counts(bank, 10000, 0.05, rng);
  double chi2 = 0;
  for (std::size_t n : counts) chi2 += std::pow(static_cast<double>(n) - 1000.0, 2) / 1000.0;
  EXPECT_LT(chi2, 16.919);  // chi-square 0.95 quantile, 9 degrees of freedom
}

TEST(Sampling, LowLossDominatesAtUnitTemperature) {
  const auto bank = bank_with_losses({0.1, 100.0});
  Rng rng(6);
  const auto counts = draw_counts(bank, 10000, 1.0, rng);
  EXPECT_GT(static_cast<double>(counts[0]) / 10000.0, 0.999);
}

TEST(Sampling, HugeTemperatureApproachesUniform) {
  const auto bank = bank_with_losses({0.1, 0.5, 1.0, 2.0, 4.0});
  Rng rng(8);
  const auto counts = draw_counts(bank, 10000, 1e6, rng);
  double kl = 0;
  for (std::size_t n : counts) {
    const double p = static_cast<double>(n) / 10000.0;
    if (p > 0) kl += p * std::log(p / 0.2);
  }
  EXPECT_LT(kl, 0.01);
}

TEST(Sampling, ProbabilitiesMatchClosedForm) {
  const auto bank = bank_with_losses({0.2, 0.3});
  const auto p = sampling_probabilities(bank, 0.05, SamplingBias::Best);
  const double expect0 = 1.0 / (1.0 + std::exp(-(0.3 - 0.2) / 0.05));
  EXPECT_NEAR(p[0], expect0, 1e-12);
  const auto w = sampling_probabilities(bank, 0.05, SamplingBias::Worst);
  EXPECT_NEAR(w[0], 1.0 - expect0, 1e-12);
}

TEST(Sampling, BiasNamesRoundTrip) {
  EXPECT_EQ(sampling_bias_from_string("best"), SamplingBias::Best);
  EXPECT_EQ(sampling_bias_from_string("worst"), SamplingBias::Worst);
  EXPECT_THROW((void)sampling_bias_from_string("middle"), Error);
}

EngineState small_state(std::size_t classes, std::uint64_t seed, EngineConfig cfg = {}) {
  cfg.seed = seed;
  cfg.initial_set_size = 3;
  Rng rng(seed);
  const auto bank = init_bank(pool_of(30), cfg, CountingObjective(classes), rng);
  return EngineState::start(cfg, bank, rng);
}

// Echoes the best (last) example set of the prompt.
std::string echo_best(const CompletionRequest& r, std::size_t) {
  const auto blocks = parse_prompt_examples(r.prompt);
  return testing::numbered(blocks.back());
}

TEST(Step, EchoingMutatorKeepsBestLoss) {
  auto state = small_state(3, 1);
  const double before = state.bank.best_loss();
  ScriptedCompletion llm(echo_best);
  const Mutator m(llm, {});
  CountingObjective obj(3);
  for (int i = 0; i < 5; ++i) {
    const auto rec = evolution_step(state, m, obj);
    EXPECT_DOUBLE_EQ(rec.best_loss, before);
  }
}

TEST(Step, GoodSetLowersBestLossAndCallsOncePerClass) {
  auto state = small_state(5, 2);
  const double before = state.bank.best_loss();
  ScriptedCompletion llm([](const CompletionRequest&, std::size_t) { return std::string("1. good\n"); });
  const Mutator m(llm, {});
  const auto rec = evolution_step(state, m, CountingObjective(5));
  EXPECT_EQ(llm.calls(), 5u);
  EXPECT_LT(rec.best_loss, before);
  EXPECT_EQ(rec.iteration, 1u);
  EXPECT_EQ(state.iteration, 1u);
  EXPECT_LE(rec.bank_size, 20u + 5u);
}

TEST(Step, OracleTruthSetStrictlyImproves) {
  const auto world = OracleWorld::build({});
  OracleEmbeddingBackend backend(world);
  TextEmbedder embedder(backend, TemplateSet::single_default());
  const auto train = world.generate(20, SplitTag::Train);
  Scorer scorer(train, embedder);
  const JointObjective obj(scorer, 0.01);
  std::vector<Attribute> pool;
  for (const auto& v : world.vocab()) pool.push_back(canonicalize(v));
  EngineConfig cfg;
  Rng rng(4);
  // Best entry knows every class except 2, which holds class 0's attributes.
  auto bank = init_bank(pool, cfg, obj, rng);
  std::vector<AttributeSet> sets;
  for (int c = 0; c < 5; ++c) sets.push_back(world.truth_set(c == 2 ? 0u : static_cast<std::size_t>(c)).with_class_id(c));
  const Classifier partial(sets);
  bank.insert(partial.with_loss(obj.loss(partial)));
  auto state = EngineState::start(cfg, std::move(bank), rng);
  const double before = state.bank.best_loss();
  const std::string truth2 = render_set(world.truth_set(2));
  ScriptedCompletion llm([&](const CompletionRequest& r, std::size_t call) {
    return call == 2 ? truth2 : echo_best(r, call);
  });
  const Mutator m(llm, {});
  EXPECT_LT(evolution_step(state, m, obj).best_loss, before);
}

TEST(Step, UnparsableClassIsSkipped) {
  auto state = small_state(3, 3);
  ScriptedCompletion llm([](const CompletionRequest& r, std::size_t call) {
    return call < 3 ? std::string("no idea") : echo_best(r, call);
  });
  MutationConfig mc;
  const Mutator m(llm, mc);
  const auto rec = evolution_step(state, m, CountingObjective(3));
  EXPECT_FALSE(rec.candidate_loss[0].has_value());
  EXPECT_TRUE(rec.candidate_loss[1].has_value());
  EXPECT_TRUE(rec.candidate_loss[2].has_value());
}

TEST(Step, BackendErrorsPropagate) {
  auto state = small_state(2, 3);
  ScriptedCompletion llm([](const CompletionRequest&, std::size_t) -> std::string {
    throw Error(Errc::BackendUnavailable, "down");
  });
  const Mutator m(llm, {});
  EXPECT_THROW((void)evolution_step(state, m, CountingObjective(2)), Error);
}

TEST(Run, RejectsZeroIterations) {
  auto state = small_state(2, 1);
  state.config.max_iterations = 0;
  ScriptedCompletion llm(echo_best);
  const Mutator m(llm, {});
  try {
    (void)run(state, m, CountingObjective(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidConfig);
  }
}

TEST(Run, PatienceStopsAPlateau) {
  EngineConfig cfg;
  cfg.patience = 5;
  auto state = small_state(2, 1, cfg);
  ScriptedCompletion llm(echo_best);
  const Mutator m(llm, {});
  (void)run(state, m, CountingObjective(2));
  EXPECT_LE(state.iteration, 6u);
  EXPECT_GE(state.iteration, 5u);
}

TEST(Run, CheckpointCadence) {
  EngineConfig cfg;
  cfg.max_iterations = 25;
  cfg.patience = 100;
  cfg.checkpoint_interval = 10;
  auto state = small_state(2, 1, cfg);
  ScriptedCompletion llm(echo_best);
  const Mutator m(llm, {});
  std::vector<std::size_t> at;
  RunHooks hooks;
  hooks.checkpoint = [&](const EngineState& s) { at.push_back(s.iteration); };
  (void)run(state, m, CountingObjective(2), hooks);
  EXPECT_EQ(at, (std::vector<std::size_t>{1, 10, 20, 25}));
}

struct OracleRun {
  OracleWorld world = OracleWorld::build({});
  OracleEmbeddingBackend backend{world};
  TextEmbedder embedder{backend, TemplateSet::single_default()};
  EmbeddingStore train = world.generate(50, SplitTag::Train);
  Scorer scorer{train, embedder};
  JointObjective objective{scorer, 0.01};
  std::vector<Attribute> pool;
  OracleRun() {
    for (const auto& v : world.vocab()) pool.push_back(canonicalize(v));
  }
  EngineState start(EngineConfig cfg) {
    Rng rng(cfg.seed);
    return EngineState::start(cfg, init_bank(pool, cfg, objective, rng), rng);
  }
};

TEST(Run, InvariantsHoldOnOracleRun) {
  OracleRun o;
  EngineConfig cfg;
  cfg.seed = 12;
  cfg.max_iterations = 60;
  cfg.capacity = std::nullopt;
  auto state = o.start(cfg);
  MockCompletionClient llm(o.world.vocab(), MockPolicy::SampleBest);
  const Mutator m(llm, {});
  double prev_best = state.bank.best_loss();
  std::size_t prev_size = state.bank.size();
  std::vector<Classifier> before = state.bank.entries();
  RunHooks hooks;
  hooks.on_iteration = [&](const EngineState& s, const IterationRecord& rec) {
    EXPECT_LE(rec.best_loss, prev_best);
    EXPECT_LE(s.bank.size(), prev_size + 5);
    for (const auto& c : s.bank.entries()) {
      if (c.iteration_born() != static_cast<int>(rec.iteration)) continue;
      const bool local = std::any_of(before.begin(), before.end(),
                                     [&](const Classifier& b) { return b.differing_classes(c) <= 1; });
      EXPECT_TRUE(local);
    }
    prev_best = rec.best_loss;
    prev_size = s.bank.size();
    before = s.bank.entries();
  };
  (void)run(state, m, o.objective, hooks);
  EXPECT_EQ(state.iteration, 60u);
}

TEST(Run, SameSeedSameResultRegardlessOfWorkers) {
  OracleRun o;
  MockCompletionClient llm(o.world.vocab(), MockPolicy::SampleBest);
  const Mutator m(llm, {});
  EngineConfig cfg;
  cfg.seed = 3;
  cfg.max_iterations = 30;
  auto a = o.start(cfg);
  auto b = o.start(cfg);
  cfg.workers = 4;
  auto c = o.start(cfg);
  (void)run(a, m, o.objective);
  (void)run(b, m, o.objective);
  (void)run(c, m, o.objective);
  EXPECT_EQ(a.bank, b.bank);
  EXPECT_EQ(a.rng, b.rng);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.bank, c.bank);
}

TEST(Run, ConvergesOnOracleWorld) {
  OracleRun o;
  MockCompletionClient llm(o.world.vocab(), MockPolicy::SampleBest);
  const Mutator m(llm, {});
  EngineConfig cfg;
  cfg.seed = 1;
  cfg.max_iterations = 300;
  cfg.patience = 300;
  auto state = o.start(cfg);
  const Classifier best = run(state, m, o.objective);
  EXPECT_GE(accuracy(best, o.scorer), 0.90);
}

}  // namespace
}  // namespace attrevo
