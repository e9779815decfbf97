#include <gtest/gtest.h>

#include <fstream>

#include "attrevo/config.hpp"
#include "attrevo/error.hpp"
#include "test_support.hpp"

namespace attrevo {
namespace {

using nlohmann::json;

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an attrevo::Error";
  return Errc::Io;
}

TEST(RunConfig, EmptyObjectGivesDefaults) {
  const RunConfig c = run_config_from_json(json::object());
  EXPECT_EQ(c.engine.initial_hypotheses, 20u);
  EXPECT_EQ(c.engine.samples_per_step, 10u);
  EXPECT_EQ(c.engine.max_iterations, 500u);
  EXPECT_EQ(c.engine.patience, 100u);
  EXPECT_EQ(c.engine.capacity, std::optional<std::size_t>(512));
  EXPECT_EQ(c.engine.bias, SamplingBias::Best);
  EXPECT_EQ(c.pretrain.engine.max_iterations, 200u);
  EXPECT_EQ(c.mutation.k, 10u);
  EXPECT_EQ(c.mutation.retry_limit, 3);
  EXPECT_FALSE(c.mutation.show_scores);
  EXPECT_DOUBLE_EQ(c.score_temperature, 0.01);
  EXPECT_EQ(c.templates, std::vector<std::string>{"a photo of {}"});
  EXPECT_EQ(c.completion.kind, "mock");
  EXPECT_EQ(c.embedding.kind, "oracle");
  EXPECT_DOUBLE_EQ(c.p_keep, 0.7);
}

TEST(RunConfig, UnknownKeysRejectedAtEveryLevel) {
  for (const json& bad : {json{{"sede", 1}}, json{{"paths", {{"trian", "x"}}}}, json{{"engine", {{"N", 20}}}},
                          json{{"pretrain", {{"iterations", 5}}}}, json{{"mutation", {{"prompt_length", 1}}}},
                          json{{"completion", {{"url", "x"}}}}}) {
    EXPECT_EQ(code_of([&] { (void)run_config_from_json(bad); }), Errc::InvalidConfig) << bad.dump();
  }
}

TEST(RunConfig, BadValuesRejected) {
  for (const json& bad :
       {json{{"engine", {{"max_iterations", 0}}}}, json{{"engine", {{"bias", "middle"}}}},
        json{{"engine", {{"samples_per_step", "ten"}}}}, json{{"mutation", {{"k", 0}}}},
        json{{"score_temperature", 0}}, json{{"templates", {"no placeholder"}}}, json{{"p_keep", 1.5}},
        json{{"completion", {{"kind", "http"}}}}, json{{"embedding", {{"kind", "fixture"}}}},
        json{{"completion", {{"kind", "carrier pigeon"}}}}, json{{"mock_policy", "telepathy"}},
        json{{"pretrain", {{"seed_decay", 0}}}}, json::array()}) {
    EXPECT_EQ(code_of([&] { (void)run_config_from_json(bad); }), Errc::InvalidConfig) << bad.dump();
  }
}

TEST(RunConfig, SeedPropagatesUnlessGiven) {
  const RunConfig a = run_config_from_json(json{{"seed", 42}});
  EXPECT_EQ(a.engine.seed, 42u);
  EXPECT_EQ(a.pretrain.engine.seed, 42u);
  const RunConfig b = run_config_from_json(json{{"seed", 42}, {"engine", {{"seed", 7}}}});
  EXPECT_EQ(b.engine.seed, 7u);
  EXPECT_EQ(b.pretrain.engine.seed, 42u);
}

TEST(RunConfig, PretrainEngineMergesOverItsDefaults) {
  const RunConfig c = run_config_from_json(json{{"pretrain", {{"engine", {{"samples_per_step", 4}}}}}});
  EXPECT_EQ(c.pretrain.engine.samples_per_step, 4u);
  EXPECT_EQ(c.pretrain.engine.max_iterations, 200u);
}

TEST(RunConfig, NullCapacityMeansUnbounded) {
  EXPECT_FALSE(run_config_from_json(json{{"engine", {{"capacity", nullptr}}}}).engine.capacity.has_value());
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c = run_config_from_json(json{{"seed", 3},
                                          {"engine", {{"capacity", nullptr}, {"bias", "worst"}}},
                                          {"mutation", {{"k", 1}, {"show_scores", true}}},
                                          {"mock_policy", "in-context"},
                                          {"templates", {"a photo of {}", "a close-up of {}"}}});
  const json once = to_json(c);
  const json twice = to_json(run_config_from_json(once));
  EXPECT_EQ(once, twice);
  EXPECT_EQ(once.at("engine").at("bias"), "worst");
  EXPECT_EQ(once.at("mock_policy"), "in-context");
}

TEST(RunConfig, FilePathsResolveAgainstConfigDir) {
  testing::TempDir dir;
  std::filesystem::create_directories(dir / "cfg");
  std::ofstream(dir / "cfg" / "run.json")
      << json{{"paths", {{"train", "../data/train.json"}, {"world", "/abs/world.json"}, {"run_dir", "out"}}},
              {"completion", {{"kind", "fixture"}, {"fixture", "fx.json"}}}}
             .dump();
  const RunConfig c = load_run_config(dir / "cfg" / "run.json");
  EXPECT_EQ(c.paths.train, (dir / "data" / "train.json").lexically_normal().string());
  EXPECT_EQ(c.paths.world, "/abs/world.json");
  EXPECT_EQ(c.paths.run_dir, (dir / "cfg" / "out").string());
  EXPECT_EQ(c.completion.fixture, (dir / "cfg" / "fx.json").string());
}

TEST(RunConfig, FileErrors) {
  testing::TempDir dir;
  EXPECT_EQ(code_of([&] { (void)load_run_config(dir / "missing.json"); }), Errc::Io);
  std::ofstream(dir / "broken.json") << "{ not json";
  EXPECT_EQ(code_of([&] { (void)load_run_config(dir / "broken.json"); }), Errc::InvalidConfig);
}

TEST(EngineConfig, JsonRoundTrip) {
  EngineConfig e;
  e.seed = 99;
  e.capacity = std::nullopt;
  e.workers = 3;
  json j;
  to_json(j, e);
  const EngineConfig back = engine_config_from_json(j);
  json j2;
  to_json(j2, back);
  EXPECT_EQ(j, j2);
}

}  // namespace
}  // namespace attrevo
