#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "attrevo/evolution.hpp"
#include "attrevo/mutation.hpp"
#include "attrevo/oracle.hpp"
#include "attrevo/pretrain.hpp"

namespace attrevo {

/// Where completions or embeddings come from.
///   kind "mock"    - MockCompletionClient over the oracle world vocabulary
///   kind "oracle"  - OracleEmbeddingBackend over the oracle world
///   kind "http"    - live endpoint at base_url
///   kind "fixture" - replay of a recorded fixture file (offline)
struct BackendConfig {
  std::string kind;
  std::string base_url;
  std::string model;
  std::string api_key_env = "ATTREVO_API_KEY";
  int timeout_ms = 60000;
  std::size_t max_in_flight = 4;
  std::string fixture;  // kind "fixture": file to replay
  std::string record;   // kind "http": optional fixture file to record into
};

inline BackendConfig backend_of_kind(std::string kind) {
  BackendConfig b;
  b.kind = std::move(kind);
  return b;
}

struct RunPaths {
  std::string train;        // embedding-store manifests
  std::string test;
  std::string distractors;
  std::string world;        // oracle world file (mock/oracle backends)
  std::string pool;         // attribute pool, one per line
  std::string run_dir = "run";
  std::string cache;        // text-embedding cache file
};

struct RunConfig {
  std::uint64_t seed = 0;
  RunPaths paths;
  EngineConfig engine;
  PretrainConfig pretrain;
  bool pretrain_enabled = true;
  MutationConfig mutation;
  double score_temperature = kDefaultScoreTemperature;
  std::vector<std::string> templates{"a photo of {}"};
  BackendConfig completion = backend_of_kind("mock");
  BackendConfig embedding = backend_of_kind("oracle");
  MockPolicy mock_policy = MockPolicy::SampleBest;
  double p_keep = 0.7;

  /// Throws Error{InvalidConfig}.
  void validate() const;
  /// Applies `seed` to the engine and pre-training configs.
  void propagate_seed();
};

nlohmann::json to_json(const RunConfig& config);
/// Missing keys take defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
/// Reads a config file; relative paths resolve against its directory.
RunConfig load_run_config(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const EngineConfig& c);
EngineConfig engine_config_from_json(const nlohmann::json& j);

}  // namespace attrevo
