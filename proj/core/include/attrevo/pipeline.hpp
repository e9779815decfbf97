#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "attrevo/checkpoint.hpp"
#include "attrevo/config.hpp"
#include "attrevo/embedding.hpp"
#include "attrevo/http.hpp"
#include "attrevo/oracle.hpp"
#include "attrevo/pretrain.hpp"

namespace attrevo {

/// Append-only JSONL logs under <run_dir>/logs. Safe to call from workers.
class RunLog {
 public:
  explicit RunLog(const std::filesystem::path& run_dir);

  void iteration(const nlohmann::json& entry);
  void mutation(const nlohmann::json& entry);
  void http(const nlohmann::json& entry);

 private:
  std::mutex mutex_;
  std::ofstream iterations_;
  std::ofstream mutations_;
  std::ofstream http_;
};

/// Completion client, embedding backend and text embedder wired up from a
/// RunConfig. Owns everything it creates.
class Runtime {
 public:
  explicit Runtime(const RunConfig& config, RunLog* log = nullptr);
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  [[nodiscard]] CompletionClient& completion();
  [[nodiscard]] TextEmbedder& embedder() { return *embedder_; }
  [[nodiscard]] const OracleWorld* world() const { return world_ ? &*world_ : nullptr; }
  /// Attribute pool from paths.pool, or the world vocabulary when no pool
  /// file is configured.
  [[nodiscard]] std::vector<Attribute> pool() const;

 private:
  RunConfig config_;
  std::optional<OracleWorld> world_;
  std::vector<std::unique_ptr<HttpTransport>> transports_;
  std::unique_ptr<CompletionClient> completion_;
  std::unique_ptr<EmbeddingBackend> embedding_;
  std::unique_ptr<TextEmbedder> embedder_;
};

/// Reads the value of the configured API-key variable; empty when unset.
std::string api_key_from_env(const BackendConfig& backend);

/// One attribute per line; blank lines and '#' comments skipped, invalid
/// lines dropped.
std::vector<Attribute> load_pool(const std::filesystem::path& path);

struct Datasets {
  std::optional<EmbeddingStore> train;
  std::optional<EmbeddingStore> test;
  std::optional<EmbeddingStore> distractors;
};

/// Loads whichever of train/test/distractors are configured.
Datasets load_datasets(const RunPaths& paths);

/// Pre-trains every class of `train` in class order.
std::vector<PretrainResult> pretrain_all(const RunConfig& config, const Mutator& mutator, TextEmbedder& embedder,
                                         const EmbeddingStore& train, const EmbeddingStore* distractors,
                                         std::span<const Attribute> pool,
                                         const std::function<void(const PretrainResult&)>& on_class = {});

nlohmann::json trajectories_to_json(std::span<const PretrainResult> results);
std::vector<std::vector<ScoredSet>> trajectories_from_json(const nlohmann::json& j);

/// The joint starting state. Seeded from the trajectories when given, else a
/// uniform draw from the pool. Uses one generator seeded by engine.seed.
EngineState initial_joint_state(const RunConfig& config, const Objective& objective,
                                const std::vector<std::vector<ScoredSet>>* trajectories,
                                std::span<const Attribute> pool);

Checkpoint make_checkpoint(const RunConfig& config, const EngineState& state, std::string stage = "joint");

/// checkpoints/iter_<NNNNNN>.json plus checkpoints/latest.json.
std::filesystem::path write_checkpoint(const std::filesystem::path& run_dir, const Checkpoint& checkpoint);
std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& run_dir);

struct Evaluation {
  double accuracy = 0.0;
  double margin = 0.0;
  std::vector<double> per_class;
  std::vector<std::vector<std::size_t>> confusion;

  [[nodiscard]] nlohmann::json to_json() const;
};

Evaluation evaluate(const Classifier& classifier, const EmbeddingStore& store, TextEmbedder& embedder,
                    double temperature);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace attrevo
