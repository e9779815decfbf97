#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "attrevo/domain.hpp"
#include "attrevo/evolution.hpp"
#include "attrevo/mutation.hpp"

namespace attrevo {

nlohmann::json to_json(const AttributeSet& set);
AttributeSet attribute_set_from_json(const nlohmann::json& j, int class_id);

nlohmann::json to_json(const Classifier& classifier);
Classifier classifier_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ClassifierBank& bank);
ClassifierBank bank_from_json(const nlohmann::json& j);

nlohmann::json to_json(const IterationRecord& record);
IterationRecord iteration_record_from_json(const nlohmann::json& j);

nlohmann::json to_json(const std::vector<ScoredSet>& trajectory);
std::vector<ScoredSet> trajectory_from_json(const nlohmann::json& j, int class_id);

/// Full engine state plus provenance; human-readable JSON on disk.
struct Checkpoint {
  std::string stage = "joint";  // "joint" or "pretrain"
  nlohmann::json run_config = nlohmann::json::object();
  std::string prompt_template_version;
  EngineState state;
  nlohmann::json metadata = nlohmann::json::object();

  [[nodiscard]] nlohmann::json to_json() const;
  static Checkpoint from_json(const nlohmann::json& j);
  /// Canonical text form; serialize(deserialize(s)) == s.
  [[nodiscard]] std::string serialize() const;
  static Checkpoint deserialize(const std::string& text);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

inline constexpr const char* kCheckpointFormat = "attrevo-checkpoint-v1";

}  // namespace attrevo
