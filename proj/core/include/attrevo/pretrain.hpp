#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "attrevo/domain.hpp"
#include "attrevo/evolution.hpp"
#include "attrevo/fitness.hpp"
#include "attrevo/mutation.hpp"

namespace attrevo {

inline constexpr std::size_t kDefaultPretrainIterations = 200;

struct PretrainConfig {
  EngineConfig engine = [] {
    EngineConfig e;
    e.max_iterations = kDefaultPretrainIterations;
    e.patience = kDefaultPretrainIterations;
    return e;
  }();
  bool require_distractors = true;
  /// Geometric weight per step back from the end of a trajectory when
  /// seeding the joint bank.
  double seed_decay = 0.7;
};

/// Positive rows of one class and every other row (other classes and
/// distractors) as negatives. Negative rows are stripped of their labels.
struct OneVsRest {
  EmbeddingStore positives;
  EmbeddingStore negatives;
};

OneVsRest partition_one_vs_rest(const EmbeddingStore& train, const EmbeddingStore* distractors, int class_id);

struct PretrainResult {
  int class_id = 0;
  /// Elite trajectory: the bank's best set after initialization and after
  /// every improvement, in order. Sets carry class_id.
  std::vector<ScoredSet> trajectory;
  EngineState final_state;
};

/// Binary one-vs-rest search for one class, scored with the separation
/// objective. Throws Error{InvalidConfig} when distractors are required but
/// missing.
PretrainResult run_pretrain(int class_id, const PretrainConfig& config, const Mutator& mutator,
                            TextEmbedder& embedder, const EmbeddingStore& train,
                            const EmbeddingStore* distractors, std::span<const Attribute> pool);

/// N classifiers composed of one trajectory entry per class, drawn with
/// geometric weights toward the end of each trajectory, then scored.
/// Throws Error{MissingClassTrajectory}.
ClassifierBank seed_joint_bank(std::span<const std::vector<ScoredSet>> trajectories, std::size_t n,
                               const Objective& objective, Rng& rng, double decay = 0.7,
                               std::optional<std::size_t> capacity = 512);

}  // namespace attrevo
