#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "attrevo/domain.hpp"
#include "attrevo/fitness.hpp"
#include "attrevo/mutation.hpp"
#include "attrevo/rng.hpp"

namespace attrevo {

/// Which end of the bank the sampler favors. Best draws with probability
/// softmax(-loss / T); Worst uses softmax(+loss / T), i.e. proportional to
/// loss as literally written in the algorithm box.
enum class SamplingBias { Best, Worst };

std::string_view to_string(SamplingBias b) noexcept;
SamplingBias sampling_bias_from_string(std::string_view s);

struct EngineConfig {
  std::size_t initial_hypotheses = 20;  // N
  std::size_t samples_per_step = 10;    // M
  double sampling_temperature = 0.05;
  SamplingBias bias = SamplingBias::Best;
  std::size_t max_iterations = 500;
  std::size_t patience = 100;
  std::optional<std::size_t> capacity = 512;
  std::size_t checkpoint_interval = 10;
  std::size_t initial_set_size = kDefaultMaxSetSize;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  /// Throws Error{InvalidConfig}.
  void validate() const;
};

struct IterationRecord {
  std::size_t iteration = 0;
  std::vector<std::optional<double>> candidate_loss;  // per class; empty when skipped
  double best_loss = 0.0;
  std::size_t bank_size = 0;

  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

/// Everything needed to continue a run exactly where it stopped.
struct EngineState {
  EngineConfig config;
  ClassifierBank bank;
  std::size_t iteration = 0;
  Rng rng;
  double best_loss = 0.0;
  std::size_t last_improvement = 0;
  std::vector<IterationRecord> history;

  /// Fresh state around a scored, non-empty bank.
  static EngineState start(const EngineConfig& config, ClassifierBank bank, Rng rng);
};

/// N classifiers whose class sets are drawn uniformly without replacement from
/// the pool, each scored before insertion. Throws Error{PoolTooSmall} when
/// the pool holds fewer than set_size distinct attributes.
ClassifierBank init_bank(std::span<const Attribute> pool, const EngineConfig& config,
                         const Objective& objective, Rng& rng);

/// Per-entry draw probabilities used by sample_hypotheses.
std::vector<double> sampling_probabilities(const ClassifierBank& bank, double temperature, SamplingBias bias);

/// M draws with replacement, returned sorted by loss, worst first.
std::vector<Classifier> sample_hypotheses(const ClassifierBank& bank, std::size_t m, double temperature,
                                          SamplingBias bias, Rng& rng);

/// One pass of the search over every class: mutate the sampled sets of class
/// c, build the candidates that replace only class c, and insert the
/// lowest-loss one. A class whose mutation yields no usable completion is
/// skipped; backend errors propagate.
IterationRecord evolution_step(EngineState& state, const Mutator& mutator, const Objective& objective);

struct RunHooks {
  std::function<void(const EngineState&)> checkpoint;
  std::function<void(const EngineState&, const IterationRecord&)> on_iteration;
};

/// Steps until max_iterations, or until `patience` iterations pass without a
/// new best. Checkpoints after the first iteration, every
/// checkpoint_interval iterations, and at the end. Returns the best entry.
Classifier run(EngineState& state, const Mutator& mutator, const Objective& objective,
               const RunHooks& hooks = {});

[[nodiscard]] bool should_stop(const EngineState& state) noexcept;

}  // namespace attrevo
