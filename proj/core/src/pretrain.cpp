#include "attrevo/pretrain.hpp"

#include <algorithm>
#include <cmath>

#include "attrevo/error.hpp"

namespace attrevo {

OneVsRest partition_one_vs_rest(const EmbeddingStore& train, const EmbeddingStore* distractors, int class_id) {
  if (train.split() == SplitTag::Distractor) {
    throw Error(Errc::InvalidArgument, "pre-training needs a labeled training split");
  }
  if (class_id < 0 || class_id >= train.class_count()) {
    throw Error(Errc::LabelOutOfRange, "class id " + std::to_string(class_id) + " out of range");
  }
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < train.size(); ++i) {
    (train.label(i) == class_id ? pos : neg).push_back(i);
  }
  EmbeddingStore positives = train.subset(pos, train.split(), true);
  EmbeddingStore negatives = train.subset(neg, SplitTag::Distractor, false);
  if (distractors != nullptr && distractors->size() > 0) {
    if (distractors->dim() != train.dim()) throw Error(Errc::ShapeMismatch, "distractor dim differs");
    std::vector<float> data = negatives.data();
    data.insert(data.end(), distractors->data().begin(), distractors->data().end());
    std::vector<int> labels(data.size() / train.dim(), kDistractorLabel);
    negatives = EmbeddingStore::create(train.dim(), train.class_count(), SplitTag::Distractor,
                                       std::move(data), std::move(labels));
  }
  if (positives.size() == 0 || negatives.size() == 0) {
    throw Error(Errc::EmptyGroup, "class " + std::to_string(class_id) + " lacks positives or negatives");
  }
  return {std::move(positives), std::move(negatives)};
}

PretrainResult run_pretrain(int class_id, const PretrainConfig& config, const Mutator& mutator,
                            TextEmbedder& embedder, const EmbeddingStore& train,
                            const EmbeddingStore* distractors, std::span<const Attribute> pool) {
  config.engine.validate();
  if (config.require_distractors && (distractors == nullptr || distractors->size() == 0)) {
    throw Error(Errc::InvalidConfig, "pre-training requires distractor images (require_distractors=true)");
  }
  const OneVsRest groups = partition_one_vs_rest(train, distractors, class_id);
  const Scorer pos(groups.positives, embedder);
  const Scorer neg(groups.negatives, embedder);
  const PretrainObjective objective(pos, neg);

  EngineConfig engine = config.engine;
  engine.seed = mix_seed(config.engine.seed, static_cast<std::uint64_t>(class_id));
  Rng rng(engine.seed);
  ClassifierBank bank = init_bank(pool, engine, objective, rng);

  PretrainResult result;
  result.class_id = class_id;
  result.final_state = EngineState::start(engine, std::move(bank), std::move(rng));
  auto record_best = [&](const EngineState& s) {
    const Classifier& best = s.bank.best();
    result.trajectory.push_back({best.set(0).with_class_id(class_id), *best.loss()});
  };
  record_best(result.final_state);

  RunHooks hooks;
  hooks.on_iteration = [&](const EngineState& s, const IterationRecord&) {
    if (s.last_improvement == s.iteration) record_best(s);
  };
  run(result.final_state, mutator, objective, hooks);
  return result;
}

ClassifierBank seed_joint_bank(std::span<const std::vector<ScoredSet>> trajectories, std::size_t n,
                               const Objective& objective, Rng& rng, double decay,
                               std::optional<std::size_t> capacity) {
  const std::size_t classes = objective.class_count();
  if (trajectories.size() != classes) {
    throw Error(Errc::MissingClassTrajectory, "expected " + std::to_string(classes) +
                                                  " trajectories, got " + std::to_string(trajectories.size()));
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (trajectories[c].empty()) {
      throw Error(Errc::MissingClassTrajectory, "class " + std::to_string(c) + " has no trajectory");
    }
  }
  if (n < 1) throw Error(Errc::InvalidConfig, "N must be >= 1");
  if (!(decay > 0.0) || decay > 1.0) throw Error(Errc::InvalidConfig, "seed decay must lie in (0,1]");

  std::vector<std::vector<double>> cdfs(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t len = trajectories[c].size();
    double acc = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
      acc += std::pow(decay, static_cast<double>(len - 1 - j));
      cdfs[c].push_back(acc);
    }
  }

  ClassifierBank bank(capacity);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<AttributeSet> sets;
    for (std::size_t c = 0; c < classes; ++c) {
      const double u = rng.uniform() * cdfs[c].back();
      auto it = std::upper_bound(cdfs[c].begin(), cdfs[c].end(), u);
      if (it == cdfs[c].end()) --it;
      const auto j = static_cast<std::size_t>(it - cdfs[c].begin());
      sets.push_back(trajectories[c][j].set.with_class_id(static_cast<int>(c)));
    }
    Classifier classifier(std::move(sets), 0);
    bank.insert(classifier.with_loss(objective.loss(classifier)));
  }
  return bank;
}

}  // namespace attrevo
