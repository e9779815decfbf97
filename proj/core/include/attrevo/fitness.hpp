#pragma once

#include <cstddef>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "attrevo/domain.hpp"
#include "attrevo/embedding.hpp"

namespace attrevo {

inline constexpr double kDefaultScoreTemperature = 0.01;

/// Class scores f_c(x) for every image row, plus the softmax temperature
/// used to turn a row into a distribution.
class ScoreTable {
 public:
  static ScoreTable create(std::size_t rows, std::size_t classes, std::vector<double> values,
                           double temperature);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t classes() const noexcept { return classes_; }
  [[nodiscard]] double temperature() const noexcept { return temperature_; }
  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * classes_, classes_};
  }
  [[nodiscard]] double at(std::size_t i, std::size_t c) const { return values_[i * classes_ + c]; }

 private:
  std::size_t rows_ = 0;
  std::size_t classes_ = 0;
  std::vector<double> values_;
  double temperature_ = kDefaultScoreTemperature;
};

/// Cosine similarity phi(d, x) between a text and an image embedding.
double attribute_score(std::span<const float> text_embedding, std::span<const float> image_embedding);

/// Pairwise summation; the result does not depend on how rows were produced.
double pairwise_sum(std::span<const double> values) noexcept;
double mean(std::span<const double> values);

/// Plain mean of per-attribute scores. Throws Error{EmptySet} on empty input.
double class_score(std::span<const double> attribute_scores);

/// Lowest index among the maxima.
std::size_t argmax(std::span<const double> scores);

/// softmax(scores / temperature), computed with max subtraction.
std::vector<double> class_probabilities(std::span<const double> scores, double temperature);

/// -log softmax(scores / temperature)[label].
double cross_entropy(std::span<const double> scores, std::size_t label, double temperature);

/// Mean cross-entropy over rows. Throws Error{EmptyDataset} on zero rows.
double joint_loss(const ScoreTable& table, std::span<const int> labels);

/// mean(negative scores) - mean(positive scores); lower separates better.
/// Throws Error{EmptyGroup} if either group is empty.
double pretrain_objective(std::span<const double> positive_scores,
                          std::span<const double> negative_scores);

/// Scores attributes, sets and classifiers against one EmbeddingStore.
/// Per-attribute score columns are memoized by canonical text (the template
/// set is fixed by the embedder); safe for concurrent use.
class Scorer {
 public:
  Scorer(const EmbeddingStore& store, TextEmbedder& embedder);

  [[nodiscard]] const EmbeddingStore& store() const noexcept { return *store_; }

  /// phi(attr, x_i) for every row i.
  [[nodiscard]] std::shared_ptr<const std::vector<double>> attribute_scores(const Attribute& attr) const;
  [[nodiscard]] double attribute_score(const Attribute& attr, std::size_t row) const;

  /// f_c(x_i) for every row i.
  [[nodiscard]] std::vector<double> class_scores(const AttributeSet& set) const;
  [[nodiscard]] double class_score(const AttributeSet& set, std::size_t row) const;

  [[nodiscard]] ScoreTable score_table(const Classifier& classifier, double temperature) const;

  /// argmax_c f_c(x_row), lowest class id on ties.
  [[nodiscard]] std::size_t predict(const Classifier& classifier, std::size_t row) const;

  /// Batch-embeds attributes not yet seen.
  void prefetch(std::span<const Attribute> attrs) const;

  [[nodiscard]] std::size_t cached_attributes() const;

 private:
  const EmbeddingStore* store_;
  TextEmbedder* embedder_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::string, std::shared_ptr<const std::vector<double>>> memo_;
};

/// Joint cross-entropy of a classifier on a labeled store.
double joint_loss(const Classifier& classifier, const Scorer& scorer, double temperature);

/// Separation objective for one attribute set.
double pretrain_objective(const AttributeSet& set, const Scorer& positives, const Scorer& negatives);

/// Fitness seen by the evolution engine.
class Objective {
 public:
  virtual ~Objective() = default;
  [[nodiscard]] virtual double loss(const Classifier& classifier) const = 0;
  [[nodiscard]] virtual std::size_t class_count() const = 0;
};

class JointObjective final : public Objective {
 public:
  /// Throws Error{EmptyDataset} for an empty store, InvalidArgument for a
  /// distractor store or non-positive temperature.
  JointObjective(const Scorer& scorer, double temperature);
  [[nodiscard]] double loss(const Classifier& classifier) const override;
  [[nodiscard]] std::size_t class_count() const override;
  [[nodiscard]] double temperature() const noexcept { return temperature_; }

 private:
  const Scorer* scorer_;
  double temperature_;
};

/// Single-class objective: the classifier's only set is scored by
/// pretrain_objective against the positive and negative groups.
class PretrainObjective final : public Objective {
 public:
  PretrainObjective(const Scorer& positives, const Scorer& negatives);
  [[nodiscard]] double loss(const Classifier& classifier) const override;
  [[nodiscard]] std::size_t class_count() const override { return 1; }

 private:
  const Scorer* positives_;
  const Scorer* negatives_;
};

}  // namespace attrevo
