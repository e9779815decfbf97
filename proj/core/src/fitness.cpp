#include "attrevo/fitness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include "attrevo/error.hpp"

namespace attrevo {

ScoreTable ScoreTable::create(std::size_t rows, std::size_t classes, std::vector<double> values,
                              double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(Errc::InvalidArgument, "temperature must be positive");
  }
  if (classes == 0 || values.size() != rows * classes) {
    throw Error(Errc::ShapeMismatch, "score table shape mismatch");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(Errc::InvalidArgument, "score table holds a non-finite value");
  }
  ScoreTable t;
  t.rows_ = rows;
  t.classes_ = classes;
  t.values_ = std::move(values);
  t.temperature_ = temperature;
  return t;
}

double attribute_score(std::span<const float> text_embedding, std::span<const float> image_embedding) {
  if (text_embedding.size() != image_embedding.size()) {
    throw Error(Errc::ShapeMismatch, "text and image embeddings differ in dimension");
  }
  double dot = 0.0, tt = 0.0, ii = 0.0;
  for (std::size_t j = 0; j < text_embedding.size(); ++j) {
    const double a = text_embedding[j];
    const double b = image_embedding[j];
    dot += a * b;
    tt += a * a;
    ii += b * b;
  }
  if (!(tt > 0.0) || !(ii > 0.0)) return 0.0;
  return std::clamp(dot / std::sqrt(tt * ii), -1.0, 1.0);
}

double pairwise_sum(std::span<const double> values) noexcept {
  constexpr std::size_t kBlock = 8;
  if (values.size() <= kBlock) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double mean(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::EmptyDataset, "mean of no values");
  return pairwise_sum(values) / static_cast<double>(values.size());
}

double class_score(std::span<const double> attribute_scores) {
  if (attribute_scores.empty()) throw Error(Errc::EmptySet, "class score of an empty set");
  double s = 0.0;
  for (double v : attribute_scores) s += v;
  return s / static_cast<double>(attribute_scores.size());
}

std::size_t argmax(std::span<const double> scores) {
  if (scores.empty()) throw Error(Errc::InvalidArgument, "argmax of nothing");
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return best;
}

std::vector<double> class_probabilities(std::span<const double> scores, double temperature) {
  if (!(temperature > 0.0)) throw Error(Errc::InvalidArgument, "temperature must be positive");
  if (scores.empty()) throw Error(Errc::InvalidArgument, "no scores");
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double z = 0.0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    p[c] = std::exp((scores[c] - top) / temperature);
    z += p[c];
  }
  for (double& v : p) v /= z;
  return p;
}

double cross_entropy(std::span<const double> scores, std::size_t label, double temperature) {
  if (!(temperature > 0.0)) throw Error(Errc::InvalidArgument, "temperature must be positive");
  if (label >= scores.size()) throw Error(Errc::LabelOutOfRange, "label outside the score row");
  const double top = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp((s - top) / temperature);
  return std::log(z) - (scores[label] - top) / temperature;
}

double joint_loss(const ScoreTable& table, std::span<const int> labels) {
  if (table.rows() == 0) throw Error(Errc::EmptyDataset, "joint loss over an empty dataset");
  if (labels.size() != table.rows()) throw Error(Errc::ShapeMismatch, "labels do not match score rows");
  std::vector<double> per_row(table.rows());
  for (std::size_t i = 0; i < table.rows(); ++i) {
    if (labels[i] < 0) throw Error(Errc::LabelOutOfRange, "joint loss needs labeled rows");
    per_row[i] = cross_entropy(table.row(i), static_cast<std::size_t>(labels[i]), table.temperature());
  }
  return mean(per_row);
}

double pretrain_objective(std::span<const double> positive_scores,
                          std::span<const double> negative_scores) {
  if (positive_scores.empty() || negative_scores.empty()) {
    throw Error(Errc::EmptyGroup, "pre-training needs positive and negative images");
  }
  return mean(negative_scores) - mean(positive_scores);
}

Scorer::Scorer(const EmbeddingStore& store, TextEmbedder& embedder)
    : store_(&store), embedder_(&embedder) {}

std::shared_ptr<const std::vector<double>> Scorer::attribute_scores(const Attribute& attr) const {
  {
    std::shared_lock lock(mutex_);
    if (auto it = memo_.find(attr.text()); it != memo_.end()) return it->second;
  }
  const Embedding text = embedder_->embed_text(attr.text());
  if (text.size() != store_->dim()) {
    throw Error(Errc::ShapeMismatch, "text embedding dim " + std::to_string(text.size()) +
                                         " does not match store dim " + std::to_string(store_->dim()));
  }
  auto column = std::make_shared<std::vector<double>>(store_->size());
  for (std::size_t i = 0; i < store_->size(); ++i) {
    (*column)[i] = attrevo::attribute_score(text, store_->row(i));
  }
  std::unique_lock lock(mutex_);
  // Identical keys always produce identical columns, so racing inserts are benign.
  return memo_.try_emplace(attr.text(), std::move(column)).first->second;
}

double Scorer::attribute_score(const Attribute& attr, std::size_t row) const {
  return attribute_scores(attr)->at(row);
}

std::vector<double> Scorer::class_scores(const AttributeSet& set) const {
  std::vector<double> out(store_->size(), 0.0);
  for (const Attribute& a : set.attributes()) {
    const auto column = attribute_scores(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += (*column)[i];
  }
  const double n = static_cast<double>(set.size());
  for (double& v : out) v /= n;
  return out;
}

double Scorer::class_score(const AttributeSet& set, std::size_t row) const {
  std::vector<double> phi;
  phi.reserve(set.size());
  for (const Attribute& a : set.attributes()) phi.push_back(attribute_score(a, row));
  return attrevo::class_score(phi);
}

ScoreTable Scorer::score_table(const Classifier& classifier, double temperature) const {
  const std::size_t rows = store_->size();
  const std::size_t classes = classifier.class_count();
  std::vector<double> values(rows * classes);
  for (std::size_t c = 0; c < classes; ++c) {
    const auto column = class_scores(classifier.set(c));
    for (std::size_t i = 0; i < rows; ++i) values[i * classes + c] = column[i];
  }
  return ScoreTable::create(rows, classes, std::move(values), temperature);
}

std::size_t Scorer::predict(const Classifier& classifier, std::size_t row) const {
  std::vector<double> scores(classifier.class_count());
  for (std::size_t c = 0; c < scores.size(); ++c) scores[c] = class_score(classifier.set(c), row);
  return argmax(scores);
}

void Scorer::prefetch(std::span<const Attribute> attrs) const {
  std::vector<std::string> texts;
  {
    std::shared_lock lock(mutex_);
    for (const Attribute& a : attrs) {
      if (!memo_.contains(a.text())) texts.push_back(a.text());
    }
  }
  embedder_->warm(texts);
}

std::size_t Scorer::cached_attributes() const {
  std::shared_lock lock(mutex_);
  return memo_.size();
}

double joint_loss(const Classifier& classifier, const Scorer& scorer, double temperature) {
  const EmbeddingStore& store = scorer.store();
  if (store.split() == SplitTag::Distractor) {
    throw Error(Errc::InvalidArgument, "joint loss needs a labeled, non-distractor split");
  }
  if (store.size() == 0) throw Error(Errc::EmptyDataset, "joint loss over an empty dataset");
  if (classifier.class_count() != static_cast<std::size_t>(store.class_count())) {
    throw Error(Errc::InvalidArgument, "classifier has " + std::to_string(classifier.class_count()) +
                                           " classes, store has " + std::to_string(store.class_count()));
  }
  return joint_loss(scorer.score_table(classifier, temperature), store.labels());
}

double pretrain_objective(const AttributeSet& set, const Scorer& positives, const Scorer& negatives) {
  if (positives.store().size() == 0 || negatives.store().size() == 0) {
    throw Error(Errc::EmptyGroup, "pre-training needs positive and negative images");
  }
  return pretrain_objective(positives.class_scores(set), negatives.class_scores(set));
}

JointObjective::JointObjective(const Scorer& scorer, double temperature)
    : scorer_(&scorer), temperature_(temperature) {
  if (!(temperature > 0.0)) throw Error(Errc::InvalidArgument, "temperature must be positive");
  if (scorer.store().size() == 0) throw Error(Errc::EmptyDataset, "training store is empty");
  if (scorer.store().split() == SplitTag::Distractor) {
    throw Error(Errc::InvalidArgument, "joint objective needs a labeled split");
  }
}

double JointObjective::loss(const Classifier& classifier) const {
  return joint_loss(classifier, *scorer_, temperature_);
}

std::size_t JointObjective::class_count() const {
  return static_cast<std::size_t>(scorer_->store().class_count());
}

PretrainObjective::PretrainObjective(const Scorer& positives, const Scorer& negatives)
    : positives_(&positives), negatives_(&negatives) {
  if (positives.store().size() == 0 || negatives.store().size() == 0) {
    throw Error(Errc::EmptyGroup, "pre-training needs positive and negative images");
  }
}

double PretrainObjective::loss(const Classifier& classifier) const {
  if (classifier.class_count() != 1) {
    throw Error(Errc::InvalidArgument, "pre-training classifiers hold exactly one set");
  }
  return pretrain_objective(classifier.set(0), *positives_, *negatives_);
}

}  // namespace attrevo
