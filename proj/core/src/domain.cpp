#include "attrevo/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

#include "attrevo/error.hpp"
#include "attrevo/text.hpp"

namespace attrevo {

Attribute Attribute::canonicalize(std::string_view raw) {
  const std::string_view trimmed = trim(raw);
  if (trimmed.find_first_of("\n\r") != std::string_view::npos) {
    throw Error(Errc::MultilineAttribute, "attribute spans several lines");
  }
  std::string out;
  out.reserve(trimmed.size());
  bool pending_space = false;
  for (char ch : trimmed) {
    if (ch == ' ' || ch == '\t' || ch == '\f' || ch == '\v') {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  if (out.empty()) throw Error(Errc::EmptyAttribute, "attribute is empty");
  return Attribute(std::move(out));
}

AttributeSet AttributeSet::dedup(std::span<const Attribute> attrs, int class_id,
                                 std::size_t max_set_size) {
  if (max_set_size == 0) throw Error(Errc::InvalidArgument, "max_set_size must be >= 1");
  std::vector<Attribute> kept;
  std::unordered_set<std::string> seen;
  for (const Attribute& a : attrs) {
    if (kept.size() == max_set_size) break;
    if (seen.insert(a.text()).second) kept.push_back(a);
  }
  if (kept.empty()) throw Error(Errc::EmptySet, "attribute set is empty");
  return AttributeSet(std::move(kept), class_id);
}

bool AttributeSet::contains(const Attribute& a) const {
  return std::find(attrs_.begin(), attrs_.end(), a) != attrs_.end();
}

AttributeSet AttributeSet::with_class_id(int class_id) const {
  AttributeSet copy = *this;
  copy.class_id_ = class_id;
  return copy;
}

AttributeSet dedup_set(std::span<const Attribute> attrs, int class_id,
                       std::size_t max_set_size) {
  return AttributeSet::dedup(attrs, class_id, max_set_size);
}

AttributeSet dedup_raw(std::span<const std::string> raw, int class_id,
                       std::size_t max_set_size) {
  std::vector<Attribute> valid;
  valid.reserve(raw.size());
  for (const std::string& s : raw) {
    try {
      valid.push_back(Attribute::canonicalize(s));
    } catch (const Error&) {
    }
  }
  return AttributeSet::dedup(valid, class_id, max_set_size);
}

Classifier::Classifier(std::vector<AttributeSet> sets, int iteration_born)
    : sets_(std::move(sets)), iteration_born_(iteration_born) {
  if (sets_.empty()) throw Error(Errc::InvalidArgument, "classifier needs at least one class");
  for (std::size_t c = 0; c < sets_.size(); ++c) {
    if (sets_[c].class_id() != static_cast<int>(c)) {
      throw Error(Errc::InvalidArgument,
                  "classifier set " + std::to_string(c) + " carries class id " +
                      std::to_string(sets_[c].class_id()));
    }
  }
}

Classifier Classifier::with_set(const AttributeSet& set, int iteration_born) const {
  const auto c = static_cast<std::size_t>(set.class_id());
  if (set.class_id() < 0 || c >= sets_.size()) {
    throw Error(Errc::InvalidArgument, "class id out of range");
  }
  Classifier copy = *this;
  copy.sets_[c] = set;
  copy.loss_.reset();
  copy.iteration_born_ = iteration_born;
  return copy;
}

Classifier Classifier::with_loss(double loss) const {
  if (!std::isfinite(loss)) throw Error(Errc::InvalidArgument, "loss must be finite");
  Classifier copy = *this;
  copy.loss_ = loss;
  return copy;
}

std::size_t Classifier::differing_classes(const Classifier& other) const {
  if (other.sets_.size() != sets_.size()) return std::max(sets_.size(), other.sets_.size());
  std::size_t n = 0;
  for (std::size_t c = 0; c < sets_.size(); ++c) n += (sets_[c] == other.sets_[c]) ? 0 : 1;
  return n;
}

void ClassifierBank::insert(Classifier classifier) {
  if (!classifier.loss()) throw Error(Errc::InvalidArgument, "unscored classifier cannot enter the bank");
  entries_.push_back(std::move(classifier));
  if (capacity_ && entries_.size() > *capacity_) {
    auto worst = entries_.begin();
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
      if (*it->loss() >= *worst->loss()) worst = it;
    }
    entries_.erase(worst);
  }
}

const Classifier& ClassifierBank::best() const {
  if (entries_.empty()) throw Error(Errc::InvalidArgument, "bank is empty");
  auto best = entries_.begin();
  for (auto it = entries_.begin(); it != entries_.end(); ++it) {
    if (*it->loss() < *best->loss()) best = it;
  }
  return *best;
}

std::string_view to_string(SplitTag tag) noexcept {
  switch (tag) {
    case SplitTag::Train: return "train";
    case SplitTag::Validation: return "validation";
    case SplitTag::Test: return "test";
    case SplitTag::Distractor: return "distractor";
  }
  return "train";
}

SplitTag split_from_string(std::string_view s) {
  if (s == "train") return SplitTag::Train;
  if (s == "validation") return SplitTag::Validation;
  if (s == "test") return SplitTag::Test;
  if (s == "distractor") return SplitTag::Distractor;
  throw Error(Errc::InvalidArgument, "unknown split tag '" + std::string(s) + "'");
}

EmbeddingStore EmbeddingStore::create(std::size_t dim, int class_count, SplitTag split,
                                      std::vector<float> data, std::vector<int> labels) {
  if (dim == 0) throw Error(Errc::ShapeMismatch, "embedding dim must be positive");
  if (class_count < 1) throw Error(Errc::InvalidArgument, "class_count must be positive");
  if (data.size() != labels.size() * dim) {
    throw Error(Errc::ShapeMismatch, "matrix holds " + std::to_string(data.size()) +
                                         " values, expected " +
                                         std::to_string(labels.size() * dim));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    const bool ok = split == SplitTag::Distractor ? y == kDistractorLabel
                                                  : (y >= 0 && y < class_count);
    if (!ok) {
      throw Error(Errc::LabelOutOfRange, "row " + std::to_string(i) + " has label " +
                                             std::to_string(y));
    }
    double sq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double v = data[i * dim + j];
      sq += v * v;
    }
    if (!std::isfinite(sq) || std::abs(std::sqrt(sq) - 1.0) > kUnitNormTolerance) {
      throw Error(Errc::NotNormalized, "row " + std::to_string(i) + " is not unit norm");
    }
  }
  EmbeddingStore store;
  store.dim_ = dim;
  store.class_count_ = class_count;
  store.split_ = split;
  store.data_ = std::move(data);
  store.labels_ = std::move(labels);
  return store;
}

EmbeddingStore EmbeddingStore::subset(std::span<const std::size_t> rows, SplitTag split,
                                      bool keep_labels) const {
  std::vector<float> data;
  std::vector<int> labels;
  data.reserve(rows.size() * dim_);
  labels.reserve(rows.size());
  for (std::size_t r : rows) {
    const auto src = row(r);
    data.insert(data.end(), src.begin(), src.end());
    labels.push_back(keep_labels ? labels_.at(r) : kDistractorLabel);
  }
  return create(dim_, class_count_, split, std::move(data), std::move(labels));
}

}  // namespace attrevo
