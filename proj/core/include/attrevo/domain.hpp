#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace attrevo {

inline constexpr std::size_t kDefaultMaxSetSize = 10;

/// One natural-language visual descriptor in canonical form: trimmed,
/// internal whitespace collapsed to single spaces, ASCII-lowercased.
class Attribute {
 public:
  /// Throws Error{EmptyAttribute} or Error{MultilineAttribute}.
  static Attribute canonicalize(std::string_view raw);

  [[nodiscard]] const std::string& text() const noexcept { return text_; }

  friend auto operator<=>(const Attribute&, const Attribute&) = default;
  friend bool operator==(const Attribute&, const Attribute&) = default;

 private:
  explicit Attribute(std::string text) : text_(std::move(text)) {}
  std::string text_;
};

inline Attribute canonicalize(std::string_view raw) {
  return Attribute::canonicalize(raw);
}

/// The attributes D(c) that score one class. Non-empty, duplicate-free, in
/// insertion order.
class AttributeSet {
 public:
  /// Keeps the first occurrence of each attribute and truncates to
  /// max_set_size. Throws Error{EmptySet} on empty input.
  static AttributeSet dedup(std::span<const Attribute> attrs, int class_id,
                            std::size_t max_set_size = kDefaultMaxSetSize);

  [[nodiscard]] const std::vector<Attribute>& attributes() const noexcept {
    return attrs_;
  }
  [[nodiscard]] int class_id() const noexcept { return class_id_; }
  [[nodiscard]] std::size_t size() const noexcept { return attrs_.size(); }
  [[nodiscard]] bool contains(const Attribute& a) const;

  [[nodiscard]] AttributeSet with_class_id(int class_id) const;

  friend bool operator==(const AttributeSet&, const AttributeSet&) = default;

 private:
  AttributeSet(std::vector<Attribute> attrs, int class_id)
      : attrs_(std::move(attrs)), class_id_(class_id) {}
  std::vector<Attribute> attrs_;
  int class_id_ = 0;
};

AttributeSet dedup_set(std::span<const Attribute> attrs, int class_id,
                       std::size_t max_set_size = kDefaultMaxSetSize);

/// Canonicalizes each raw string, silently dropping the invalid ones, then
/// dedups. Throws Error{EmptySet} when nothing valid remains.
AttributeSet dedup_raw(std::span<const std::string> raw, int class_id,
                       std::size_t max_set_size = kDefaultMaxSetSize);

/// A full hypothesis D: one AttributeSet per class, sets[c].class_id() == c.
class Classifier {
 public:
  explicit Classifier(std::vector<AttributeSet> sets, int iteration_born = 0);

  [[nodiscard]] std::size_t class_count() const noexcept { return sets_.size(); }
  [[nodiscard]] const AttributeSet& set(std::size_t c) const { return sets_.at(c); }
  [[nodiscard]] const std::vector<AttributeSet>& sets() const noexcept { return sets_; }
  [[nodiscard]] const std::optional<double>& loss() const noexcept { return loss_; }
  [[nodiscard]] int iteration_born() const noexcept { return iteration_born_; }

  /// Copy with class c's set replaced; the copy is unscored.
  [[nodiscard]] Classifier with_set(const AttributeSet& set, int iteration_born) const;
  /// Throws Error{InvalidArgument} for a non-finite loss.
  [[nodiscard]] Classifier with_loss(double loss) const;

  /// Number of classes whose sets differ.
  [[nodiscard]] std::size_t differing_classes(const Classifier& other) const;

  friend bool operator==(const Classifier&, const Classifier&) = default;

 private:
  std::vector<AttributeSet> sets_;
  std::optional<double> loss_;
  int iteration_born_ = 0;
};

/// The evolving population B. Only scored classifiers may enter.
class ClassifierBank {
 public:
  explicit ClassifierBank(std::optional<std::size_t> capacity = std::nullopt)
      : capacity_(capacity) {}

  /// Throws Error{InvalidArgument} if the classifier has no cached loss.
  /// When over capacity, the highest-loss entry is evicted (latest on ties),
  /// which never removes the unique best entry.
  void insert(Classifier classifier);

  [[nodiscard]] const std::vector<Classifier>& entries() const noexcept { return entries_; }
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
  [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }
  [[nodiscard]] const std::optional<std::size_t>& capacity() const noexcept { return capacity_; }

  /// Lowest-loss entry, earliest on ties. Bank must be non-empty.
  [[nodiscard]] const Classifier& best() const;
  [[nodiscard]] double best_loss() const { return *best().loss(); }

  friend bool operator==(const ClassifierBank&, const ClassifierBank&) = default;

 private:
  std::vector<Classifier> entries_;
  std::optional<std::size_t> capacity_;
};

enum class SplitTag { Train, Validation, Test, Distractor };

std::string_view to_string(SplitTag tag) noexcept;
SplitTag split_from_string(std::string_view s);

inline constexpr int kDistractorLabel = -1;

/// Row-major matrix of L2-normalized image embeddings plus labels; the only
/// view of images the engine has.
class EmbeddingStore {
 public:
  /// Validates shape, unit norms (within 1e-4) and label range.
  static EmbeddingStore create(std::size_t dim, int class_count, SplitTag split,
                               std::vector<float> data, std::vector<int> labels);

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
  [[nodiscard]] int class_count() const noexcept { return class_count_; }
  [[nodiscard]] SplitTag split() const noexcept { return split_; }
  [[nodiscard]] std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  [[nodiscard]] int label(std::size_t i) const { return labels_.at(i); }
  [[nodiscard]] const std::vector<int>& labels() const noexcept { return labels_; }
  [[nodiscard]] const std::vector<float>& data() const noexcept { return data_; }

  /// Rows (in order) selected by index, relabeled as `split`.
  [[nodiscard]] EmbeddingStore subset(std::span<const std::size_t> rows, SplitTag split,
                                      bool keep_labels) const;

  friend bool operator==(const EmbeddingStore&, const EmbeddingStore&) = default;

 private:
  EmbeddingStore() = default;
  std::size_t dim_ = 0;
  int class_count_ = 0;
  SplitTag split_ = SplitTag::Train;
  std::vector<float> data_;
  std::vector<int> labels_;
};

inline constexpr double kUnitNormTolerance = 1e-4;

}  // namespace attrevo
