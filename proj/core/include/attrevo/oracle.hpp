#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "attrevo/completion.hpp"
#include "attrevo/domain.hpp"
#include "attrevo/embedding.hpp"

namespace attrevo {

struct OracleWorldParams {
  std::size_t dim = 64;
  std::size_t classes = 5;
  std::size_t truth_per_class = 5;
  std::size_t vocab_size = 500;
  /// Standard deviation of the per-component gaussian noise added to an
  /// image's class direction before normalization.
  double noise_sigma = 0.1;
  /// Squared weight of the shared class direction in each ground-truth
  /// attribute vector; attributes of one class have pairwise cosine equal to
  /// this value, attributes of different classes are exactly orthogonal.
  double coherence = 0.3;
  std::uint64_t seed = 1;
  /// Required own-class minus other-class class score of each ground-truth
  /// set; a seed that misses it is rejected.
  double min_margin = 0.3;
};

/// A synthetic embedding space with known ground-truth attributes per class.
/// Attribute texts map to fixed vectors; images of class c are noisy copies of
/// the mean of c's ground-truth vectors.
class OracleWorld {
 public:
  /// Throws Error{InvalidConfig} when the parameters are inconsistent or the
  /// seed fails the construction checks.
  static OracleWorld build(const OracleWorldParams& params);

  [[nodiscard]] const OracleWorldParams& params() const noexcept { return params_; }
  [[nodiscard]] const std::vector<std::string>& vocab() const noexcept { return vocab_; }
  [[nodiscard]] const std::vector<std::string>& ground_truth(std::size_t c) const { return truth_.at(c); }
  [[nodiscard]] bool is_ground_truth(const std::string& text) const;
  /// Ground-truth set of class c as an AttributeSet.
  [[nodiscard]] AttributeSet truth_set(std::size_t c) const;
  [[nodiscard]] Classifier truth_classifier() const;

  /// Vector of an attribute text (vocabulary entries have fixed vectors,
  /// other texts hash to a deterministic random direction).
  [[nodiscard]] Embedding attribute_vector(const std::string& text) const;
  /// Vector of a template-filled string: the longest vocabulary phrase it
  /// contains decides; without one it behaves like an unknown text.
  [[nodiscard]] Embedding text_vector(const std::string& filled) const;
  [[nodiscard]] const Embedding& class_direction(std::size_t c) const { return class_mean_.at(c); }

  /// Labeled images, images_per_class rows per class (class-major order), or
  /// for the distractor split images_per_class * classes random directions
  /// labeled -1. Each split draws from its own stream of the world seed.
  [[nodiscard]] EmbeddingStore generate(std::size_t images_per_class, SplitTag split) const;

  [[nodiscard]] nlohmann::json to_json() const;
  static OracleWorld from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static OracleWorld load(const std::filesystem::path& path);

 private:
  OracleWorldParams params_;
  std::vector<std::string> vocab_;
  std::vector<std::vector<std::string>> truth_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Embedding> vectors_;     // per vocab entry
  std::vector<Embedding> class_mean_;  // unnormalized mean of truth vectors
};

void to_json(nlohmann::json& j, const OracleWorldParams& p);
void from_json(const nlohmann::json& j, OracleWorldParams& p);

/// Embedding backend answering from an OracleWorld.
class OracleEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit OracleEmbeddingBackend(const OracleWorld& world) : world_(&world) {}
  std::vector<Embedding> embed(std::span<const std::string> texts) override;

 private:
  const OracleWorld* world_;
};

enum class MockPolicy {
  /// Keep every line of the best (last) example set.
  KeepBestLines,
  /// Keep each line of the best set with probability p_keep.
  SampleBest,
  /// Keep each line of the best set with probability 1 - (1 - p_keep)^n,
  /// n = number of distinct shown sets containing it.
  InContext,
};

std::string_view to_string(MockPolicy p) noexcept;
MockPolicy mock_policy_from_string(std::string_view s);

/// Deterministic stand-in for the language model. Parses the example sets
/// out of the prompt, keeps lines of the best one per policy, and fills up
/// with a uniform number of fresh vocabulary samples (at most max_set_size
/// lines total, at least one). Output is a numbered list.
class MockCompletionClient final : public CompletionClient {
 public:
  MockCompletionClient(std::vector<std::string> vocab, MockPolicy policy, double p_keep = 0.7,
                       std::size_t max_set_size = kDefaultMaxSetSize);

  std::string complete(const CompletionRequest& request) override;
  [[nodiscard]] std::string mock_complete(const std::string& prompt, std::uint64_t seed) const;

 private:
  std::vector<std::string> vocab_;
  MockPolicy policy_;
  double p_keep_;
  std::size_t max_set_size_;
};

}  // namespace attrevo
