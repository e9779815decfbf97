#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace attrevo {

using Embedding = std::vector<float>;

/// Raw text-to-vector service: a remote model, the oracle world, or a test
/// double. Implementations must be callable from several threads.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  /// One vector per input text, same order. Vectors need not be normalized.
  virtual std::vector<Embedding> embed(std::span<const std::string> texts) = 0;
};

/// Prompt templates whose embeddings are averaged per attribute; each holds
/// exactly one "{}" placeholder.
class TemplateSet {
 public:
  static TemplateSet create(std::vector<std::string> templates);
  static TemplateSet single_default() { return create({"a photo of {}"}); }

  [[nodiscard]] const std::vector<std::string>& templates() const noexcept { return templates_; }
  [[nodiscard]] std::string fill(std::size_t i, std::string_view text) const;
  /// Content hash over the template strings; part of every cache key.
  [[nodiscard]] std::uint64_t hash() const noexcept { return hash_; }

 private:
  std::vector<std::string> templates_;
  std::uint64_t hash_ = 0;
};

void l2_normalize(std::span<float> v);
double l2_norm(std::span<const float> v);

/// Thread-safe text-embedding cache. With a backing file, entries are
/// appended as JSON lines keyed by content hash and reloaded on open.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  explicit EmbeddingCache(std::filesystem::path file);

  [[nodiscard]] std::optional<Embedding> get(const std::string& key) const;
  void put(const std::string& key, const Embedding& value);
  [[nodiscard]] std::size_t size() const;

  static std::string key_for(std::string_view text, std::uint64_t templates_hash);

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, Embedding> entries_;
  std::optional<std::filesystem::path> file_;
  std::ofstream out_;
};

/// Resolves an attribute text to a unit vector: fill every template, embed,
/// normalize each, average, re-normalize. Results are cached, and a warm key
/// is served even when the backend is down.
class TextEmbedder {
 public:
  TextEmbedder(EmbeddingBackend& backend, TemplateSet templates,
               std::shared_ptr<EmbeddingCache> cache = std::make_shared<EmbeddingCache>());

  Embedding embed_text(std::string_view text);
  /// Embeds every uncached text with a single backend call.
  void warm(std::span<const std::string> texts);

  [[nodiscard]] const TemplateSet& templates() const noexcept { return templates_; }
  [[nodiscard]] EmbeddingCache& cache() noexcept { return *cache_; }

 private:
  Embedding combine(std::span<const Embedding> per_template) const;

  EmbeddingBackend* backend_;
  TemplateSet templates_;
  std::shared_ptr<EmbeddingCache> cache_;
};

}  // namespace attrevo
