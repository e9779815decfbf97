#include "attrevo/embedding.hpp"

#include <cmath>
#include <cstdio>
#include <mutex>

#include <nlohmann/json.hpp>

#include "attrevo/error.hpp"
#include "attrevo/rng.hpp"

namespace attrevo {

TemplateSet TemplateSet::create(std::vector<std::string> templates) {
  if (templates.empty()) throw Error(Errc::InvalidConfig, "template set is empty");
  std::uint64_t h = fnv1a("templates");
  for (const std::string& t : templates) {
    const auto first = t.find("{}");
    if (first == std::string::npos || t.find("{}", first + 2) != std::string::npos) {
      throw Error(Errc::InvalidConfig, "template '" + t + "' must hold exactly one {}");
    }
    h = fnv1a(t, h);
    h = fnv1a(std::string_view("\x1f", 1), h);
  }
  TemplateSet set;
  set.templates_ = std::move(templates);
  set.hash_ = h;
  return set;
}

std::string TemplateSet::fill(std::size_t i, std::string_view text) const {
  std::string out = templates_.at(i);
  out.replace(out.find("{}"), 2, text);
  return out;
}

double l2_norm(std::span<const float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  return std::sqrt(sq);
}

void l2_normalize(std::span<float> v) {
  const double n = l2_norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(Errc::MalformedResponse, "cannot normalize a zero or non-finite vector");
  }
  for (float& x : v) x = static_cast<float>(x / n);
}

EmbeddingCache::EmbeddingCache(std::filesystem::path file) : file_(std::move(file)) {
  if (std::filesystem::exists(*file_)) {
    std::ifstream in(*file_);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        entries_[j.at("key").get<std::string>()] = j.at("vec").get<Embedding>();
      } catch (const nlohmann::json::exception&) {
        // A torn final line from an interrupted run is skipped.
      }
    }
  }
  out_.open(*file_, std::ios::app);
  if (!out_) throw Error(Errc::Io, "cannot open cache file " + file_->string());
}

std::optional<Embedding> EmbeddingCache::get(const std::string& key) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::put(const std::string& key, const Embedding& value) {
  std::unique_lock lock(mutex_);
  const bool fresh = entries_.insert_or_assign(key, value).second;
  if (fresh && out_.is_open()) {
    out_ << nlohmann::json{{"key", key}, {"vec", value}}.dump() << '\n';
    out_.flush();
  }
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::string EmbeddingCache::key_for(std::string_view text, std::uint64_t templates_hash) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%016llx-%016llx",
                static_cast<unsigned long long>(templates_hash),
                static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

TextEmbedder::TextEmbedder(EmbeddingBackend& backend, TemplateSet templates,
                           std::shared_ptr<EmbeddingCache> cache)
    : backend_(&backend), templates_(std::move(templates)), cache_(std::move(cache)) {
  if (!cache_) cache_ = std::make_shared<EmbeddingCache>();
}

Embedding TextEmbedder::combine(std::span<const Embedding> per_template) const {
  const std::size_t dim = per_template.front().size();
  std::vector<double> acc(dim, 0.0);
  for (const Embedding& e : per_template) {
    if (e.size() != dim) throw Error(Errc::MalformedResponse, "embedding dims disagree");
    const double n = l2_norm(e);
    if (!(n > 0.0)) throw Error(Errc::MalformedResponse, "zero embedding from backend");
    for (std::size_t j = 0; j < dim; ++j) acc[j] += e[j] / n;
  }
  double sq = 0.0;
  for (double x : acc) sq += x * x;
  const double n = std::sqrt(sq);
  if (!(n > 0.0)) throw Error(Errc::MalformedResponse, "template embeddings cancel out");
  Embedding out(dim);
  for (std::size_t j = 0; j < dim; ++j) out[j] = static_cast<float>(acc[j] / n);
  return out;
}

Embedding TextEmbedder::embed_text(std::string_view text) {
  if (text.empty()) throw Error(Errc::InvalidArgument, "cannot embed empty text");
  const std::string key = EmbeddingCache::key_for(text, templates_.hash());
  if (auto hit = cache_->get(key)) return *hit;
  std::vector<std::string> filled;
  for (std::size_t i = 0; i < templates_.templates().size(); ++i) {
    filled.push_back(templates_.fill(i, text));
  }
  const auto raw = backend_->embed(filled);
  if (raw.size() != filled.size()) throw Error(Errc::MalformedResponse, "backend returned wrong count");
  Embedding result = combine(raw);
  cache_->put(key, result);
  return result;
}

void TextEmbedder::warm(std::span<const std::string> texts) {
  const std::size_t t = templates_.templates().size();
  std::vector<std::string> pending;
  std::vector<std::string> filled;
  for (const std::string& text : texts) {
    if (text.empty()) continue;
    if (cache_->get(EmbeddingCache::key_for(text, templates_.hash()))) continue;
    pending.push_back(text);
    for (std::size_t i = 0; i < t; ++i) filled.push_back(templates_.fill(i, text));
  }
  if (pending.empty()) return;
  const auto raw = backend_->embed(filled);
  if (raw.size() != filled.size()) throw Error(Errc::MalformedResponse, "backend returned wrong count");
  for (std::size_t p = 0; p < pending.size(); ++p) {
    std::span<const Embedding> group(raw.data() + p * t, t);
    cache_->put(EmbeddingCache::key_for(pending[p], templates_.hash()), combine(group));
  }
}

}  // namespace attrevo
