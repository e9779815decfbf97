#include "attrevo/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <set>
#include <unordered_set>

#include "attrevo/error.hpp"
#include "attrevo/fitness.hpp"
#include "attrevo/mutation.hpp"
#include "attrevo/rng.hpp"

namespace attrevo {

using nlohmann::json;

namespace {

constexpr std::array<const char*, 25> kTexture = {
    "pale",     "dark",    "glossy",  "matte",   "ribbed",      "speckled", "striped",
    "fuzzy",    "waxy",    "wrinkled", "serrated", "lobed",     "curled",   "spotted",
    "translucent", "powdery", "scaly", "veined", "branching", "tufted", "smooth",
    "rough",    "jagged",  "mottled", "banded"};
constexpr std::array<const char*, 16> kColor = {
    "orange", "yellow", "green", "grey", "brown", "red",  "white",  "black",
    "olive",  "rust",   "cream", "blue", "purple", "tan", "pink", "silver"};
constexpr std::array<const char*, 20> kPart = {
    "lobes", "edges",   "stems",  "tips",    "caps",    "leaves",   "patches",
    "ridges", "scales", "fins",   "spines",  "berries", "bark",     "petals",
    "fronds", "margins", "clusters", "threads", "spots", "bristles"};

Embedding random_unit(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double sq = 0.0;
  for (double& x : v) {
    x = rng.normal();
    sq += x * x;
  }
  const double n = std::sqrt(sq);
  Embedding out(dim);
  for (std::size_t j = 0; j < dim; ++j) out[j] = static_cast<float>(v[j] / n);
  return out;
}

// Orthonormal vectors (in double) from gaussian draws via modified Gram-Schmidt.
std::vector<std::vector<double>> orthonormal(Rng& rng, std::size_t count, std::size_t dim) {
  std::vector<std::vector<double>> basis;
  while (basis.size() < count) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    for (const auto& b : basis) {
      const double d = std::inner_product(v.begin(), v.end(), b.begin(), 0.0);
      for (std::size_t j = 0; j < dim; ++j) v[j] -= d * b[j];
    }
    const double n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (n < 1e-6) continue;
    for (double& x : v) x /= n;
    basis.push_back(std::move(v));
  }
  return basis;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += static_cast<double>(a[j]) * b[j];
  return s;
}

std::uint64_t split_stream(SplitTag split) {
  switch (split) {
    case SplitTag::Train: return 101;
    case SplitTag::Validation: return 102;
    case SplitTag::Test: return 103;
    case SplitTag::Distractor: return 104;
  }
  return 100;
}

std::vector<std::string> words_of(const std::string& s) {
  std::vector<std::string> words;
  std::istringstream in(s);
  for (std::string w; in >> w;) {
    std::transform(w.begin(), w.end(), w.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    const auto keep = [](unsigned char ch) { return std::isalnum(ch) != 0; };
    const auto first = std::find_if(w.begin(), w.end(), keep);
    const auto last = std::find_if(w.rbegin(), w.rend(), keep).base();
    if (first < last) words.emplace_back(first, last);
  }
  return words;
}

}  // namespace

void to_json(json& j, const OracleWorldParams& p) {
  j = json{{"dim", p.dim},
           {"classes", p.classes},
           {"truth_per_class", p.truth_per_class},
           {"vocab_size", p.vocab_size},
           {"noise_sigma", p.noise_sigma},
           {"coherence", p.coherence},
           {"seed", p.seed},
           {"min_margin", p.min_margin}};
}

void from_json(const json& j, OracleWorldParams& p) {
  const OracleWorldParams d;
  p.dim = j.value("dim", d.dim);
  p.classes = j.value("classes", d.classes);
  p.truth_per_class = j.value("truth_per_class", d.truth_per_class);
  p.vocab_size = j.value("vocab_size", d.vocab_size);
  p.noise_sigma = j.value("noise_sigma", d.noise_sigma);
  p.coherence = j.value("coherence", d.coherence);
  p.seed = j.value("seed", d.seed);
  p.min_margin = j.value("min_margin", d.min_margin);
}

OracleWorld OracleWorld::build(const OracleWorldParams& params) {
  const std::size_t n_truth = params.classes * params.truth_per_class;
  const std::size_t combos = kTexture.size() * kColor.size() * kPart.size();
  if (params.classes < 2 || params.truth_per_class < 1) {
    throw Error(Errc::InvalidConfig, "oracle world needs >= 2 classes and >= 1 truth attribute each");
  }
  if (params.vocab_size < n_truth || params.vocab_size > combos) {
    throw Error(Errc::InvalidConfig, "vocab_size must lie in [classes*truth_per_class, " +
                                         std::to_string(combos) + "]");
  }
  if (params.dim < params.classes * (params.truth_per_class + 1)) {
    throw Error(Errc::InvalidConfig, "dim too small for orthogonal class structure");
  }
  if (params.coherence < 0.0 || params.coherence >= 1.0 || params.noise_sigma < 0.0) {
    throw Error(Errc::InvalidConfig, "coherence must lie in [0,1) and noise_sigma >= 0");
  }

  OracleWorld w;
  w.params_ = params;
  Rng rng(mix_seed(params.seed, 7));

  // Partial Fisher-Yates over the phrase grid.
  std::vector<std::size_t> ids(combos);
  std::iota(ids.begin(), ids.end(), 0);
  for (std::size_t i = 0; i < params.vocab_size; ++i) {
    std::swap(ids[i], ids[i + rng.below(combos - i)]);
  }
  for (std::size_t i = 0; i < params.vocab_size; ++i) {
    const std::size_t id = ids[i];
    const std::size_t a = id / (kColor.size() * kPart.size());
    const std::size_t b = (id / kPart.size()) % kColor.size();
    const std::size_t c = id % kPart.size();
    w.vocab_.push_back(std::string(kTexture[a]) + " " + kColor[b] + " " + kPart[c]);
    w.index_.emplace(w.vocab_.back(), i);
  }

  const auto basis = orthonormal(rng, params.classes * (params.truth_per_class + 1), params.dim);
  const double shared = std::sqrt(params.coherence);
  const double own = std::sqrt(1.0 - params.coherence);
  w.truth_.resize(params.classes);
  w.vectors_.resize(params.vocab_size);
  w.class_mean_.assign(params.classes, Embedding(params.dim, 0.0f));
  for (std::size_t c = 0; c < params.classes; ++c) {
    const auto& u = basis[c];
    std::vector<double> mean(params.dim, 0.0);
    for (std::size_t i = 0; i < params.truth_per_class; ++i) {
      const std::size_t vi = c * params.truth_per_class + i;
      const auto& v = basis[params.classes + vi];
      Embedding e(params.dim);
      for (std::size_t j = 0; j < params.dim; ++j) {
        const double x = shared * u[j] + own * v[j];
        e[j] = static_cast<float>(x);
        mean[j] += x / static_cast<double>(params.truth_per_class);
      }
      w.vectors_[vi] = std::move(e);
      w.truth_[c].push_back(w.vocab_[vi]);
    }
    for (std::size_t j = 0; j < params.dim; ++j) w.class_mean_[c][j] = static_cast<float>(mean[j]);
  }
  for (std::size_t vi = n_truth; vi < params.vocab_size; ++vi) {
    w.vectors_[vi] = random_unit(rng, params.dim);
  }

  // Construction checks: cross-class truth vectors near-orthogonal, and each
  // truth set separates its class by the required margin on a probe sample.
  for (std::size_t a = 0; a < n_truth; ++a) {
    for (std::size_t b = a + 1; b < n_truth; ++b) {
      if (a / params.truth_per_class == b / params.truth_per_class) continue;
      if (std::abs(dot(w.vectors_[a], w.vectors_[b])) >= 0.2) {
        throw Error(Errc::InvalidConfig, "truth vectors of different classes are not orthogonal");
      }
    }
  }
  const EmbeddingStore probe = w.generate(40, SplitTag::Validation);
  for (std::size_t c = 0; c < params.classes; ++c) {
    double own_sum = 0.0, other_sum = 0.0;
    std::size_t own_n = 0, other_n = 0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
      double s = 0.0;
      for (std::size_t t = 0; t < params.truth_per_class; ++t) {
        s += dot(w.vectors_[c * params.truth_per_class + t], probe.row(i));
      }
      s /= static_cast<double>(params.truth_per_class);
      if (probe.label(i) == static_cast<int>(c)) {
        own_sum += s;
        ++own_n;
      } else {
        other_sum += s;
        ++other_n;
      }
    }
    const double margin = own_sum / static_cast<double>(own_n) - other_sum / static_cast<double>(other_n);
    if (margin < params.min_margin) {
      throw Error(Errc::InvalidConfig, "seed " + std::to_string(params.seed) + " rejected: class " +
                                           std::to_string(c) + " margin " + std::to_string(margin));
    }
  }
  return w;
}

bool OracleWorld::is_ground_truth(const std::string& text) const {
  const auto it = index_.find(text);
  return it != index_.end() && it->second < params_.classes * params_.truth_per_class;
}

AttributeSet OracleWorld::truth_set(std::size_t c) const {
  std::vector<Attribute> attrs;
  for (const auto& t : truth_.at(c)) attrs.push_back(Attribute::canonicalize(t));
  return AttributeSet::dedup(attrs, static_cast<int>(c), attrs.size());
}

Classifier OracleWorld::truth_classifier() const {
  std::vector<AttributeSet> sets;
  for (std::size_t c = 0; c < params_.classes; ++c) sets.push_back(truth_set(c));
  return Classifier(std::move(sets));
}

Embedding OracleWorld::attribute_vector(const std::string& text) const {
  if (const auto it = index_.find(text); it != index_.end()) return vectors_[it->second];
  Rng rng(mix_seed(params_.seed, fnv1a(text)));
  return random_unit(rng, params_.dim);
}

Embedding OracleWorld::text_vector(const std::string& filled) const {
  const auto words = words_of(filled);
  for (std::size_t len = std::min<std::size_t>(words.size(), 3); len >= 1; --len) {
    for (std::size_t start = 0; start + len <= words.size(); ++start) {
      std::string phrase = words[start];
      for (std::size_t k = 1; k < len; ++k) phrase += " " + words[start + k];
      if (const auto it = index_.find(phrase); it != index_.end()) return vectors_[it->second];
    }
  }
  std::string joined;
  for (const auto& word : words) joined += (joined.empty() ? "" : " ") + word;
  return attribute_vector(joined);
}

EmbeddingStore OracleWorld::generate(std::size_t images_per_class, SplitTag split) const {
  Rng rng(mix_seed(params_.seed, split_stream(split)));
  const std::size_t dim = params_.dim;
  std::vector<float> data;
  std::vector<int> labels;
  if (split == SplitTag::Distractor) {
    for (std::size_t i = 0; i < images_per_class * params_.classes; ++i) {
      const Embedding e = random_unit(rng, dim);
      data.insert(data.end(), e.begin(), e.end());
      labels.push_back(kDistractorLabel);
    }
  } else {
    for (std::size_t c = 0; c < params_.classes; ++c) {
      for (std::size_t i = 0; i < images_per_class; ++i) {
        std::vector<double> v(dim);
        double sq = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          v[j] = class_mean_[c][j] + params_.noise_sigma * rng.normal();
          sq += v[j] * v[j];
        }
        const double n = std::sqrt(sq);
        for (std::size_t j = 0; j < dim; ++j) data.push_back(static_cast<float>(v[j] / n));
        labels.push_back(static_cast<int>(c));
      }
    }
  }
  return EmbeddingStore::create(dim, static_cast<int>(params_.classes), split, std::move(data),
                                std::move(labels));
}

json OracleWorld::to_json() const {
  return json{{"format", "attrevo-oracle-world-v1"},
              {"params", params_},
              {"vocab", vocab_},
              {"ground_truth", truth_}};
}

OracleWorld OracleWorld::from_json(const json& j) {
  OracleWorld w = build(j.at("params").get<OracleWorldParams>());
  if (j.contains("vocab") && j.at("vocab").get<std::vector<std::string>>() != w.vocab_) {
    throw Error(Errc::InvalidConfig, "oracle world vocabulary does not match its parameters");
  }
  return w;
}

void OracleWorld::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

OracleWorld OracleWorld::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, "bad oracle world file: " + std::string(e.what()));
  }
}

std::vector<Embedding> OracleEmbeddingBackend::embed(std::span<const std::string> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(world_->text_vector(t));
  return out;
}

std::string_view to_string(MockPolicy p) noexcept {
  switch (p) {
    case MockPolicy::KeepBestLines: return "keep-best-lines";
    case MockPolicy::SampleBest: return "sample-best";
    case MockPolicy::InContext: return "in-context";
  }
  return "sample-best";
}

MockPolicy mock_policy_from_string(std::string_view s) {
  if (s == "keep-best-lines") return MockPolicy::KeepBestLines;
  if (s == "sample-best") return MockPolicy::SampleBest;
  if (s == "in-context") return MockPolicy::InContext;
  throw Error(Errc::InvalidConfig, "unknown mock policy '" + std::string(s) + "'");
}

MockCompletionClient::MockCompletionClient(std::vector<std::string> vocab, MockPolicy policy,
                                           double p_keep, std::size_t max_set_size)
    : vocab_(std::move(vocab)), policy_(policy), p_keep_(p_keep), max_set_size_(max_set_size) {
  if (vocab_.empty()) throw Error(Errc::InvalidConfig, "mock completion needs a vocabulary");
  if (p_keep_ < 0.0 || p_keep_ > 1.0) throw Error(Errc::InvalidConfig, "p_keep must lie in [0,1]");
  if (max_set_size_ == 0) throw Error(Errc::InvalidConfig, "max_set_size must be >= 1");
}

std::string MockCompletionClient::complete(const CompletionRequest& request) {
  return mock_complete(request.prompt, request.seed);
}

std::string MockCompletionClient::mock_complete(const std::string& prompt, std::uint64_t seed) const {
  Rng rng(mix_seed(seed, fnv1a(prompt)));
  const auto blocks = parse_prompt_examples(prompt);

  std::vector<std::string> kept;
  std::unordered_set<std::string> used;
  if (!blocks.empty()) {
    // Verbatim repeats of one set add no evidence, so count distinct sets.
    const std::set<std::vector<std::string>> distinct(blocks.begin(), blocks.end());
    for (const std::string& line : blocks.back()) {
      double keep = p_keep_;
      if (policy_ == MockPolicy::KeepBestLines) {
        keep = 1.0;
      } else if (policy_ == MockPolicy::InContext) {
        const auto n = std::count_if(distinct.begin(), distinct.end(), [&](const auto& b) {
          return std::find(b.begin(), b.end(), line) != b.end();
        });
        keep = 1.0 - std::pow(1.0 - p_keep_, static_cast<double>(n));
      }
      if (rng.bernoulli(keep) && used.insert(line).second) kept.push_back(line);
    }
  }
  if (kept.size() > max_set_size_) kept.resize(max_set_size_);

  const std::size_t room = max_set_size_ - kept.size();
  const std::size_t min_fresh = kept.empty() ? 1 : 0;
  const std::size_t fresh = room == 0 ? 0 : min_fresh + rng.below(room - min_fresh + 1);
  std::vector<std::string> lines = kept;
  for (std::size_t added = 0, guard = 0; added < fresh && guard < 100 * max_set_size_; ++guard) {
    const std::string& cand = vocab_[rng.below(vocab_.size())];
    if (used.insert(cand).second) {
      lines.push_back(cand);
      ++added;
    }
  }

  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) out += std::to_string(i + 1) + ". " + lines[i] + "\n";
  return out;
}

}  // namespace attrevo
