#include "attrevo/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>

#include "attrevo/embedding.hpp"
#include "attrevo/error.hpp"

namespace attrevo {

using nlohmann::json;

namespace {

void require_object(const json& j, const char* what) {
  if (!j.is_object()) throw Error(Errc::InvalidConfig, std::string(what) + " must be a JSON object");
}

void reject_unknown(const json& j, const char* what, std::initializer_list<const char*> known) {
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw Error(Errc::InvalidConfig, std::string("unknown key '") + key + "' in " + what);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::InvalidConfig, std::string("bad value for '") + key + "'");
  }
}

json to_json(const BackendConfig& b) {
  return json{{"kind", b.kind},           {"base_url", b.base_url},       {"model", b.model},
              {"api_key_env", b.api_key_env}, {"timeout_ms", b.timeout_ms}, {"max_in_flight", b.max_in_flight},
              {"fixture", b.fixture},     {"record", b.record}};
}

BackendConfig backend_from_json(const json& j, BackendConfig b) {
  require_object(j, "backend");
  reject_unknown(j, "backend",
                 {"kind", "base_url", "model", "api_key_env", "timeout_ms", "max_in_flight", "fixture", "record"});
  read(j, "kind", b.kind);
  read(j, "base_url", b.base_url);
  read(j, "model", b.model);
  read(j, "api_key_env", b.api_key_env);
  read(j, "timeout_ms", b.timeout_ms);
  read(j, "max_in_flight", b.max_in_flight);
  read(j, "fixture", b.fixture);
  read(j, "record", b.record);
  return b;
}

json to_json(const MutationConfig& m) {
  return json{{"k", m.k},
              {"max_set_size", m.max_set_size},
              {"retry_limit", m.retry_limit},
              {"show_scores", m.show_scores},
              {"temperature", m.temperature},
              {"temperature_step", m.temperature_step}};
}

MutationConfig mutation_from_json(const json& j) {
  require_object(j, "mutation");
  reject_unknown(j, "mutation", {"k", "max_set_size", "retry_limit", "show_scores", "temperature", "temperature_step"});
  MutationConfig m;
  read(j, "k", m.k);
  read(j, "max_set_size", m.max_set_size);
  read(j, "retry_limit", m.retry_limit);
  read(j, "show_scores", m.show_scores);
  read(j, "temperature", m.temperature);
  read(j, "temperature_step", m.temperature_step);
  return m;
}

void validate_backend(const BackendConfig& b, std::initializer_list<const char*> kinds, const char* what) {
  bool ok = false;
  for (const char* k : kinds) ok = ok || b.kind == k;
  if (!ok) throw Error(Errc::InvalidConfig, std::string("unsupported ") + what + " backend '" + b.kind + "'");
  if (b.kind == "http" && b.base_url.empty()) {
    throw Error(Errc::InvalidConfig, std::string(what) + " backend 'http' needs base_url");
  }
  if (b.kind == "fixture" && b.fixture.empty()) {
    throw Error(Errc::InvalidConfig, std::string(what) + " backend 'fixture' needs a fixture file");
  }
  if (b.timeout_ms < 1) throw Error(Errc::InvalidConfig, "timeout_ms must be >= 1");
  if (b.max_in_flight < 1) throw Error(Errc::InvalidConfig, "max_in_flight must be >= 1");
}

}  // namespace

void to_json(json& j, const EngineConfig& c) {
  j = json{{"initial_hypotheses", c.initial_hypotheses},
           {"samples_per_step", c.samples_per_step},
           {"sampling_temperature", c.sampling_temperature},
           {"bias", std::string(to_string(c.bias))},
           {"max_iterations", c.max_iterations},
           {"patience", c.patience},
           {"checkpoint_interval", c.checkpoint_interval},
           {"initial_set_size", c.initial_set_size},
           {"seed", c.seed},
           {"workers", c.workers}};
  j["capacity"] = c.capacity ? json(*c.capacity) : json(nullptr);
}

EngineConfig engine_config_from_json(const json& j) {
  require_object(j, "engine");
  reject_unknown(j, "engine",
                 {"initial_hypotheses", "samples_per_step", "sampling_temperature", "bias", "max_iterations",
                  "patience", "capacity", "checkpoint_interval", "initial_set_size", "seed", "workers"});
  EngineConfig c;
  read(j, "initial_hypotheses", c.initial_hypotheses);
  read(j, "samples_per_step", c.samples_per_step);
  read(j, "sampling_temperature", c.sampling_temperature);
  if (j.contains("bias")) {
    try {
      c.bias = sampling_bias_from_string(j.at("bias").get<std::string>());
    } catch (const json::exception&) {
      throw Error(Errc::InvalidConfig, "bad value for 'bias'");
    }
  }
  read(j, "max_iterations", c.max_iterations);
  read(j, "patience", c.patience);
  if (j.contains("capacity")) {
    if (j.at("capacity").is_null()) {
      c.capacity.reset();
    } else {
      std::size_t cap = 0;
      read(j, "capacity", cap);
      c.capacity = cap;
    }
  }
  read(j, "checkpoint_interval", c.checkpoint_interval);
  read(j, "initial_set_size", c.initial_set_size);
  read(j, "seed", c.seed);
  read(j, "workers", c.workers);
  return c;
}

void RunConfig::validate() const {
  engine.validate();
  pretrain.engine.validate();
  if (mutation.k < 1) throw Error(Errc::InvalidConfig, "mutation.k must be >= 1");
  if (mutation.max_set_size < 1) throw Error(Errc::InvalidConfig, "mutation.max_set_size must be >= 1");
  if (mutation.retry_limit < 1) throw Error(Errc::InvalidConfig, "mutation.retry_limit must be >= 1");
  if (!(mutation.temperature >= 0.0)) throw Error(Errc::InvalidConfig, "mutation.temperature must be >= 0");
  if (!(score_temperature > 0.0) || !std::isfinite(score_temperature)) {
    throw Error(Errc::InvalidConfig, "score_temperature must be positive");
  }
  if (!(pretrain.seed_decay > 0.0 && pretrain.seed_decay <= 1.0)) {
    throw Error(Errc::InvalidConfig, "pretrain.seed_decay must be in (0, 1]");
  }
  if (!(p_keep >= 0.0 && p_keep <= 1.0)) throw Error(Errc::InvalidConfig, "p_keep must be in [0, 1]");
  try {
    (void)TemplateSet::create(templates);
  } catch (const Error& e) {
    throw Error(Errc::InvalidConfig, e.what());
  }
  validate_backend(completion, {"mock", "http", "fixture"}, "completion");
  validate_backend(embedding, {"oracle", "http", "fixture"}, "embedding");
}

void RunConfig::propagate_seed() {
  engine.seed = seed;
  pretrain.engine.seed = seed;
}

json to_json(const RunConfig& c) {
  json engine;
  to_json(engine, c.engine);
  json pre_engine;
  to_json(pre_engine, c.pretrain.engine);
  return json{{"seed", c.seed},
              {"paths",
               {{"train", c.paths.train},
                {"test", c.paths.test},
                {"distractors", c.paths.distractors},
                {"world", c.paths.world},
                {"pool", c.paths.pool},
                {"run_dir", c.paths.run_dir},
                {"cache", c.paths.cache}}},
              {"engine", engine},
              {"pretrain",
               {{"enabled", c.pretrain_enabled},
                {"engine", pre_engine},
                {"require_distractors", c.pretrain.require_distractors},
                {"seed_decay", c.pretrain.seed_decay}}},
              {"mutation", to_json(c.mutation)},
              {"score_temperature", c.score_temperature},
              {"templates", c.templates},
              {"completion", to_json(c.completion)},
              {"embedding", to_json(c.embedding)},
              {"mock_policy", std::string(to_string(c.mock_policy))},
              {"p_keep", c.p_keep}};
}

RunConfig run_config_from_json(const json& j) {
  require_object(j, "config");
  reject_unknown(j, "config",
                 {"seed", "paths", "engine", "pretrain", "mutation", "score_temperature", "templates", "completion",
                  "embedding", "mock_policy", "p_keep"});
  RunConfig c;
  read(j, "seed", c.seed);
  if (j.contains("paths")) {
    const json& p = j.at("paths");
    require_object(p, "paths");
    reject_unknown(p, "paths", {"train", "test", "distractors", "world", "pool", "run_dir", "cache"});
    read(p, "train", c.paths.train);
    read(p, "test", c.paths.test);
    read(p, "distractors", c.paths.distractors);
    read(p, "world", c.paths.world);
    read(p, "pool", c.paths.pool);
    read(p, "run_dir", c.paths.run_dir);
    read(p, "cache", c.paths.cache);
  }
  if (j.contains("engine")) c.engine = engine_config_from_json(j.at("engine"));
  if (j.contains("pretrain")) {
    const json& p = j.at("pretrain");
    require_object(p, "pretrain");
    reject_unknown(p, "pretrain", {"enabled", "engine", "require_distractors", "seed_decay"});
    read(p, "enabled", c.pretrain_enabled);
    if (p.contains("engine")) {
      // Pre-training keeps its own iteration defaults unless overridden.
      json merged;
      to_json(merged, c.pretrain.engine);
      merged.update(p.at("engine"));
      c.pretrain.engine = engine_config_from_json(merged);
    }
    read(p, "require_distractors", c.pretrain.require_distractors);
    read(p, "seed_decay", c.pretrain.seed_decay);
  }
  if (j.contains("mutation")) c.mutation = mutation_from_json(j.at("mutation"));
  read(j, "score_temperature", c.score_temperature);
  read(j, "templates", c.templates);
  if (j.contains("completion")) c.completion = backend_from_json(j.at("completion"), c.completion);
  if (j.contains("embedding")) c.embedding = backend_from_json(j.at("embedding"), c.embedding);
  if (j.contains("mock_policy")) {
    std::string s;
    read(j, "mock_policy", s);
    c.mock_policy = mock_policy_from_string(s);
  }
  read(j, "p_keep", c.p_keep);
  if (!j.contains("engine") || !j.at("engine").contains("seed")) c.engine.seed = c.seed;
  if (!j.contains("pretrain") || !j.at("pretrain").contains("engine") ||
      !j.at("pretrain").at("engine").contains("seed")) {
    c.pretrain.engine.seed = c.seed;
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c = run_config_from_json(j);
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(c.paths.train);
  resolve(c.paths.test);
  resolve(c.paths.distractors);
  resolve(c.paths.world);
  resolve(c.paths.pool);
  resolve(c.paths.run_dir);
  resolve(c.paths.cache);
  resolve(c.completion.fixture);
  resolve(c.completion.record);
  resolve(c.embedding.fixture);
  resolve(c.embedding.record);
  return c;
}

}  // namespace attrevo
