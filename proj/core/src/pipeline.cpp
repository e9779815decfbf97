#include "attrevo/pipeline.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "attrevo/error.hpp"
#include "attrevo/evalkit.hpp"
#include "attrevo/store_io.hpp"
#include "attrevo/text.hpp"

namespace attrevo {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::ofstream open_append(const fs::path& path) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(Errc::Io, "cannot open " + path.string());
  return out;
}

void append_line(std::ofstream& out, const json& entry) {
  out << entry.dump() << '\n';
  out.flush();
}

}  // namespace

RunLog::RunLog(const fs::path& run_dir) {
  fs::create_directories(run_dir / "logs");
  iterations_ = open_append(run_dir / "logs" / "iterations.jsonl");
  mutations_ = open_append(run_dir / "logs" / "mutations.jsonl");
  http_ = open_append(run_dir / "logs" / "http.jsonl");
}

void RunLog::iteration(const json& entry) {
  std::lock_guard lock(mutex_);
  append_line(iterations_, entry);
}

void RunLog::mutation(const json& entry) {
  std::lock_guard lock(mutex_);
  append_line(mutations_, entry);
}

void RunLog::http(const json& entry) {
  std::lock_guard lock(mutex_);
  append_line(http_, entry);
}

std::string api_key_from_env(const BackendConfig& backend) {
  if (backend.api_key_env.empty()) return {};
  const char* value = std::getenv(backend.api_key_env.c_str());
  return value == nullptr ? std::string() : std::string(value);
}

namespace {

HttpClientOptions client_options(const BackendConfig& b, RunLog* log) {
  HttpClientOptions opts;
  opts.model = b.model;
  opts.api_key = api_key_from_env(b);
  opts.max_in_flight = b.max_in_flight;
  if (log != nullptr) opts.log = [log](const json& entry) { log->http(entry); };
  return opts;
}

}  // namespace

Runtime::Runtime(const RunConfig& config, RunLog* log) : config_(config) {
  config_.validate();
  if (!config_.paths.world.empty()) world_ = OracleWorld::load(config_.paths.world);

  auto transport_for = [&](const BackendConfig& b) -> HttpTransport& {
    if (b.kind == "fixture") {
      transports_.push_back(std::make_unique<FixtureTransport>(b.fixture));
      return *transports_.back();
    }
    transports_.push_back(
        std::make_unique<HttplibTransport>(b.base_url, std::chrono::milliseconds(b.timeout_ms)));
    if (!b.record.empty()) {
      HttpTransport& inner = *transports_.back();
      transports_.push_back(std::make_unique<RecordingTransport>(inner, b.record));
    }
    return *transports_.back();
  };

  if (config_.completion.kind == "mock") {
    if (!world_) throw Error(Errc::InvalidConfig, "the mock completion backend needs paths.world");
    completion_ = std::make_unique<MockCompletionClient>(world_->vocab(), config_.mock_policy, config_.p_keep,
                                                         config_.mutation.max_set_size);
  } else {
    completion_ = std::make_unique<HttpCompletionClient>(transport_for(config_.completion),
                                                         client_options(config_.completion, log));
  }

  if (config_.embedding.kind == "oracle") {
    if (!world_) throw Error(Errc::InvalidConfig, "the oracle embedding backend needs paths.world");
    embedding_ = std::make_unique<OracleEmbeddingBackend>(*world_);
  } else {
    embedding_ = std::make_unique<HttpEmbeddingBackend>(transport_for(config_.embedding),
                                                        client_options(config_.embedding, log));
  }

  auto cache = config_.paths.cache.empty() ? std::make_shared<EmbeddingCache>()
                                           : std::make_shared<EmbeddingCache>(config_.paths.cache);
  embedder_ = std::make_unique<TextEmbedder>(*embedding_, TemplateSet::create(config_.templates), std::move(cache));
}

Runtime::~Runtime() = default;

CompletionClient& Runtime::completion() { return *completion_; }

std::vector<Attribute> Runtime::pool() const {
  if (!config_.paths.pool.empty()) return load_pool(config_.paths.pool);
  if (!world_) throw Error(Errc::InvalidConfig, "no attribute pool: set paths.pool or paths.world");
  std::vector<Attribute> out;
  for (const auto& v : world_->vocab()) out.push_back(Attribute::canonicalize(v));
  return out;
}

std::vector<Attribute> load_pool(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open pool " + path.string());
  std::vector<Attribute> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    try {
      out.push_back(Attribute::canonicalize(t));
    } catch (const Error&) {
    }
  }
  return out;
}

Datasets load_datasets(const RunPaths& paths) {
  Datasets d;
  if (!paths.train.empty()) d.train = load_embedding_store(paths.train);
  if (!paths.test.empty()) d.test = load_embedding_store(paths.test);
  if (!paths.distractors.empty()) d.distractors = load_embedding_store(paths.distractors);
  return d;
}

std::vector<PretrainResult> pretrain_all(const RunConfig& config, const Mutator& mutator, TextEmbedder& embedder,
                                         const EmbeddingStore& train, const EmbeddingStore* distractors,
                                         std::span<const Attribute> pool,
                                         const std::function<void(const PretrainResult&)>& on_class) {
  std::vector<PretrainResult> out;
  for (int c = 0; c < train.class_count(); ++c) {
    out.push_back(run_pretrain(c, config.pretrain, mutator, embedder, train, distractors, pool));
    if (on_class) on_class(out.back());
  }
  return out;
}

json trajectories_to_json(std::span<const PretrainResult> results) {
  json classes = json::array();
  for (const auto& r : results) {
    classes.push_back({{"class_id", r.class_id},
                       {"iterations", r.final_state.iteration},
                       {"final_objective", r.final_state.best_loss},
                       {"trajectory", to_json(r.trajectory)}});
  }
  return json{{"classes", classes}};
}

std::vector<std::vector<ScoredSet>> trajectories_from_json(const json& j) {
  std::vector<std::vector<ScoredSet>> out;
  try {
    for (const auto& entry : j.at("classes")) {
      const int c = entry.at("class_id").get<int>();
      if (c != static_cast<int>(out.size())) {
        throw Error(Errc::MissingClassTrajectory, "trajectory for class " + std::to_string(out.size()) + " missing");
      }
      out.push_back(trajectory_from_json(entry.at("trajectory"), c));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("corrupt trajectories: ") + e.what());
  }
  return out;
}

EngineState initial_joint_state(const RunConfig& config, const Objective& objective,
                                const std::vector<std::vector<ScoredSet>>* trajectories,
                                std::span<const Attribute> pool) {
  Rng rng(config.engine.seed);
  ClassifierBank bank =
      trajectories != nullptr
          ? seed_joint_bank(*trajectories, config.engine.initial_hypotheses, objective, rng,
                            config.pretrain.seed_decay, config.engine.capacity)
          : init_bank(pool, config.engine, objective, rng);
  return EngineState::start(config.engine, std::move(bank), std::move(rng));
}

Checkpoint make_checkpoint(const RunConfig& config, const EngineState& state, std::string stage) {
  Checkpoint cp;
  cp.stage = std::move(stage);
  cp.run_config = to_json(config);
  cp.prompt_template_version = std::string(prompt_template_version());
  cp.state = state;
  return cp;
}

fs::path write_checkpoint(const fs::path& run_dir, const Checkpoint& checkpoint) {
  const fs::path dir = run_dir / "checkpoints";
  fs::create_directories(dir);
  char name[32];
  std::snprintf(name, sizeof name, "iter_%06zu.json", checkpoint.state.iteration);
  const fs::path path = dir / name;
  checkpoint.save(path);
  checkpoint.save(dir / "latest.json");
  return path;
}

std::optional<fs::path> latest_checkpoint(const fs::path& run_dir) {
  const fs::path latest = run_dir / "checkpoints" / "latest.json";
  if (fs::exists(latest)) return latest;
  return std::nullopt;
}

json Evaluation::to_json() const {
  return json{{"accuracy", accuracy}, {"margin", margin}, {"per_class_accuracy", per_class}, {"confusion", confusion}};
}

Evaluation evaluate(const Classifier& classifier, const EmbeddingStore& store, TextEmbedder& embedder,
                    double temperature) {
  const Scorer scorer(store, embedder);
  const ScoreTable table = scorer.score_table(classifier, temperature);
  Evaluation e;
  e.accuracy = accuracy(table, store.labels());
  e.margin = margin(table);
  e.per_class = per_class_accuracy(table, store.labels());
  e.confusion = confusion_matrix(table, store.labels());
  return e;
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::InvalidArgument, path.string() + ": " + e.what());
  }
}

}  // namespace attrevo
