#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "attrevo/checkpoint.hpp"
#include "attrevo/config.hpp"
#include "attrevo/error.hpp"
#include "attrevo/evalkit.hpp"
#include "attrevo/oracle.hpp"
#include "attrevo/pipeline.hpp"
#include "attrevo/store_io.hpp"
#include "attrevo/text.hpp"

namespace attrevo::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> pretrain_iterations;
  std::optional<std::size_t> prompt_length;
  std::optional<std::string> bias;
  std::optional<std::string> templates;
  std::optional<std::string> run_dir;
  std::optional<std::size_t> workers;
  bool no_pretrain = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Override the run seed");
  cmd->add_option("--iterations", o.iterations, "Joint-search iterations (max_iterations)");
  cmd->add_option("--pretrain-iterations", o.pretrain_iterations, "Pre-training iterations per class");
  cmd->add_option("--prompt-length", o.prompt_length, "In-context example sets per prompt (k)")
      ->check(CLI::IsMember({1, 10}));
  cmd->add_option("--bias", o.bias, "Bank sampling bias")->check(CLI::IsMember({"best", "worst"}));
  cmd->add_option("--templates", o.templates, "File with one prompt template per line, each containing {}")
      ->check(CLI::ExistingFile);
  cmd->add_option("--run-dir", o.run_dir, "Override paths.run_dir");
  cmd->add_option("--workers", o.workers, "Per-class worker threads");
}

std::vector<std::string> read_templates(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (!t.empty() && t.front() != '#') out.emplace_back(t);
  }
  return out;
}

RunConfig resolve_config(const Overrides& o) {
  RunConfig c = load_run_config(o.config);
  if (o.seed) {
    c.seed = *o.seed;
    c.propagate_seed();
  }
  if (o.iterations) c.engine.max_iterations = *o.iterations;
  if (o.pretrain_iterations) {
    c.pretrain.engine.max_iterations = *o.pretrain_iterations;
    c.pretrain.engine.patience = std::max(c.pretrain.engine.patience, *o.pretrain_iterations);
  }
  if (o.prompt_length) c.mutation.k = *o.prompt_length;
  if (o.bias) {
    c.engine.bias = sampling_bias_from_string(*o.bias);
    c.pretrain.engine.bias = c.engine.bias;
  }
  if (o.templates) c.templates = read_templates(*o.templates);
  if (o.run_dir) c.paths.run_dir = *o.run_dir;
  if (o.workers) c.engine.workers = *o.workers;
  if (o.no_pretrain) c.pretrain_enabled = false;
  c.validate();
  return c;
}

/// Mutation audit records tagged with the current stage and class.
struct AuditContext {
  RunLog* log = nullptr;
  std::string stage;
  int class_id = -1;

  MutationAudit callback() {
    return [this](const MutationRecord& r) {
      json j = r.to_json();
      j["stage"] = stage;
      if (class_id >= 0) j["class_id"] = class_id;
      log->mutation(j);
    };
  }
};

const EmbeddingStore& require(const std::optional<EmbeddingStore>& store, const char* what) {
  if (!store) throw Error(Errc::InvalidConfig, std::string("paths.") + what + " is not configured");
  return *store;
}

json iteration_entry(const std::string& stage, int class_id, const IterationRecord& r) {
  json j = to_json(r);
  j["stage"] = stage;
  if (class_id >= 0) j["class_id"] = class_id;
  return j;
}

std::vector<std::vector<ScoredSet>> run_pretraining(const RunConfig& config, Runtime& rt, RunLog& log,
                                                    AuditContext& audit, const Datasets& data,
                                                    std::ostream& out) {
  const EmbeddingStore& train = require(data.train, "train");
  const EmbeddingStore* distractors = data.distractors ? &*data.distractors : nullptr;
  const auto pool = rt.pool();
  audit.stage = "pretrain";
  const Mutator mutator(rt.completion(), config.mutation, audit.callback());

  std::vector<PretrainResult> results;
  for (int c = 0; c < train.class_count(); ++c) {
    audit.class_id = c;
    PretrainConfig pc = config.pretrain;
    results.push_back(run_pretrain(c, pc, mutator, rt.embedder(), train, distractors, pool));
    const PretrainResult& r = results.back();
    for (const auto& rec : r.final_state.history) log.iteration(iteration_entry("pretrain", c, rec));
    Checkpoint cp = make_checkpoint(config, r.final_state, "pretrain");
    cp.metadata = {{"class_id", c}};
    const fs::path dir = fs::path(config.paths.run_dir) / "pretrain";
    fs::create_directories(dir);
    cp.save(dir / ("class_" + std::to_string(c) + ".json"));
    out << json{{"stage", "pretrain"},
                {"class_id", c},
                {"iterations", r.final_state.iteration},
                {"objective", r.final_state.best_loss}}
               .dump()
        << '\n';
  }
  audit.class_id = -1;
  const json trajectories = trajectories_to_json(results);
  write_json(fs::path(config.paths.run_dir) / "pretrain" / "trajectories.json", trajectories);
  return trajectories_from_json(trajectories);
}

void write_run_config(const RunConfig& config) {
  write_json(fs::path(config.paths.run_dir) / "config.json", to_json(config));
}

int cmd_make_oracle(const json& opts, std::ostream& out) {
  OracleWorldParams p;
  p.dim = opts.at("dim");
  p.classes = opts.at("classes");
  p.truth_per_class = opts.at("truth");
  p.vocab_size = opts.at("vocab");
  p.noise_sigma = opts.at("noise");
  p.coherence = opts.at("coherence");
  p.seed = opts.at("seed");
  const fs::path dir = opts.at("out").get<std::string>();
  const std::size_t images = opts.at("images");
  const std::size_t distractor_images = opts.at("distractor_images");
  fs::create_directories(dir);

  const OracleWorld world = OracleWorld::build(p);
  world.save(dir / "world.json");
  save_embedding_store(world.generate(images, SplitTag::Train), dir / "train.json");
  save_embedding_store(world.generate(images, SplitTag::Test), dir / "test.json");
  save_embedding_store(world.generate(distractor_images, SplitTag::Distractor), dir / "distractors.json");
  {
    std::ofstream pool(dir / "pool.txt", std::ios::trunc);
    for (const auto& v : world.vocab()) pool << v << '\n';
  }
  RunConfig config;
  config.seed = p.seed;
  config.propagate_seed();
  config.paths.train = "train.json";
  config.paths.test = "test.json";
  config.paths.distractors = "distractors.json";
  config.paths.world = "world.json";
  config.paths.pool = "pool.txt";
  config.paths.run_dir = "run";
  write_json(dir / "config.json", to_json(config));
  out << json{{"world", (dir / "world.json").string()},
              {"classes", p.classes},
              {"images_per_class", images},
              {"vocab", world.vocab().size()},
              {"config", (dir / "config.json").string()}}
             .dump()
      << '\n';
  return 0;
}

int cmd_pretrain(const Overrides& o, std::ostream& out) {
  const RunConfig config = resolve_config(o);
  write_run_config(config);
  RunLog log(config.paths.run_dir);
  Runtime rt(config, &log);
  AuditContext audit{&log, "pretrain"};
  const Datasets data = load_datasets(config.paths);
  run_pretraining(config, rt, log, audit, data, out);
  return 0;
}

int cmd_train(const Overrides& o, bool resume, std::ostream& out) {
  const RunConfig config = resolve_config(o);
  const fs::path run_dir = config.paths.run_dir;
  write_run_config(config);
  RunLog log(run_dir);
  Runtime rt(config, &log);
  AuditContext audit{&log, "joint"};
  const Datasets data = load_datasets(config.paths);
  const EmbeddingStore& train = require(data.train, "train");

  const Scorer train_scorer(train, rt.embedder());
  const JointObjective objective(train_scorer, config.score_temperature);

  std::optional<EngineState> state;
  if (resume) {
    const auto latest = latest_checkpoint(run_dir);
    if (!latest) throw Error(Errc::Io, "--resume: no checkpoint under " + (run_dir / "checkpoints").string());
    Checkpoint cp = Checkpoint::load(*latest);
    if (cp.stage != "joint") throw Error(Errc::InvalidArgument, "--resume needs a joint-stage checkpoint");
    if (cp.prompt_template_version != prompt_template_version()) {
      throw Error(Errc::InvalidArgument, "checkpoint was written with prompt template " +
                                             cp.prompt_template_version);
    }
    state = std::move(cp.state);
    // Budget and parallelism come from the current invocation; everything
    // that shapes the trajectory stays as recorded.
    state->config.max_iterations = config.engine.max_iterations;
    state->config.patience = config.engine.patience;
    state->config.checkpoint_interval = config.engine.checkpoint_interval;
    state->config.workers = config.engine.workers;
    out << json{{"resumed_from", latest->string()}, {"iteration", state->iteration}}.dump() << '\n';
  } else {
    std::optional<std::vector<std::vector<ScoredSet>>> trajectories;
    if (config.pretrain_enabled) {
      const fs::path saved = run_dir / "pretrain" / "trajectories.json";
      if (fs::exists(saved)) {
        trajectories = trajectories_from_json(read_json(saved));
      } else {
        trajectories = run_pretraining(config, rt, log, audit, data, out);
      }
    }
    const auto pool = rt.pool();
    state = initial_joint_state(config, objective, trajectories ? &*trajectories : nullptr, pool);
  }

  audit.stage = "joint";
  audit.class_id = -1;
  const Mutator mutator(rt.completion(), config.mutation, audit.callback());
  RunHooks hooks;
  hooks.on_iteration = [&](const EngineState&, const IterationRecord& r) {
    log.iteration(iteration_entry("joint", -1, r));
  };
  hooks.checkpoint = [&](const EngineState& s) { write_checkpoint(run_dir, make_checkpoint(config, s)); };
  const Classifier best = run(*state, mutator, objective, hooks);

  Checkpoint final_cp = make_checkpoint(config, *state);
  const Evaluation train_eval = evaluate(best, train, rt.embedder(), config.score_temperature);
  final_cp.metadata["train_accuracy"] = train_eval.accuracy;
  final_cp.metadata["train_margin"] = train_eval.margin;
  json metrics{{"iteration", state->iteration}, {"best_loss", state->best_loss}, {"train", train_eval.to_json()}};
  if (data.test) {
    const Evaluation test_eval = evaluate(best, *data.test, rt.embedder(), config.score_temperature);
    final_cp.metadata["test_accuracy"] = test_eval.accuracy;
    final_cp.metadata["test_margin"] = test_eval.margin;
    metrics["test"] = test_eval.to_json();
  }
  const fs::path written = write_checkpoint(run_dir, final_cp);
  write_json(run_dir / "final" / "classifier.json", to_json(best));
  write_json(run_dir / "final" / "metrics.json", metrics);

  json summary{{"iteration", state->iteration},
               {"best_loss", state->best_loss},
               {"checkpoint", written.string()},
               {"train_accuracy", train_eval.accuracy}};
  if (final_cp.metadata.contains("test_accuracy")) summary["test_accuracy"] = final_cp.metadata["test_accuracy"];
  out << summary.dump() << '\n';
  return 0;
}

Checkpoint checkpoint_for(const RunConfig& config, const std::string& path) {
  if (!path.empty()) return Checkpoint::load(path);
  const auto latest = latest_checkpoint(config.paths.run_dir);
  if (!latest) throw Error(Errc::Io, "no checkpoint given and none under " + config.paths.run_dir);
  return Checkpoint::load(*latest);
}

int cmd_eval(const Overrides& o, const std::string& checkpoint, const std::string& split, const std::string& out_path,
             std::ostream& out) {
  const RunConfig config = resolve_config(o);
  const Checkpoint cp = checkpoint_for(config, checkpoint);
  Runtime rt(config);
  const Datasets data = load_datasets(config.paths);
  const EmbeddingStore& store = split == "train" ? require(data.train, "train") : require(data.test, "test");
  const Classifier& best = cp.state.bank.best();
  const Evaluation e = evaluate(best, store, rt.embedder(), config.score_temperature);

  json result = e.to_json();
  result["split"] = split;
  result["iteration"] = cp.state.iteration;
  result["best_loss"] = cp.state.best_loss;
  const std::string key = split + "_accuracy";
  if (cp.metadata.contains(key)) {
    result["recorded_accuracy"] = cp.metadata.at(key);
    result["matches_recorded"] = cp.metadata.at(key).get<double>() == e.accuracy;
  }
  const fs::path target = out_path.empty() ? fs::path(config.paths.run_dir) / ("eval_" + split + ".json") : fs::path(out_path);
  write_json(target, result);
  out << result.dump() << '\n';
  return 0;
}

int cmd_report(const Overrides& o, const std::string& checkpoint, const std::string& out_path, std::ostream& out) {
  const RunConfig config = resolve_config(o);
  const Checkpoint cp = checkpoint_for(config, checkpoint);
  Runtime rt(config);
  const Datasets data = load_datasets(config.paths);
  const EmbeddingStore& train = require(data.train, "train");
  const Classifier& best = cp.state.bank.best();

  const Scorer train_scorer(train, rt.embedder());
  json report{{"iteration", cp.state.iteration},
              {"best_loss", cp.state.best_loss},
              {"prompt_template_version", cp.prompt_template_version},
              {"classifier", to_json(best)},
              {"audit", audit_to_json(audit_report(best, train_scorer))}};
  const fs::path target = out_path.empty() ? fs::path(config.paths.run_dir) / "report.json" : fs::path(out_path);
  if (data.test) {
    const Evaluation e = evaluate(best, *data.test, rt.embedder(), config.score_temperature);
    report["test"] = e.to_json();
    std::ofstream csv(target.parent_path() / "confusion.csv", std::ios::trunc);
    csv << confusion_csv(e.confusion);
  }
  write_json(target, report);
  out << json{{"report", target.string()}}.dump() << '\n';
  return 0;
}

int cmd_embed_dataset(const Overrides& o, const std::string& pool_path, std::ostream& out) {
  const RunConfig config = resolve_config(o);
  if (config.paths.cache.empty()) {
    throw Error(Errc::InvalidConfig, "embed-dataset needs paths.cache to persist the embeddings");
  }
  RunLog log(config.paths.run_dir);
  Runtime rt(config, &log);
  const std::vector<Attribute> pool = pool_path.empty() ? rt.pool() : load_pool(pool_path);
  std::vector<std::string> texts;
  for (const auto& a : pool) texts.push_back(a.text());
  const std::size_t before = rt.embedder().cache().size();
  rt.embedder().warm(texts);
  out << json{{"attributes", texts.size()},
              {"newly_embedded", rt.embedder().cache().size() - before},
              {"cache", config.paths.cache}}
             .dump()
      << '\n';
  return 0;
}

void print_error(std::ostream& err, const std::string& code, const std::string& message) {
  err << json{{"error", code}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evolve interpretable attribute classifiers with a language model as the mutation operator"};
  app.require_subcommand(1);

  std::string oracle_out;
  std::size_t classes = 5, images = 50, dim = 64, vocab = 500, truth = 5;
  std::optional<std::size_t> distractor_images;
  double noise = 0.1, coherence = 0.3;
  std::uint64_t oracle_seed = 1;
  auto* make_oracle = app.add_subcommand("make-oracle", "Write a synthetic world, its embedding stores and a config");
  make_oracle->add_option("--out", oracle_out, "Output directory")->required();
  make_oracle->add_option("--classes", classes, "Number of classes")->capture_default_str();
  make_oracle->add_option("--images", images, "Train and test images per class")->capture_default_str();
  make_oracle->add_option("--distractor-images", distractor_images, "Distractor images per class (default: --images)");
  make_oracle->add_option("--dim", dim, "Embedding dimension")->capture_default_str();
  make_oracle->add_option("--vocab", vocab, "Vocabulary size")->capture_default_str();
  make_oracle->add_option("--truth", truth, "Ground-truth attributes per class")->capture_default_str();
  make_oracle->add_option("--noise", noise, "Per-component image noise standard deviation")->capture_default_str();
  make_oracle->add_option("--coherence", coherence, "Shared class direction weight")->capture_default_str();
  make_oracle->add_option("--seed", oracle_seed, "World seed")->capture_default_str();

  Overrides pre_o, train_o, eval_o, report_o, embed_o;
  auto* pretrain = app.add_subcommand("pretrain", "Per-class one-vs-rest attribute search");
  add_common(pretrain, pre_o);

  bool resume = false;
  auto* train = app.add_subcommand("train", "Joint evolutionary search (runs pre-training first when enabled)");
  add_common(train, train_o);
  train->add_flag("--resume", resume, "Continue from the latest checkpoint in the run directory");
  train->add_flag("--no-pretrain", train_o.no_pretrain, "Start the joint bank from random sets");

  std::string eval_checkpoint, eval_split = "test", eval_out;
  auto* eval = app.add_subcommand("eval", "Accuracy and margin of a checkpoint's best classifier");
  add_common(eval, eval_o);
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint file (default: latest in run directory)");
  eval->add_option("--split", eval_split, "Split to evaluate")->check(CLI::IsMember({"train", "test"}));
  eval->add_option("--out", eval_out, "Where to write the JSON result");

  std::string report_checkpoint, report_out;
  auto* report = app.add_subcommand("report", "Per-class attribute audit of a checkpoint's best classifier");
  add_common(report, report_o);
  report->add_option("--checkpoint", report_checkpoint, "Checkpoint file (default: latest in run directory)");
  report->add_option("--out", report_out, "Report path (default: <run_dir>/report.json)");

  std::string embed_pool;
  auto* embed = app.add_subcommand("embed-dataset", "Embed an attribute pool into the text-embedding cache");
  add_common(embed, embed_o);
  embed->add_option("--pool", embed_pool, "Attribute pool, one per line (default: config pool)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "Usage", e.what());
    return 2;
  }

  try {
    if (*make_oracle) {
      const json oracle_opts = {{"classes", classes},     {"images", images},
                     {"distractor_images", distractor_images.value_or(images)},
                     {"dim", dim},             {"vocab", vocab},
                     {"truth", truth},         {"noise", noise},
                     {"coherence", coherence}, {"seed", oracle_seed},
                     {"out", oracle_out}};
      return cmd_make_oracle(oracle_opts, out);
    }
    if (*pretrain) return cmd_pretrain(pre_o, out);
    if (*train) return cmd_train(train_o, resume, out);
    if (*eval) return cmd_eval(eval_o, eval_checkpoint, eval_split, eval_out, out);
    if (*report) return cmd_report(report_o, report_checkpoint, report_out, out);
    if (*embed) return cmd_embed_dataset(embed_o, embed_pool, out);
  } catch (const Error& e) {
    print_error(err, std::string(to_string(e.code())), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(err, "Internal", e.what());
    return 1;
  }
  return 1;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"attrevo"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace attrevo::cli
