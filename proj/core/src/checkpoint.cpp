#include "attrevo/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "attrevo/config.hpp"
#include "attrevo/error.hpp"

namespace attrevo {

using nlohmann::json;

json to_json(const AttributeSet& set) {
  json attrs = json::array();
  for (const Attribute& a : set.attributes()) attrs.push_back(a.text());
  return attrs;
}

AttributeSet attribute_set_from_json(const json& j, int class_id) {
  const auto raw = j.get<std::vector<std::string>>();
  std::vector<Attribute> attrs;
  for (const auto& s : raw) attrs.push_back(Attribute::canonicalize(s));
  AttributeSet set = AttributeSet::dedup(attrs, class_id, attrs.empty() ? 1 : attrs.size());
  if (set.size() != raw.size()) throw Error(Errc::InvalidArgument, "stored attribute set has duplicates");
  return set;
}

json to_json(const Classifier& classifier) {
  json sets = json::array();
  for (const auto& s : classifier.sets()) sets.push_back(to_json(s));
  json j{{"sets", sets}, {"iteration_born", classifier.iteration_born()}};
  j["loss"] = classifier.loss() ? json(*classifier.loss()) : json(nullptr);
  return j;
}

Classifier classifier_from_json(const json& j) {
  std::vector<AttributeSet> sets;
  const json& raw = j.at("sets");
  for (std::size_t c = 0; c < raw.size(); ++c) sets.push_back(attribute_set_from_json(raw[c], static_cast<int>(c)));
  Classifier classifier(std::move(sets), j.value("iteration_born", 0));
  if (j.contains("loss") && !j.at("loss").is_null()) return classifier.with_loss(j.at("loss").get<double>());
  return classifier;
}

json to_json(const ClassifierBank& bank) {
  json entries = json::array();
  for (const auto& c : bank.entries()) entries.push_back(to_json(c));
  json j{{"entries", entries}};
  j["capacity"] = bank.capacity() ? json(*bank.capacity()) : json(nullptr);
  return j;
}

ClassifierBank bank_from_json(const json& j) {
  std::optional<std::size_t> capacity;
  if (j.contains("capacity") && !j.at("capacity").is_null()) capacity = j.at("capacity").get<std::size_t>();
  ClassifierBank bank(capacity);
  for (const auto& e : j.at("entries")) bank.insert(classifier_from_json(e));
  return bank;
}

json to_json(const IterationRecord& record) {
  json losses = json::array();
  for (const auto& l : record.candidate_loss) losses.push_back(l ? json(*l) : json(nullptr));
  return json{{"iteration", record.iteration},
              {"candidate_loss", losses},
              {"best_loss", record.best_loss},
              {"bank_size", record.bank_size}};
}

IterationRecord iteration_record_from_json(const json& j) {
  IterationRecord r;
  r.iteration = j.at("iteration").get<std::size_t>();
  for (const auto& l : j.at("candidate_loss")) {
    r.candidate_loss.push_back(l.is_null() ? std::nullopt : std::optional<double>(l.get<double>()));
  }
  r.best_loss = j.at("best_loss").get<double>();
  r.bank_size = j.at("bank_size").get<std::size_t>();
  return r;
}

json to_json(const std::vector<ScoredSet>& trajectory) {
  json out = json::array();
  for (const auto& s : trajectory) out.push_back({{"attributes", to_json(s.set)}, {"loss", s.loss}});
  return out;
}

std::vector<ScoredSet> trajectory_from_json(const json& j, int class_id) {
  std::vector<ScoredSet> out;
  for (const auto& e : j) {
    out.push_back({attribute_set_from_json(e.at("attributes"), class_id), e.at("loss").get<double>()});
  }
  return out;
}

json Checkpoint::to_json() const {
  json history = json::array();
  for (const auto& r : state.history) history.push_back(attrevo::to_json(r));
  json engine;
  attrevo::to_json(engine, state.config);
  return json{{"format", kCheckpointFormat},
              {"stage", stage},
              {"prompt_template_version", prompt_template_version},
              {"run_config", run_config},
              {"engine_config", engine},
              {"iteration", state.iteration},
              {"best_loss", state.best_loss},
              {"last_improvement", state.last_improvement},
              {"rng_state", state.rng.state()},
              {"bank", attrevo::to_json(state.bank)},
              {"metrics_history", history},
              {"metadata", metadata}};
}

Checkpoint Checkpoint::from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw Error(Errc::InvalidArgument, "unsupported checkpoint format");
    }
    Checkpoint cp;
    cp.stage = j.at("stage").get<std::string>();
    cp.prompt_template_version = j.at("prompt_template_version").get<std::string>();
    cp.run_config = j.at("run_config");
    cp.metadata = j.value("metadata", json::object());
    cp.state.config = engine_config_from_json(j.at("engine_config"));
    cp.state.iteration = j.at("iteration").get<std::size_t>();
    cp.state.best_loss = j.at("best_loss").get<double>();
    cp.state.last_improvement = j.at("last_improvement").get<std::size_t>();
    cp.state.rng = Rng::from_state(j.at("rng_state").get<std::string>());
    cp.state.bank = bank_from_json(j.at("bank"));
    for (const auto& r : j.at("metrics_history")) cp.state.history.push_back(iteration_record_from_json(r));
    return cp;
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("corrupt checkpoint: ") + e.what());
  }
}

std::string Checkpoint::serialize() const { return to_json().dump(2) + "\n"; }

Checkpoint Checkpoint::deserialize(const std::string& text) {
  try {
    return from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw Error(Errc::InvalidArgument, std::string("corrupt checkpoint: ") + e.what());
  }
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
    out << serialize();
    if (!out) throw Error(Errc::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

}  // namespace attrevo
