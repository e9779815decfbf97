#include "attrevo/mutation.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <unordered_set>

#include "attrevo/error.hpp"
#include "attrevo/prompt_template.hpp"
#include "attrevo/rng.hpp"
#include "attrevo/text.hpp"

namespace attrevo {

namespace {

constexpr std::string_view kBlockHeader = "Attribute list ";

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

std::string_view prompt_template_version() noexcept { return detail::kPromptTemplateVersion; }
std::string_view prompt_template_text() noexcept { return detail::kPromptTemplate; }

std::string render_set(const AttributeSet& set) {
  std::string out;
  std::size_t i = 1;
  for (const Attribute& a : set.attributes()) {
    out += std::to_string(i++) + ". " + a.text() + "\n";
  }
  return out;
}

MutationPrompt build_prompt(std::span<const ScoredSet> history, const MutationConfig& config) {
  if (history.empty()) throw Error(Errc::EmptyHistory, "mutation needs at least one scored set");
  if (config.k == 0) throw Error(Errc::InvalidConfig, "prompt length k must be >= 1");

  std::vector<std::size_t> order(history.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return history[a].loss < history[b].loss; });
  order.resize(std::min(config.k, order.size()));
  // Worst first so the best set is the last thing the model reads.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return history[a].loss > history[b].loss; });

  MutationPrompt prompt;
  prompt.k = config.k;
  std::string examples;
  std::size_t n = 1;
  for (std::size_t idx : order) {
    const ScoredSet& entry = history[idx];
    prompt.in_context.push_back(entry);
    examples += std::string(kBlockHeader) + std::to_string(n++);
    if (config.show_scores) {
      char buf[48];
      std::snprintf(buf, sizeof buf, " (loss %.4f)", entry.loss);
      examples += buf;
    }
    examples += ":\n" + render_set(entry.set) + "\n";
  }
  prompt.text = std::string(prompt_template_text());
  replace_all(prompt.text, "{{examples}}", examples);
  replace_all(prompt.text, "{{max_set_size}}", std::to_string(config.max_set_size));
  return prompt;
}

std::vector<std::vector<std::string>> parse_prompt_examples(std::string_view prompt) {
  std::vector<std::vector<std::string>> blocks;
  bool in_block = false;
  for (std::string_view line : split_lines(prompt)) {
    const std::string_view t = trim(line);
    if (t.starts_with(kBlockHeader) && t.ends_with(':')) {
      blocks.emplace_back();
      in_block = true;
      continue;
    }
    if (!in_block) continue;
    auto items = extract_list_items(t);
    if (items.empty()) {
      in_block = false;
      continue;
    }
    blocks.back().push_back(std::move(items.front()));
  }
  return blocks;
}

std::vector<Attribute> parse_attributes(std::string_view completion, std::size_t max_set_size) {
  std::vector<Attribute> out;
  std::unordered_set<std::string> seen;
  for (const std::string& item : extract_list_items(completion)) {
    if (out.size() == max_set_size) break;
    try {
      Attribute a = Attribute::canonicalize(item);
      if (seen.insert(a.text()).second) out.push_back(std::move(a));
    } catch (const Error&) {
    }
  }
  if (out.empty()) throw Error(Errc::UnparsableCompletion, "completion holds no attribute list");
  return out;
}

nlohmann::json MutationRecord::to_json() const {
  return nlohmann::json{{"class_id", class_id},   {"attempt", attempt},
                        {"seed", seed},           {"temperature", temperature},
                        {"prompt", prompt},       {"completion", completion},
                        {"accepted", accepted},   {"error", error}};
}

Mutator::Mutator(CompletionClient& client, MutationConfig config, MutationAudit audit)
    : client_(&client), config_(config), audit_(std::move(audit)) {
  if (config_.k == 0) throw Error(Errc::InvalidConfig, "prompt length k must be >= 1");
  if (config_.max_set_size == 0) throw Error(Errc::InvalidConfig, "max_set_size must be >= 1");
  if (config_.retry_limit < 1) throw Error(Errc::InvalidConfig, "retry_limit must be >= 1");
}

AttributeSet Mutator::mutate(std::span<const ScoredSet> history, int class_id, std::uint64_t seed) const {
  const MutationPrompt prompt = build_prompt(history, config_);
  for (int attempt = 1; attempt <= config_.retry_limit; ++attempt) {
    CompletionRequest request;
    request.prompt = prompt.text;
    request.seed = attempt == 1 ? seed : mix_seed(seed, static_cast<std::uint64_t>(attempt));
    request.temperature = config_.temperature + config_.temperature_step * (attempt - 1);

    MutationRecord record{class_id, attempt, request.seed, request.temperature, prompt.text, {}, false, {}};
    record.completion = client_->complete(request);
    try {
      auto attrs = parse_attributes(record.completion, config_.max_set_size);
      record.accepted = true;
      if (audit_) audit_(record);
      return AttributeSet::dedup(attrs, class_id, config_.max_set_size);
    } catch (const Error& e) {
      if (e.code() != Errc::UnparsableCompletion) throw;
      record.error = e.what();
      if (audit_) audit_(record);
    }
  }
  throw Error(Errc::UnparsableCompletion,
              "no usable completion after " + std::to_string(config_.retry_limit) + " attempts");
}

}  // namespace attrevo
