#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "attrevo/completion.hpp"
#include "attrevo/domain.hpp"

namespace attrevo {

/// Identifies the prompt template compiled into the library; recorded in
/// checkpoints so a run can be tied to the exact prompt text.
std::string_view prompt_template_version() noexcept;
std::string_view prompt_template_text() noexcept;

struct ScoredSet {
  AttributeSet set;
  double loss = 0.0;
};

struct MutationConfig {
  std::size_t k = 10;  // prompt length: number of in-context example sets
  std::size_t max_set_size = kDefaultMaxSetSize;
  int retry_limit = 3;
  bool show_scores = false;
  double temperature = 0.7;       // completion temperature on the first attempt
  double temperature_step = 0.2;  // added per retry
};

struct MutationPrompt {
  std::vector<ScoredSet> in_context;  // worst first, best last
  std::size_t k = 0;
  std::string text;
};

/// Renders "1. first\n2. second\n..." for one set.
std::string render_set(const AttributeSet& set);

/// Picks the k lowest-loss entries, orders them worst first, and renders the
/// prompt. No class names, labels or paths are ever part of the text.
/// Throws Error{EmptyHistory}.
MutationPrompt build_prompt(std::span<const ScoredSet> history, const MutationConfig& config);

/// The example lists embedded in a rendered prompt, in prompt order.
std::vector<std::vector<std::string>> parse_prompt_examples(std::string_view prompt);

/// List items of a completion, canonicalized, deduplicated and truncated to
/// max_set_size. Throws Error{UnparsableCompletion} when nothing is usable.
std::vector<Attribute> parse_attributes(std::string_view completion,
                                        std::size_t max_set_size = kDefaultMaxSetSize);

struct MutationRecord {
  int class_id = 0;
  int attempt = 0;
  std::uint64_t seed = 0;
  double temperature = 0.0;
  std::string prompt;
  std::string completion;
  bool accepted = false;
  std::string error;

  [[nodiscard]] nlohmann::json to_json() const;
};

using MutationAudit = std::function<void(const MutationRecord&)>;

/// The LLM mutation operator: prompt, complete, parse.
class Mutator {
 public:
  Mutator(CompletionClient& client, MutationConfig config, MutationAudit audit = {});

  /// Retries with a raised temperature and a fresh seed up to retry_limit
  /// attempts. Throws Error{EmptyHistory}, Error{UnparsableCompletion} after
  /// the last attempt, or propagates backend errors.
  AttributeSet mutate(std::span<const ScoredSet> history, int class_id, std::uint64_t seed) const;

  [[nodiscard]] const MutationConfig& config() const noexcept { return config_; }

 private:
  CompletionClient* client_;
  MutationConfig config_;
  MutationAudit audit_;
};

}  // namespace attrevo
