#include "attrevo/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "attrevo/error.hpp"

namespace attrevo {

std::string_view to_string(SamplingBias b) noexcept {
  return b == SamplingBias::Best ? "best" : "worst";
}

SamplingBias sampling_bias_from_string(std::string_view s) {
  if (s == "best") return SamplingBias::Best;
  if (s == "worst") return SamplingBias::Worst;
  throw Error(Errc::InvalidConfig, "bias must be 'best' or 'worst'");
}

void EngineConfig::validate() const {
  if (initial_hypotheses < 1) throw Error(Errc::InvalidConfig, "N (initial_hypotheses) must be >= 1");
  if (samples_per_step < 1) throw Error(Errc::InvalidConfig, "M (samples_per_step) must be >= 1");
  if (!(sampling_temperature > 0.0) || !std::isfinite(sampling_temperature)) {
    throw Error(Errc::InvalidConfig, "sampling_temperature must be positive");
  }
  if (max_iterations < 1) throw Error(Errc::InvalidConfig, "max_iterations must be >= 1");
  if (patience < 1) throw Error(Errc::InvalidConfig, "patience must be >= 1");
  if (capacity && *capacity < 1) throw Error(Errc::InvalidConfig, "capacity must be >= 1");
  if (checkpoint_interval < 1) throw Error(Errc::InvalidConfig, "checkpoint_interval must be >= 1");
  if (initial_set_size < 1) throw Error(Errc::InvalidConfig, "initial_set_size must be >= 1");
  if (workers < 1) throw Error(Errc::InvalidConfig, "workers must be >= 1");
}

EngineState EngineState::start(const EngineConfig& config, ClassifierBank bank, Rng rng) {
  config.validate();
  if (bank.empty()) throw Error(Errc::InvalidArgument, "engine needs a non-empty bank");
  EngineState s;
  s.config = config;
  s.best_loss = bank.best_loss();
  s.bank = std::move(bank);
  s.rng = std::move(rng);
  return s;
}

ClassifierBank init_bank(std::span<const Attribute> pool, const EngineConfig& config,
                         const Objective& objective, Rng& rng) {
  config.validate();
  std::vector<Attribute> distinct;
  {
    std::unordered_set<std::string> seen;
    for (const Attribute& a : pool) {
      if (seen.insert(a.text()).second) distinct.push_back(a);
    }
  }
  if (distinct.size() < config.initial_set_size) {
    throw Error(Errc::PoolTooSmall, "pool holds " + std::to_string(distinct.size()) +
                                        " attributes, need " + std::to_string(config.initial_set_size));
  }
  ClassifierBank bank(config.capacity);
  std::vector<std::size_t> idx(distinct.size());
  for (std::size_t i = 0; i < config.initial_hypotheses; ++i) {
    std::vector<AttributeSet> sets;
    for (std::size_t c = 0; c < objective.class_count(); ++c) {
      std::iota(idx.begin(), idx.end(), 0);
      std::vector<Attribute> chosen;
      for (std::size_t j = 0; j < config.initial_set_size; ++j) {
        std::swap(idx[j], idx[j + rng.below(idx.size() - j)]);
        chosen.push_back(distinct[idx[j]]);
      }
      sets.push_back(AttributeSet::dedup(chosen, static_cast<int>(c), config.initial_set_size));
    }
    Classifier classifier(std::move(sets), 0);
    bank.insert(classifier.with_loss(objective.loss(classifier)));
  }
  return bank;
}

std::vector<double> sampling_probabilities(const ClassifierBank& bank, double temperature, SamplingBias bias) {
  if (bank.empty()) throw Error(Errc::InvalidArgument, "cannot sample from an empty bank");
  if (!(temperature > 0.0)) throw Error(Errc::InvalidArgument, "sampling temperature must be positive");
  const double sign = bias == SamplingBias::Best ? -1.0 : 1.0;
  std::vector<double> logits;
  logits.reserve(bank.size());
  for (const Classifier& c : bank.entries()) logits.push_back(sign * *c.loss() / temperature);
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

std::vector<Classifier> sample_hypotheses(const ClassifierBank& bank, std::size_t m, double temperature,
                                          SamplingBias bias, Rng& rng) {
  const auto p = sampling_probabilities(bank, temperature, bias);
  std::vector<double> cdf(p.size());
  std::partial_sum(p.begin(), p.end(), cdf.begin());
  std::vector<Classifier> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double u = rng.uniform() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    out.push_back(bank.entries()[static_cast<std::size_t>(it - cdf.begin())]);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Classifier& a, const Classifier& b) { return *a.loss() > *b.loss(); });
  return out;
}

namespace {

template <typename Fn>
void for_each_class(std::size_t classes, std::size_t workers, Fn&& fn) {
  if (workers <= 1 || classes <= 1) {
    for (std::size_t c = 0; c < classes; ++c) fn(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(classes);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, classes); ++w) {
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < classes; c = next++) {
        try {
          fn(c);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

IterationRecord evolution_step(EngineState& state, const Mutator& mutator, const Objective& objective) {
  if (state.bank.empty()) throw Error(Errc::InvalidArgument, "engine needs a non-empty bank");
  const std::size_t iteration = state.iteration + 1;
  const std::size_t classes = objective.class_count();
  const double previous_best = state.bank.best_loss();

  const auto sampled = sample_hypotheses(state.bank, state.config.samples_per_step,
                                         state.config.sampling_temperature, state.config.bias, state.rng);
  // Seeds are drawn up front, in class order, so the outcome does not depend
  // on how the per-class work is scheduled.
  std::vector<std::uint64_t> seeds(classes);
  for (auto& s : seeds) s = state.rng.next();

  std::vector<std::optional<Classifier>> winners(classes);
  for_each_class(classes, state.config.workers, [&](std::size_t c) {
    std::vector<ScoredSet> history;
    history.reserve(sampled.size());
    for (const Classifier& d : sampled) history.push_back({d.set(c), *d.loss()});
    std::optional<AttributeSet> mutated;
    try {
      mutated = mutator.mutate(history, static_cast<int>(c), seeds[c]);
    } catch (const Error& e) {
      if (e.code() != Errc::UnparsableCompletion) throw;
      return;
    }
    std::optional<Classifier> best;
    for (const Classifier& d : sampled) {
      Classifier candidate = d.with_set(*mutated, static_cast<int>(iteration));
      const double loss = objective.loss(candidate);
      if (!best || loss < *best->loss()) best = candidate.with_loss(loss);
    }
    winners[c] = std::move(best);
  });

  IterationRecord record;
  record.iteration = iteration;
  record.candidate_loss.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    if (!winners[c]) continue;
    record.candidate_loss[c] = *winners[c]->loss();
    state.bank.insert(std::move(*winners[c]));
  }

  const double best = state.bank.best_loss();
  if (best > previous_best) throw std::logic_error("bank best loss increased");
  if (best < state.best_loss) {
    state.best_loss = best;
    state.last_improvement = iteration;
  }
  state.iteration = iteration;
  record.best_loss = best;
  record.bank_size = state.bank.size();
  state.history.push_back(record);
  return record;
}

bool should_stop(const EngineState& state) noexcept {
  return state.iteration >= state.config.max_iterations ||
         state.iteration - state.last_improvement >= state.config.patience;
}

Classifier run(EngineState& state, const Mutator& mutator, const Objective& objective, const RunHooks& hooks) {
  state.config.validate();
  if (state.bank.empty()) throw Error(Errc::InvalidArgument, "engine needs a non-empty bank");
  bool ran = false;
  while (!should_stop(state)) {
    const IterationRecord record = evolution_step(state, mutator, objective);
    ran = true;
    if (hooks.on_iteration) hooks.on_iteration(state, record);
    if (hooks.checkpoint && !should_stop(state) &&
        (state.iteration == 1 || state.iteration % state.config.checkpoint_interval == 0)) {
      hooks.checkpoint(state);
    }
  }
  if (ran && hooks.checkpoint) hooks.checkpoint(state);
  return state.bank.best();
}

}  // namespace attrevo
