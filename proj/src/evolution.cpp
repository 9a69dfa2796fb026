#include "archevo/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

namespace archevo {

const HistoryEntry& History::append(HistoryEntry entry) {
  if (entry.index != entries_.size()) {
    throw CorruptionError("history index " + std::to_string(entry.index) + " out of sequence (expected " +
                          std::to_string(entries_.size()) + ")");
  }
  if (by_id_.contains(entry.candidate.id)) {
    throw CorruptionError("duplicate history id '" + entry.candidate.id + "'");
  }
  by_id_.emplace(entry.candidate.id, entries_.size());
  entries_.push_back(std::move(entry));
  return entries_.back();
}

const HistoryEntry* History::find(std::string_view id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &entries_[it->second];
}

namespace {

bool admissible(const EvaluationResult& metrics, const std::vector<BudgetLimit>& thresholds) {
  return metrics.valid && metrics.val_accuracy && metrics.budgets &&
         within_limits(budget_vector(*metrics.budgets, thresholds), thresholds);
}

}  // namespace

bool record(History& history, const Candidate& candidate, const EvaluationResult& metrics,
            const MutationRecord& mutation, const std::vector<BudgetLimit>& thresholds) {
  if (!admissible(metrics, thresholds)) return false;
  HistoryEntry entry;
  entry.index = history.size();
  entry.candidate = candidate;
  entry.val_accuracy = *metrics.val_accuracy;
  entry.test_accuracy = metrics.test_accuracy;
  entry.budgets = budget_vector(*metrics.budgets, thresholds);
  entry.mutation = mutation;
  entry.valid = true;
  history.append(std::move(entry));
  return true;
}

std::vector<std::size_t> select_topk_parents(const History& history, std::size_t k) {
  std::vector<std::size_t> order(history.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto& e = history.entries();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (e[a].val_accuracy != e[b].val_accuracy) return e[a].val_accuracy > e[b].val_accuracy;
    const double ba = e[a].budgets.empty() ? 0.0 : e[a].budgets.front();
    const double bb = e[b].budgets.empty() ? 0.0 : e[b].budgets.front();
    if (ba != bb) return ba < bb;
    return a < b;
  });
  if (order.size() > k) order.resize(k);
  return order;
}

std::size_t best_entry(const History& history) {
  if (history.empty()) throw EmptyHistoryError("history is empty");
  return select_topk_parents(history, 1).front();
}

std::string_view to_string(RefinementKind kind) {
  return kind == RefinementKind::upscale ? "upscale" : "hyperparam";
}

Refinement choose_refinement(const std::vector<double>& budgets,
                             const std::vector<BudgetLimit>& thresholds, double switch_fraction,
                             Rng& rng, const PromptLibrary& prompts) {
  if (budgets.size() != thresholds.size()) {
    throw InvariantError("budget vector and thresholds differ in length");
  }
  bool small = false;
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    small = small || budgets[i] < switch_fraction * thresholds[i].limit;
  }
  if (small) return {RefinementKind::upscale, rng.pick(prompts.list("refinement-ideas-upscale"))};
  return {RefinementKind::hyperparam, rng.pick(prompts.list("refinement-ideas-hyperparam"))};
}

void SearchConfig::validate() const {
  if (thresholds.empty()) throw ConfigError("thresholds: at least one budget dimension is required");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const auto& t = thresholds[i];
    if (!is_budget_label(t.label)) {
      throw ConfigError("thresholds." + t.label + ": unknown dimension (expected params or flops)");
    }
    if (!(t.limit > 0.0)) throw ConfigError("thresholds." + t.label + ": limit must be positive");
    for (std::size_t j = 0; j < i; ++j) {
      if (thresholds[j].label == t.label) throw ConfigError("thresholds." + t.label + ": repeated");
    }
  }
  if (!(refinement_switch_fraction > 0.0 && refinement_switch_fraction <= 1.0)) {
    throw ConfigError("search.refinement_switch_fraction: must be in (0, 1]");
  }
  if (generations < 0) throw ConfigError("search.generations: must be >= 0");
  if (limits.max_debug < 0) throw ConfigError("limits.max_debug: must be >= 0");
  if (limits.max_downscale < 0) throw ConfigError("limits.max_downscale: must be >= 0");
  if (limits.max_struct_retries < 0) throw ConfigError("limits.max_struct_retries: must be >= 0");
  if (workers == 0) throw ConfigError("search.workers: must be >= 1");
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), n);
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

std::string slot_label(int generation, std::string_view stage, std::size_t slot) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "g%d.%.*s.%02zu", generation, static_cast<int>(stage.size()),
                stage.data(), slot);
  return buf;
}

}  // namespace

struct SearchEngine::SlotResult {
  struct Pending {
    Candidate candidate;
    EvaluationResult metrics;
    MutationRecord mutation;
  };
  std::vector<Pending> children;
  std::vector<FailureEntry> failures;
  std::size_t planned = 0;
  std::size_t generated = 0;
};

SearchEngine::SearchEngine(SearchConfig config, SearchDeps deps)
    : config_(std::move(config)), deps_(deps) {
  config_.validate();
  if (!deps_.llm || !deps_.evaluator || !deps_.db || !deps_.prompts) {
    throw InvariantError("search dependencies are incomplete");
  }
}

MutationContext SearchEngine::context() const {
  MutationContext ctx;
  ctx.llm = deps_.llm;
  ctx.evaluator = deps_.evaluator;
  ctx.prompts = deps_.prompts;
  ctx.limits = config_.limits;
  ctx.verifiers = config_.verifiers;
  ctx.thresholds = config_.thresholds;
  ctx.base_module_classes = config_.base_module_classes;
  return ctx;
}

GenerationPrompt SearchEngine::fair_prompt(const Candidate& parent, Rng& rng) const {
  const auto target = choose_target(*deps_.db, config_.target_mixture, rng);
  const DesignIdea& idea = fair_sample(*deps_.db, target, rng);
  return format_mutation_prompt(parent, make_directive(idea, rng, *deps_.prompts), *deps_.prompts);
}

SearchEngine::SlotResult SearchEngine::run_slot(const Candidate& parent, const PromptSource& source,
                                                const std::string& label, Stage stage,
                                                int generation, Rng& rng) const {
  SlotResult result;
  result.planned = 1;
  Candidate child;
  child.id = label;
  child.stage = stage;
  child.generation = generation;
  MutationOutcome out = mutate(parent, source, context(), label, rng, child);
  result.generated = 1 + out.rejected.size();
  for (const auto& r : out.rejected) {
    result.failures.push_back(FailureEntry{label, generation, stage, parent.id, "structure",
                                           r.trace.empty() ? "" : r.trace.back().detail, false,
                                           r.trace});
  }
  if (!out.child) {
    result.failures.push_back(FailureEntry{label, generation, stage, parent.id,
                                           std::string(to_string(out.failure)), out.message, true,
                                           out.record.trace});
    return result;
  }
  EvaluationResult metrics = deps_.evaluator->train_eval(out.child->source);
  result.children.push_back({std::move(*out.child), std::move(metrics), std::move(out.record)});
  return result;
}

void SearchEngine::commit(SearchState& state, std::vector<SlotResult>& results) {
  for (auto& r : results) {
    state.planned_slots += r.planned;
    state.generated_candidates += r.generated;
    for (auto& f : r.failures) {
      if (!f.terminal) state.failures.push_back(std::move(f));
    }
    for (auto& p : r.children) {
      if (!record(state.history, p.candidate, p.metrics, p.mutation, config_.thresholds)) {
        std::string why = p.metrics.valid ? "over budget" : p.metrics.compile_error.value_or("invalid");
        state.failures.push_back(FailureEntry{p.candidate.id, p.candidate.generation,
                                              p.candidate.stage, p.mutation.parent_id, "invalid",
                                              std::move(why), true, p.mutation.trace});
      }
    }
    for (auto& f : r.failures) {
      if (f.terminal) state.failures.push_back(std::move(f));
    }
  }
}

void SearchEngine::init_population(SearchState& state, const std::string& base_source) {
  if (state.completed_generation >= 0 || !state.history.empty()) {
    throw InvariantError("search state is already initialized");
  }
  Candidate base{"base", base_source, std::nullopt, Stage::init, 0};
  const EvaluationResult metrics = deps_.evaluator->train_eval(base_source);
  MutationRecord base_record;
  base_record.directive_kind = "base";
  if (!record(state.history, base, metrics, base_record, config_.thresholds)) {
    throw Error("base model is not valid under the evaluator and thresholds: " +
                metrics.compile_error.value_or("over budget"));
  }
  const Candidate& parent = state.history.at(0).candidate;
  std::vector<SlotResult> results(config_.k0);
  parallel_for(config_.k0, config_.workers, [&](std::size_t i) {
    const std::string label = slot_label(0, "init", i);
    Rng rng = Rng::derive(config_.seed, label);
    PromptSource source = [&](Rng& r, int) { return fair_prompt(parent, r); };
    results[i] = run_slot(parent, source, label, Stage::init, 0, rng);
  });
  commit(state, results);
  state.completed_generation = 0;
}

SearchEngine::SlotResult SearchEngine::run_chain(const SearchState& state, std::size_t parent_index,
                                                 std::size_t slot, int generation) const {
  SlotResult chain;
  const auto& history = state.history;
  // Current link and the source/accuracy of the link it was mutated from.
  Candidate current = history.at(parent_index).candidate;
  double current_acc = history.at(parent_index).val_accuracy;
  std::optional<std::pair<std::string, double>> previous;
  if (current.parent_id) {
    if (const HistoryEntry* p = history.find(*current.parent_id)) {
      previous = std::make_pair(p->candidate.source, p->val_accuracy);
    }
  }
  char chain_label[64];
  std::snprintf(chain_label, sizeof chain_label, "g%d.llm.%02zu", generation, slot);

  for (std::size_t step = 1; step <= config_.d; ++step) {
    const std::string label = std::string(chain_label) + ".s" + std::to_string(step);
    Rng rng = Rng::derive(config_.seed, label);
    PromptSource source;
    if (previous) {
      const bool improved = current_acc > previous->second;
      const std::string prev_source = previous->first;
      source = [this, current, prev_source, improved](Rng&, int) {
        return format_idea_mutation_prompt(current, prev_source, deps_.db->tree(), improved,
                                           *deps_.prompts);
      };
    } else {
      // No recorded predecessor to compare against (the base model).
      source = [this, current](Rng& r, int) { return fair_prompt(current, r); };
    }
    SlotResult step_result = run_slot(current, source, label, Stage::llm_iter, generation, rng);
    chain.planned += step_result.planned;
    chain.generated += step_result.generated;
    for (auto& f : step_result.failures) chain.failures.push_back(std::move(f));
    bool advanced = false;
    if (!step_result.children.empty()) {
      auto& pending = step_result.children.front();
      const bool ok = admissible(pending.metrics, config_.thresholds);
      Candidate next = pending.candidate;
      const double next_acc = ok ? *pending.metrics.val_accuracy : 0.0;
      chain.children.push_back(std::move(pending));
      if (ok) {
        previous = std::make_pair(current.source, current_acc);
        current = std::move(next);
        current_acc = next_acc;
        advanced = true;
      }
    }
    if (!advanced) {
      for (std::size_t rest = step + 1; rest <= config_.d; ++rest) {
        const std::string skipped = std::string(chain_label) + ".s" + std::to_string(rest);
        chain.planned += 1;
        chain.failures.push_back(FailureEntry{skipped, generation, Stage::llm_iter, current.id,
                                              "chain-stopped", "step " + std::to_string(step) +
                                                                   " of the chain failed",
                                              true, {}});
      }
      break;
    }
  }
  return chain;
}

void SearchEngine::run_generation(SearchState& state, int generation) {
  if (state.completed_generation != generation - 1) {
    throw InvariantError("generation " + std::to_string(generation) + " does not follow " +
                         std::to_string(state.completed_generation));
  }

  // Stage I: fair idea sampling on the top-k1.
  {
    const auto parents = select_topk_parents(state.history, config_.k1);
    std::vector<SlotResult> results(parents.size());
    parallel_for(parents.size(), config_.workers, [&](std::size_t i) {
      const std::string label = slot_label(generation, "fair", i);
      Rng rng = Rng::derive(config_.seed, label);
      const Candidate& parent = state.history.at(parents[i]).candidate;
      PromptSource source = [&](Rng& r, int) { return fair_prompt(parent, r); };
      results[i] = run_slot(parent, source, label, Stage::fair, generation, rng);
    });
    commit(state, results);
  }

  // Stage II: refinement of Pareto-frontier parents.
  {
    std::vector<ScoredPoint> points;
    points.reserve(state.history.size());
    for (const auto& e : state.history.entries()) points.push_back({e.index, e.val_accuracy, e.budgets});
    const auto parents = select_pareto_parents(points, config_.k2);
    std::vector<SlotResult> results(parents.size());
    parallel_for(parents.size(), config_.workers, [&](std::size_t i) {
      const std::string label = slot_label(generation, "pareto", i);
      Rng rng = Rng::derive(config_.seed, label);
      const HistoryEntry& entry = state.history.at(parents[i]);
      PromptSource source = [&](Rng& r, int) {
        const Refinement ref = choose_refinement(entry.budgets, config_.thresholds,
                                                 config_.refinement_switch_fraction, r,
                                                 *deps_.prompts);
        return format_refinement_prompt(entry.candidate, to_string(ref.kind), ref.instruction,
                                        *deps_.prompts);
      };
      results[i] = run_slot(entry.candidate, source, label, Stage::pareto, generation, rng);
    });
    commit(state, results);
  }

  // Stage III: d-step chains from the top-k3.
  {
    const auto parents = select_topk_parents(state.history, config_.k3);
    std::vector<SlotResult> results(parents.size());
    parallel_for(parents.size(), config_.workers, [&](std::size_t i) {
      results[i] = run_chain(state, parents[i], i, generation);
    });
    commit(state, results);
  }
  state.completed_generation = generation;
}

std::size_t SearchEngine::run_search(SearchState& state, const std::string& base_source,
                                     const Observer& after_generation) {
  if (state.completed_generation < 0) {
    init_population(state, base_source);
    if (after_generation) after_generation(state);
  }
  for (int g = state.completed_generation + 1; g <= config_.generations; ++g) {
    run_generation(state, g);
    if (after_generation) after_generation(state);
  }
  if (state.history.empty()) {
    std::string log;
    for (const auto& f : state.failures) log += "\n  " + f.slot + ": " + f.reason + ": " + f.message;
    throw EmptyHistoryError("search produced no valid candidates" + log);
  }
  return best_entry(state.history);
}

}  // namespace archevo
