#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "archevo/evaluation.hpp"
#include "archevo/knowledge.hpp"
#include "archevo/llm_gateway.hpp"
#include "archevo/mutation.hpp"
#include "archevo/pareto.hpp"

namespace archevo {

struct HistoryEntry {
  std::size_t index = 0;
  Candidate candidate;
  double val_accuracy = 0.0;
  std::optional<double> test_accuracy;
  std::vector<double> budgets;
  MutationRecord mutation;
  bool valid = true;
};

// Append-only store of valid, evaluated candidates.
class History {
 public:
  // Throws CorruptionError for a duplicate id or an index out of sequence.
  const HistoryEntry& append(HistoryEntry entry);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<HistoryEntry>& entries() const { return entries_; }
  const HistoryEntry& at(std::size_t index) const { return entries_.at(index); }
  const HistoryEntry* find(std::string_view id) const;

 private:
  std::vector<HistoryEntry> entries_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
};

// The history guard: appends only a valid result within every limit.
// Returns false (history unchanged) otherwise.
bool record(History& history, const Candidate& candidate, const EvaluationResult& metrics,
            const MutationRecord& mutation, const std::vector<BudgetLimit>& thresholds);

// Highest validation accuracy first; ties by lower first budget, then by
// earlier insertion. Fewer than k entries: all of them.
std::vector<std::size_t> select_topk_parents(const History& history, std::size_t k);

enum class RefinementKind { upscale, hyperparam };
std::string_view to_string(RefinementKind kind);

struct Refinement {
  RefinementKind kind;
  std::string instruction;
};

// Upscale when some budget is below `switch_fraction` of its limit,
// otherwise tune hyperparameters; the instruction is drawn uniformly from the
// matching idea list.
Refinement choose_refinement(const std::vector<double>& budgets,
                             const std::vector<BudgetLimit>& thresholds, double switch_fraction,
                             Rng& rng, const PromptLibrary& prompts = PromptLibrary::builtin());

struct SearchConfig {
  std::size_t k0 = 8;
  std::size_t k1 = 8;
  std::size_t k2 = 8;
  std::size_t k3 = 4;
  std::size_t d = 2;
  int generations = 3;
  std::vector<BudgetLimit> thresholds;
  double refinement_switch_fraction = 0.9;
  RetryLimits limits;
  VerifierToggles verifiers;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  TargetMixture target_mixture = TargetMixture::equal;
  std::string base_module_classes = "Network";

  // Throws ConfigError naming the offending field.
  void validate() const;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A planned slot that did not add a history entry, or a structural
// rejection that was retried inside its slot (terminal = false).
struct FailureEntry {
  std::string slot;
  int generation = 0;
  Stage stage = Stage::init;
  std::string parent_id;
  std::string reason;  // mutation failure kind, "invalid" or "chain-stopped"
  std::string message;
  bool terminal = true;
  std::vector<TraceEvent> trace;
};

struct SearchState {
  History history;
  std::vector<FailureEntry> failures;
  // -1 before initialization; 0 once the initial population is recorded.
  int completed_generation = -1;
  std::size_t planned_slots = 0;
  std::size_t generated_candidates = 0;  // mutation attempts, retries included
};

struct SearchDeps {
  ChatGateway* llm = nullptr;
  Evaluator* evaluator = nullptr;
  const KnowledgeDB* db = nullptr;
  const PromptLibrary* prompts = &PromptLibrary::builtin();
};

// Runs `fn(i)` for i in [0, n) on up to `workers` threads. The first
// exception thrown is rethrown after all threads finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

class SearchEngine {
 public:
  SearchEngine(SearchConfig config, SearchDeps deps);

  const SearchConfig& config() const { return config_; }

  // Evaluates and records the base as entry 0, then mutates it k0 times
  // with fairly sampled ideas.
  void init_population(SearchState& state, const std::string& base_source);
  // Stage I (fair ideas on top-k1), Stage II (refinement of k2 Pareto
  // parents), Stage III (d-step chains from the top-k3), in that order.
  void run_generation(SearchState& state, int generation);

  using Observer = std::function<void(const SearchState&)>;
  // Initializes when needed, runs the remaining generations and returns the
  // index of the best entry. `after_generation` runs after initialization
  // and after every generation.
  std::size_t run_search(SearchState& state, const std::string& base_source,
                         const Observer& after_generation = {});

 private:
  struct SlotResult;
  GenerationPrompt fair_prompt(const Candidate& parent, Rng& rng) const;
  MutationContext context() const;
  SlotResult run_slot(const Candidate& parent, const PromptSource& source, const std::string& label,
                      Stage stage, int generation, Rng& rng) const;
  void commit(SearchState& state, std::vector<SlotResult>& results);
  SlotResult run_chain(const SearchState& state, std::size_t parent_index, std::size_t slot,
                       int generation) const;

  SearchConfig config_;
  SearchDeps deps_;
};

class EmptyHistoryError : public Error {
 public:
  using Error::Error;
};

// Best entry by the top-k order. Throws EmptyHistoryError when empty.
std::size_t best_entry(const History& history);

}  // namespace archevo
