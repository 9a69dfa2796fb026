#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "archevo/attribute_tree.hpp"
#include "archevo/common.hpp"
#include "archevo/evaluation.hpp"
#include "archevo/knowledge.hpp"
#include "archevo/llm_gateway.hpp"
#include "archevo/prompts.hpp"

namespace archevo {

enum class Stage { init, fair, pareto, llm_iter };
std::string_view to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view text);

struct Candidate {
  std::string id;
  std::string source;
  std::optional<std::string> parent_id;  // absent only for the base model
  Stage stage = Stage::init;
  int generation = 0;
};

enum class TraceKind {
  compile_fail,
  debug,
  budget_fail,
  downscale,
  struct_fail,
  pass,
  gateway_fail,
  evaluator_fail,
};
std::string_view to_string(TraceKind kind);
std::optional<TraceKind> parse_trace_kind(std::string_view text);

struct TraceEvent {
  TraceKind kind;
  std::string detail;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct PromptTurn {
  std::string role;  // "system", "user" or "assistant"
  std::string text;
};

struct MutationRecord {
  std::string idea_text;
  std::string directive_kind;
  std::string parent_id;
  std::vector<PromptTurn> prompts;
  std::vector<TraceEvent> trace;
};

struct RetryLimits {
  int max_debug = 2;
  int max_downscale = 4;
  int max_struct_retries = 2;
};

// Switches for the three verification phases. A disabled phase performs no
// checks and no repairs; the history guard still rejects invalid results.
struct VerifierToggles {
  bool execution = true;
  bool budget = true;
  bool structure = true;
};

// Null when the trace is well formed: phases in order (execution, budget,
// structure), every repair preceded by the failure it answers, the repair
// counts within `limits`, and exactly one terminal event at the end.
std::optional<std::string> validate_trace(const std::vector<TraceEvent>& trace,
                                          const RetryLimits& limits);

struct GenerationPrompt {
  std::optional<std::string> system;
  std::string user;
  std::string idea_text;
  std::string directive_kind;
};

// Common-mutation system prompt plus "<instruction> Please modify the
// following model: <parent source>".
GenerationPrompt format_mutation_prompt(const Candidate& parent,
                                        const MutationDirective& directive,
                                        const PromptLibrary& prompts = PromptLibrary::builtin());
// Same frame for a refinement instruction (upscale / hyperparameter idea).
GenerationPrompt format_refinement_prompt(const Candidate& parent, std::string_view kind,
                                          std::string_view instruction,
                                          const PromptLibrary& prompts = PromptLibrary::builtin());

// User-only prompt asking to improve on `current`, which was mutated from
// `previous_source`. `improved` picks the improved-parent wording.
GenerationPrompt format_idea_mutation_prompt(const Candidate& current,
                                             const std::string& previous_source,
                                             const AttributeTree& tree, bool improved,
                                             const PromptLibrary& prompts = PromptLibrary::builtin());

enum class DownscaleKind { single_use, shrink };

struct DownscaleChoice {
  DownscaleKind kind;
  std::string operation_template;  // fills the downscale system prompt
  std::string idea;                // fills the downscale user prompt
};

// Some budget over 1.5x its limit: restrict the added module to one use.
// Otherwise one of the shrink ideas, uniformly. Throws InvariantError unless
// at least one budget exceeds its limit.
DownscaleChoice choose_downscale_idea(const std::vector<double>& budgets,
                                      const std::vector<double>& thresholds, Rng& rng,
                                      const PromptLibrary& prompts = PromptLibrary::builtin());

struct BudgetLimit {
  std::string label;  // "params" or "flops"
  double limit = 0.0;
};

std::vector<double> budget_vector(const BudgetReport& report, const std::vector<BudgetLimit>& dims);
bool within_limits(const std::vector<double>& budgets, const std::vector<BudgetLimit>& dims);

enum class MutationFailure { none, compile, budget, structure, gateway, evaluator };
std::string_view to_string(MutationFailure failure);

struct MutationOutcome {
  std::optional<Candidate> child;
  MutationRecord record;  // the final attempt
  // Attempts rejected by structural verification before the final one.
  std::vector<MutationRecord> rejected;
  MutationFailure failure = MutationFailure::none;
  std::string message;
};

struct MutationContext {
  ChatGateway* llm = nullptr;
  Evaluator* evaluator = nullptr;
  const PromptLibrary* prompts = &PromptLibrary::builtin();
  RetryLimits limits;
  VerifierToggles verifiers;
  std::vector<BudgetLimit> thresholds;
  // Fills {base_module_classes} of the debug prompt.
  std::string base_module_classes = "Network";
};

// Produces the generation prompt of attempt 0, 1, ... Attempts after the
// first follow a structural rejection and should draw a fresh directive.
using PromptSource = std::function<GenerationPrompt(Rng& rng, int attempt)>;

// Generation, execution verification with debug rounds, budget verification
// with downscale rounds, then structural verification; a structural
// rejection regenerates from the parent with a new prompt. All chat traffic
// goes to `stream`.
MutationOutcome mutate(const Candidate& parent, const PromptSource& prompt_source,
                       const MutationContext& ctx, const std::string& stream, Rng& rng,
                       Candidate child_template);

}  // namespace archevo
