#include "archevo/mutation.hpp"

#include <array>
#include <sstream>

#include "archevo/response_parsing.hpp"

namespace archevo {

namespace {

constexpr std::array<std::pair<Stage, std::string_view>, 4> kStageNames = {{
    {Stage::init, "init"},
    {Stage::fair, "fair"},
    {Stage::pareto, "pareto"},
    {Stage::llm_iter, "llm-iter"},
}};

constexpr std::array<std::pair<TraceKind, std::string_view>, 8> kTraceNames = {{
    {TraceKind::compile_fail, "compile-fail"},
    {TraceKind::debug, "debug"},
    {TraceKind::budget_fail, "budget-fail"},
    {TraceKind::downscale, "downscale"},
    {TraceKind::struct_fail, "struct-fail"},
    {TraceKind::pass, "pass"},
    {TraceKind::gateway_fail, "gateway-fail"},
    {TraceKind::evaluator_fail, "evaluator-fail"},
}};

}  // namespace

std::string_view to_string(Stage stage) {
  for (auto [s, name] : kStageNames) {
    if (s == stage) return name;
  }
  return "?";
}

std::optional<Stage> parse_stage(std::string_view text) {
  for (auto [s, name] : kStageNames) {
    if (name == text) return s;
  }
  return std::nullopt;
}

std::string_view to_string(TraceKind kind) {
  for (auto [k, name] : kTraceNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<TraceKind> parse_trace_kind(std::string_view text) {
  for (auto [k, name] : kTraceNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

std::string_view to_string(MutationFailure failure) {
  switch (failure) {
    case MutationFailure::none: return "none";
    case MutationFailure::compile: return "compile";
    case MutationFailure::budget: return "budget";
    case MutationFailure::structure: return "structure";
    case MutationFailure::gateway: return "gateway";
    case MutationFailure::evaluator: return "evaluator";
  }
  return "?";
}

std::optional<std::string> validate_trace(const std::vector<TraceEvent>& trace,
                                          const RetryLimits& limits) {
  if (trace.empty()) return "empty trace";
  auto phase = [](TraceKind k) {
    switch (k) {
      case TraceKind::compile_fail:
      case TraceKind::debug: return 0;
      case TraceKind::budget_fail:
      case TraceKind::downscale: return 1;
      case TraceKind::struct_fail: return 2;
      default: return 3;
    }
  };
  int debug = 0;
  int downscale = 0;
  int current = 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const TraceKind k = trace[i].kind;
    const bool last = i + 1 == trace.size();
    const int p = phase(k);
    if (p < current) return "event " + std::to_string(i) + " goes back to an earlier phase";
    current = p;
    switch (k) {
      case TraceKind::debug:
        if (i == 0 || trace[i - 1].kind != TraceKind::compile_fail) {
          return "debug at " + std::to_string(i) + " does not follow a compile failure";
        }
        ++debug;
        break;
      case TraceKind::downscale:
        if (i == 0 || trace[i - 1].kind != TraceKind::budget_fail) {
          return "downscale at " + std::to_string(i) + " does not follow a budget failure";
        }
        ++downscale;
        break;
      case TraceKind::compile_fail:
      case TraceKind::budget_fail:
        // Either answered by a repair or terminal.
        if (!last && trace[i + 1].kind != (k == TraceKind::compile_fail ? TraceKind::debug
                                                                        : TraceKind::downscale)) {
          return std::string(to_string(k)) + " at " + std::to_string(i) +
                 " is neither repaired nor terminal";
        }
        break;
      case TraceKind::struct_fail:
      case TraceKind::pass:
      case TraceKind::gateway_fail:
      case TraceKind::evaluator_fail:
        if (!last) return std::string(to_string(k)) + " at " + std::to_string(i) + " is not last";
        break;
    }
  }
  if (debug > limits.max_debug) return "too many debug rounds: " + std::to_string(debug);
  if (downscale > limits.max_downscale) {
    return "too many downscale rounds: " + std::to_string(downscale);
  }
  const TraceKind end = trace.back().kind;
  if (end == TraceKind::debug || end == TraceKind::downscale) return "trace ends in a repair";
  return std::nullopt;
}

GenerationPrompt format_mutation_prompt(const Candidate& parent,
                                        const MutationDirective& directive,
                                        const PromptLibrary& prompts) {
  GenerationPrompt p;
  p.system = prompts.text("common-mutation.system");
  p.user = prompts.render("common-mutation.user", {{"idea", directive.rendered_instruction},
                                                   {"parent_model_code", parent.source}});
  p.idea_text = directive.idea.text;
  p.directive_kind = std::string(to_string(directive.template_kind));
  return p;
}

GenerationPrompt format_refinement_prompt(const Candidate& parent, std::string_view kind,
                                          std::string_view instruction,
                                          const PromptLibrary& prompts) {
  GenerationPrompt p;
  p.system = prompts.text("common-mutation.system");
  p.user = prompts.render("common-mutation.user", {{"idea", std::string(instruction)},
                                                   {"parent_model_code", parent.source}});
  p.idea_text = std::string(instruction);
  p.directive_kind = std::string(kind);
  return p;
}

GenerationPrompt format_idea_mutation_prompt(const Candidate& current,
                                             const std::string& previous_source,
                                             const AttributeTree& tree, bool improved,
                                             const PromptLibrary& prompts) {
  std::string ideas;
  for (const char* list : {"refinement-ideas-upscale", "refinement-ideas-hyperparam"}) {
    for (const auto& idea : prompts.list(list)) ideas += "\n- " + idea;
  }
  const std::string common = prompts.render(
      "idea-mutation-common",
      {{"attributes_for_performance_improvement", tree.render_for_prompt(Target::performance)},
       {"attributes_for_efficiency_improvement", tree.render_for_prompt(Target::efficiency)},
       {"refinement_ideas", ideas}});
  GenerationPrompt p;
  p.user = prompts.render(improved ? "idea-mutation-improved" : "idea-mutation-degraded",
                          {{"common_template", common},
                           {"parent_model_code", previous_source},
                           {"current_model_code", current.source}});
  p.idea_text = improved ? "iterate on improved parent" : "rework degraded parent";
  p.directive_kind = improved ? "idea-mutation-improved" : "idea-mutation-degraded";
  return p;
}

DownscaleChoice choose_downscale_idea(const std::vector<double>& budgets,
                                      const std::vector<double>& thresholds, Rng& rng,
                                      const PromptLibrary& prompts) {
  if (budgets.size() != thresholds.size()) {
    throw InvariantError("budget vector and thresholds differ in length");
  }
  bool over = false;
  bool far_over = false;
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    over = over || budgets[i] > thresholds[i];
    far_over = far_over || budgets[i] > 1.5 * thresholds[i];
  }
  if (!over) throw InvariantError("downscale requested for a candidate within every budget");
  if (far_over) {
    return DownscaleChoice{DownscaleKind::single_use, prompts.text("downscale-op-single-use"),
                           prompts.text("downscale-single-use")};
  }
  return DownscaleChoice{DownscaleKind::shrink, prompts.text("downscale-op-shrink"),
                         rng.pick(prompts.list("downscale-shrink-list"))};
}

std::vector<double> budget_vector(const BudgetReport& report,
                                  const std::vector<BudgetLimit>& dims) {
  std::vector<double> v;
  v.reserve(dims.size());
  for (const auto& d : dims) v.push_back(budget_value(report, d.label));
  return v;
}

bool within_limits(const std::vector<double>& budgets, const std::vector<BudgetLimit>& dims) {
  if (budgets.size() != dims.size()) return false;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (budgets[i] > dims[i].limit) return false;
  }
  return true;
}

namespace {

std::string describe_budgets(const std::vector<double>& budgets,
                             const std::vector<BudgetLimit>& dims) {
  std::ostringstream out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out << ' ';
    out << dims[i].label << '=' << budgets[i] << '/' << dims[i].limit;
  }
  return out.str();
}

// Runs one chat call and records it in `record`.
std::string converse(const MutationContext& ctx, const std::string& stream,
                     std::optional<std::string> system, std::string user, MutationRecord& record) {
  if (system) record.prompts.push_back({"system", *system});
  record.prompts.push_back({"user", user});
  std::string response = ctx.llm->complete(ChatRequest{stream, std::move(system), std::move(user)});
  record.prompts.push_back({"assistant", response});
  return response;
}

std::string code_of(const std::string& response) {
  try {
    return extract_code_block(response).code;
  } catch (const ParseError&) {
    return {};
  }
}

struct Attempt {
  enum class End { pass, fail, struct_fail } end;
  MutationFailure failure = MutationFailure::none;
  std::string source;
  std::string message;
};

Attempt run_attempt(const Candidate& parent, const GenerationPrompt& gp,
                    const MutationContext& ctx, const std::string& stream, Rng& rng,
                    MutationRecord& record) {
  auto fail = [&](TraceKind kind, MutationFailure failure, std::string message) {
    record.trace.push_back({kind, message});
    return Attempt{Attempt::End::fail, failure, {}, std::move(message)};
  };
  const auto dims = ctx.thresholds;
  std::vector<double> limits;
  for (const auto& d : dims) limits.push_back(d.limit);

  try {
    std::string code = code_of(converse(ctx, stream, gp.system, gp.user, record));

    // Execution verification.
    auto compile = [&](const std::string& src) {
      return src.empty() ? CompileCheck{false, "response holds no code"}
                         : ctx.evaluator->check_compile(src);
    };
    CompileCheck check = compile(code);
    int debug_rounds = 0;
    while (!check.ok) {
      record.trace.push_back({TraceKind::compile_fail, check.error});
      if (!ctx.verifiers.execution || debug_rounds == ctx.limits.max_debug) {
        return Attempt{Attempt::End::fail, MutationFailure::compile, {}, check.error};
      }
      ++debug_rounds;
      record.trace.push_back({TraceKind::debug, "round " + std::to_string(debug_rounds)});
      const std::string system = ctx.prompts->render(
          "debug.system", {{"base_module_classes", ctx.base_module_classes}});
      const std::string user = ctx.prompts->render("debug.user", {{"prompt", gp.user},
                                                                  {"error", check.error},
                                                                  {"sample_model_code", code},
                                                                  {"parent_model_code", parent.source}});
      code = code_of(converse(ctx, stream, system, user, record));
      check = compile(code);
    }

    // Budget verification. A downscaled version that no longer compiles is
    // discarded and counts as another budget failure.
    std::vector<double> budgets = budget_vector(ctx.evaluator->measure_budgets(code), dims);
    int downscale_rounds = 0;
    std::string pending_failure;
    while (ctx.verifiers.budget && (!pending_failure.empty() || !within_limits(budgets, dims))) {
      record.trace.push_back({TraceKind::budget_fail, pending_failure.empty()
                                                          ? describe_budgets(budgets, dims)
                                                          : pending_failure});
      if (downscale_rounds == ctx.limits.max_downscale) {
        return Attempt{Attempt::End::fail, MutationFailure::budget, {},
                       "over budget after " + std::to_string(downscale_rounds) +
                           " downscale rounds: " + describe_budgets(budgets, dims)};
      }
      ++downscale_rounds;
      const DownscaleChoice choice = choose_downscale_idea(budgets, limits, rng, *ctx.prompts);
      record.trace.push_back(
          {TraceKind::downscale, choice.kind == DownscaleKind::single_use ? "single-use" : choice.idea});
      const std::string system = ctx.prompts->render(
          "downscale.system", {{"model_downscaling_operation_template", choice.operation_template}});
      const std::string user = ctx.prompts->render("downscale.user",
                                                   {{"prompt", gp.user},
                                                    {"downscaling_idea", choice.idea},
                                                    {"sample_model_code", code},
                                                    {"parent_model_code", parent.source}});
      const std::string shrunk = code_of(converse(ctx, stream, system, user, record));
      const CompileCheck shrunk_check = compile(shrunk);
      if (!shrunk_check.ok) {
        pending_failure = "downscaled model does not compile: " + shrunk_check.error;
        continue;
      }
      pending_failure.clear();
      code = shrunk;
      budgets = budget_vector(ctx.evaluator->measure_budgets(code), dims);
    }

    // Structural verification.
    if (ctx.verifiers.structure) {
      const StructureVerdict verdict =
          judge_structure(parent.source, code, *ctx.llm, stream, *ctx.prompts);
      if (!verdict.yes) {
        record.trace.push_back({TraceKind::struct_fail, verdict.reason});
        return Attempt{Attempt::End::struct_fail, MutationFailure::structure, {}, verdict.reason};
      }
    }
    record.trace.push_back({TraceKind::pass, {}});
    return Attempt{Attempt::End::pass, MutationFailure::none, std::move(code), {}};
  } catch (const GatewayError& e) {
    return fail(TraceKind::gateway_fail, MutationFailure::gateway, e.what());
  } catch (const EvaluatorError& e) {
    return fail(TraceKind::evaluator_fail, MutationFailure::evaluator, e.what());
  }
}

}  // namespace

MutationOutcome mutate(const Candidate& parent, const PromptSource& prompt_source,
                       const MutationContext& ctx, const std::string& stream, Rng& rng,
                       Candidate child_template) {
  if (!ctx.llm || !ctx.evaluator || !ctx.prompts) {
    throw InvariantError("mutation context is incomplete");
  }
  MutationOutcome outcome;
  for (int attempt = 0; attempt <= ctx.limits.max_struct_retries; ++attempt) {
    const GenerationPrompt gp = prompt_source(rng, attempt);
    MutationRecord record;
    record.idea_text = gp.idea_text;
    record.directive_kind = gp.directive_kind;
    record.parent_id = parent.id;
    Attempt a = run_attempt(parent, gp, ctx, stream, rng, record);
    if (a.end == Attempt::End::struct_fail && attempt < ctx.limits.max_struct_retries) {
      outcome.rejected.push_back(std::move(record));
      continue;
    }
    outcome.record = std::move(record);
    outcome.failure = a.failure;
    outcome.message = std::move(a.message);
    if (a.end == Attempt::End::pass) {
      child_template.source = std::move(a.source);
      child_template.parent_id = parent.id;
      outcome.child = std::move(child_template);
    }
    return outcome;
  }
  return outcome;  // unreachable: the last attempt always returns above
}

}  // namespace archevo
