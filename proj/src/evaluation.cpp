#include "archevo/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "archevo/response_parsing.hpp"

namespace archevo {

double budget_value(const BudgetReport& report, std::string_view label) {
  if (label == "params") return report.params;
  if (label == "flops") return report.flops;
  throw InvariantError("unknown budget dimension '" + std::string(label) + "'");
}

bool is_budget_label(std::string_view label) { return label == "params" || label == "flops"; }

bool EvaluationResult::well_formed() const {
  return valid ? (val_accuracy.has_value() && budgets.has_value()) : compile_error.has_value();
}

namespace {

std::optional<int> parse_positive_int(std::string_view text) {
  if (text.empty() || text.size() > 9) return std::nullopt;
  int value = 0;
  for (char c : text) {
    if (c < '0' || c > '9') return std::nullopt;
    value = value * 10 + (c - '0');
  }
  return value;
}

}  // namespace

std::optional<SurrogateDescriptor> parse_descriptor(std::string_view source, std::string* error) {
  static constexpr std::string_view kMarker = "#SURROGATE";
  for (const auto& raw : split_lines(source)) {
    const std::string line = trim(raw);
    if (line.rfind(kMarker, 0) != 0) continue;
    // First descriptor line decides, well-formed or not.
    auto fail = [&]() -> std::optional<SurrogateDescriptor> {
      if (error) *error = "malformed descriptor";
      return std::nullopt;
    };
    const std::string rest = line.substr(kMarker.size());
    if (!rest.empty() && rest.front() != ' ' && rest.front() != '\t') return fail();
    SurrogateDescriptor d;
    bool have_depth = false;
    bool have_width = false;
    bool have_tags = false;
    for (const auto& token : split(collapse_whitespace(rest), ' ')) {
      if (token.empty()) continue;
      const auto eq = token.find('=');
      if (eq == std::string::npos) return fail();
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      if (key == "depth" && !have_depth) {
        auto v = parse_positive_int(value);
        if (!v || *v < 2) return fail();
        d.depth = *v;
        have_depth = true;
      } else if (key == "width" && !have_width) {
        auto v = parse_positive_int(value);
        if (!v || *v < 1) return fail();
        d.width = *v;
        have_width = true;
      } else if (key == "tags" && !have_tags) {
        have_tags = true;
        for (const auto& tag : split(value, ',')) {
          std::string t = to_lower(trim(tag));
          if (!t.empty()) d.tags.push_back(std::move(t));
        }
      } else {
        return fail();
      }
    }
    if (!have_depth || !have_width) return fail();
    return d;
  }
  if (error) *error = "missing descriptor";
  return std::nullopt;
}

std::string format_descriptor(const SurrogateDescriptor& d) {
  std::string out = "#SURROGATE depth=" + std::to_string(d.depth) +
                    " width=" + std::to_string(d.width) + " tags=";
  for (std::size_t i = 0; i < d.tags.size(); ++i) {
    if (i) out.push_back(',');
    out += d.tags[i];
  }
  return out;
}

BudgetReport SurrogateEvaluator::budgets_of(const SurrogateDescriptor& d) {
  const double params = static_cast<double>(d.depth) * d.width * d.width * 64.0;
  return BudgetReport{params, params * 1024.0};
}

double SurrogateEvaluator::val_accuracy_of(const SurrogateDescriptor& d) {
  static const std::set<std::string> kBonus = {"attn", "se", "dwconv", "mlp"};
  std::set<std::string> hits;
  for (const auto& t : d.tags) {
    if (kBonus.contains(t)) hits.insert(t);
  }
  const double b = static_cast<double>(hits.size());
  const double base = 100.0 * (1.0 - std::exp(-static_cast<double>(d.depth) * d.width / 256.0));
  return std::min(99.0, base * (1.0 + 0.01 * b));
}

CompileCheck SurrogateEvaluator::check_compile(const std::string& source) {
  std::string error;
  if (parse_descriptor(source, &error)) return CompileCheck{true, {}};
  return CompileCheck{false, error};
}

BudgetReport SurrogateEvaluator::measure_budgets(const std::string& source) {
  std::string error;
  auto d = parse_descriptor(source, &error);
  if (!d) throw EvaluatorError("cannot measure budgets: " + error);
  return budgets_of(*d);
}

EvaluationResult SurrogateEvaluator::train_eval(const std::string& source) {
  EvaluationResult r;
  std::string error;
  auto d = parse_descriptor(source, &error);
  if (!d) {
    r.compile_error = error;
    return r;
  }
  r.valid = true;
  r.val_accuracy = val_accuracy_of(*d);
  r.test_accuracy = *r.val_accuracy - 0.3;
  r.budgets = budgets_of(*d);
  return r;
}

StructureVerdict judge_structure(const std::string& parent_source, const std::string& child_source,
                                 ChatGateway& llm, const std::string& stream,
                                 const PromptLibrary& prompts) {
  ChatRequest req{stream, std::nullopt,
                  prompts.render("structural-verify", {{"sample_model_code", child_source},
                                                       {"parent_model_code", parent_source}})};
  const std::string response = llm.complete(req);
  try {
    const std::string verdict = parse_tag_response(response);
    if (verdict.rfind("yes", 0) == 0) return StructureVerdict{true, false, "yes"};
    return StructureVerdict{false, false, verdict.empty() ? "no" : verdict};
  } catch (const ParseError&) {
    if (collapse_whitespace(child_source) == collapse_whitespace(parent_source)) {
      return StructureVerdict{false, true, "verdict unparsable; identical to parent"};
    }
    return StructureVerdict{false, true, "verdict unparsable"};
  }
}

}  // namespace archevo
