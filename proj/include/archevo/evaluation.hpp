#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "archevo/common.hpp"
#include "archevo/llm_gateway.hpp"
#include "archevo/prompts.hpp"

namespace archevo {

// Budget dimensions an evaluator can measure.
struct BudgetReport {
  double params = 0.0;
  double flops = 0.0;
};

// Value of the dimension named `label` ("params" or "flops").
double budget_value(const BudgetReport& report, std::string_view label);
bool is_budget_label(std::string_view label);

// valid => val_accuracy and budgets present; !valid => compile_error present.
struct EvaluationResult {
  bool valid = false;
  std::optional<std::string> compile_error;
  std::optional<double> val_accuracy;
  std::optional<double> test_accuracy;
  std::optional<BudgetReport> budgets;

  bool well_formed() const;
};

struct CompileCheck {
  bool ok = false;
  std::string error;
};

// Raised when the evaluator itself fails (worker crash, broken pipe), as
// opposed to the candidate failing a check.
class EvaluatorError : public Error {
 public:
  using Error::Error;
};

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual CompileCheck check_compile(const std::string& source) = 0;
  // Only meaningful after check_compile passed.
  virtual BudgetReport measure_budgets(const std::string& source) = 0;
  virtual EvaluationResult train_eval(const std::string& source) = 0;
};

struct SurrogateDescriptor {
  int depth = 0;
  int width = 0;
  std::vector<std::string> tags;
};

// First line of the form `#SURROGATE depth=<int> width=<int> tags=a,b` with
// depth >= 2 and width >= 1.
// Returns the error text "missing descriptor" or "malformed descriptor"
// through `error` when there is none or it does not parse.
std::optional<SurrogateDescriptor> parse_descriptor(std::string_view source,
                                                    std::string* error = nullptr);
std::string format_descriptor(const SurrogateDescriptor& d);

// Deterministic stand-in for training:
//   params = depth * width^2 * 64, flops = params * 1024
//   val = min(99, 100 * (1 - exp(-depth * width / 256)) * (1 + 0.01 * b))
//   test = val - 0.3
// where b counts the distinct tags among {attn, se, dwconv, mlp}.
class SurrogateEvaluator : public Evaluator {
 public:
  static BudgetReport budgets_of(const SurrogateDescriptor& d);
  static double val_accuracy_of(const SurrogateDescriptor& d);

  CompileCheck check_compile(const std::string& source) override;
  BudgetReport measure_budgets(const std::string& source) override;
  EvaluationResult train_eval(const std::string& source) override;
};

struct StructureVerdict {
  bool yes = false;
  // Set when the LLM answer had no response marker and the local rule decided.
  bool fallback = false;
  std::string reason;
};

// Asks whether `child` changes the architecture of `parent` and repeats its
// base block at least twice. An unparsable answer fails the candidate; the
// reason says whether it was a whitespace-level copy of the parent.
StructureVerdict judge_structure(const std::string& parent_source, const std::string& child_source,
                                 ChatGateway& llm, const std::string& stream,
                                 const PromptLibrary& prompts = PromptLibrary::builtin());

}  // namespace archevo
