#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "archevo/evolution.hpp"
#include "archevo/run_dir.hpp"

namespace archevo {

struct RunData {
  std::vector<HistoryEntry> history;
  std::vector<std::string> budget_labels;
  std::vector<FailureEntry> failures;
  std::optional<Checkpoint> checkpoint;
};

// Throws CorruptionError naming the bad line; Error for an empty history.
RunData load_run(const std::filesystem::path& run_dir);

// Counts over every generated candidate (structural retries included).
// A phase is entered by candidates that passed the previous one.
struct PassRates {
  std::size_t generated = 0;
  std::size_t execution_entered = 0, execution_passed = 0;
  std::size_t budget_entered = 0, budget_passed = 0;
  std::size_t structure_entered = 0, structure_passed = 0;
  std::size_t recorded = 0;  // entered the history (base excluded)

  double overall() const { return generated ? static_cast<double>(recorded) / generated : 0.0; }
};

PassRates compute_pass_rates(const RunData& run);

// history.csv, pareto_front.csv, pass_rates.csv, accuracy.svg and
// summary.json in `out_dir`. Returns the file names written.
std::vector<std::string> write_report(const RunData& run, const std::filesystem::path& out_dir);

}  // namespace archevo
