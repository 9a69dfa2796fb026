#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "archevo/evolution.hpp"

namespace archevo {

// history.jsonl holds one record per line with only deterministic fields:
// index, id, parent_id, stage, generation, val_accuracy, test_accuracy,
// budgets (label -> value, threshold order), idea_text, directive_kind,
// trace, source_file. Prompts live in transcript.jsonl.
std::string history_entry_to_json(const HistoryEntry& entry,
                                  const std::vector<BudgetLimit>& thresholds);
// Throws CorruptionError naming `line_no`. Budget labels are appended to
// `labels` on first use and checked against it afterwards.
HistoryEntry parse_history_line(std::string_view line, std::size_t line_no,
                                std::vector<std::string>* labels = nullptr);

std::string failure_to_json(const FailureEntry& failure);
FailureEntry parse_failure_line(std::string_view line, std::size_t line_no);

struct Checkpoint {
  int completed_generation = -1;
  std::size_t history_lines = 0;
  std::size_t failure_lines = 0;
  std::size_t planned_slots = 0;
  std::size_t generated_candidates = 0;
};

// Layout: config.toml, base.py, history.jsonl, failures.jsonl,
// candidates/<id>.py, transcript.jsonl, state.json, report/.
class RunDirectory {
 public:
  explicit RunDirectory(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path history_file() const { return root_ / "history.jsonl"; }
  std::filesystem::path failures_file() const { return root_ / "failures.jsonl"; }
  std::filesystem::path transcript_file() const { return root_ / "transcript.jsonl"; }
  std::filesystem::path state_file() const { return root_ / "state.json"; }
  std::filesystem::path config_file() const { return root_ / "config.toml"; }
  std::filesystem::path base_file() const { return root_ / "base.py"; }
  std::filesystem::path report_dir() const { return root_ / "report"; }

  bool has_checkpoint() const;
  std::optional<Checkpoint> checkpoint() const;

  // Starts a fresh run. An existing run is only replaced with `force`, and
  // then only the files this layout owns are removed.
  void create(bool force, std::string_view config_text, std::string_view base_source);

  // Appends what is not yet on disk and rewrites state.json.
  void save(const SearchState& state, const std::vector<BudgetLimit>& thresholds);

  // State as of the last checkpoint. Lines written after it (an interrupted
  // generation) are dropped from the files.
  SearchState resume();

 private:
  std::filesystem::path root_;
  std::size_t history_written_ = 0;
  std::size_t failures_written_ = 0;
};

}  // namespace archevo
