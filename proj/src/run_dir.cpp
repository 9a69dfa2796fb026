#include "archevo/run_dir.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

namespace archevo {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json trace_to_json(const std::vector<TraceEvent>& trace) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : trace) arr.push_back({{"kind", to_string(e.kind)}, {"detail", e.detail}});
  return arr;
}

std::vector<TraceEvent> trace_from_json(const ordered_json& arr) {
  std::vector<TraceEvent> trace;
  for (const auto& e : arr) {
    auto kind = parse_trace_kind(e.at("kind").get<std::string>());
    if (!kind) throw CorruptionError("unknown trace event '" + e.at("kind").get<std::string>() + "'");
    trace.push_back({*kind, e.value("detail", std::string())});
  }
  return trace;
}

[[noreturn]] void corrupt(const std::string& file, std::size_t line_no, const std::string& what) {
  throw CorruptionError(file + " line " + std::to_string(line_no) + ": " + what);
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  std::vector<std::string> lines;
  for (auto& l : split_lines(read_text_file(path))) {
    if (!l.empty()) lines.push_back(std::move(l));
  }
  return lines;
}

void append_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  if (lines.empty()) return;
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error("cannot append to '" + path.string() + "'");
  for (const auto& l : lines) out << l << '\n';
  out.flush();
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

void write_atomically(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  write_text_file(tmp, content);
  std::filesystem::rename(tmp, path);
}

void truncate_lines(const std::filesystem::path& path, std::size_t keep) {
  auto lines = read_lines(path);
  if (lines.size() <= keep) return;
  lines.resize(keep);
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  write_atomically(path, text);
}

}  // namespace

std::string history_entry_to_json(const HistoryEntry& entry,
                                  const std::vector<BudgetLimit>& thresholds) {
  ordered_json j;
  j["index"] = entry.index;
  j["id"] = entry.candidate.id;
  j["parent_id"] = entry.candidate.parent_id ? ordered_json(*entry.candidate.parent_id) : ordered_json();
  j["stage"] = to_string(entry.candidate.stage);
  j["generation"] = entry.candidate.generation;
  j["val_accuracy"] = entry.val_accuracy;
  j["test_accuracy"] = entry.test_accuracy ? ordered_json(*entry.test_accuracy) : ordered_json();
  ordered_json budgets = ordered_json::object();
  for (std::size_t i = 0; i < thresholds.size() && i < entry.budgets.size(); ++i) {
    budgets[thresholds[i].label] = entry.budgets[i];
  }
  j["budgets"] = std::move(budgets);
  j["idea_text"] = entry.mutation.idea_text;
  j["directive_kind"] = entry.mutation.directive_kind;
  j["trace"] = trace_to_json(entry.mutation.trace);
  j["source_file"] = "candidates/" + entry.candidate.id + ".py";
  return j.dump();
}

HistoryEntry parse_history_line(std::string_view line, std::size_t line_no,
                                std::vector<std::string>* labels) {
  const std::string file = "history.jsonl";
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    corrupt(file, line_no, std::string("not JSON: ") + e.what());
  }
  try {
    HistoryEntry e;
    e.index = j.at("index").get<std::size_t>();
    e.candidate.id = j.at("id").get<std::string>();
    if (!j.at("parent_id").is_null()) e.candidate.parent_id = j["parent_id"].get<std::string>();
    auto stage = parse_stage(j.at("stage").get<std::string>());
    if (!stage) corrupt(file, line_no, "unknown stage");
    e.candidate.stage = *stage;
    e.candidate.generation = j.at("generation").get<int>();
    e.val_accuracy = j.at("val_accuracy").get<double>();
    if (!j.at("test_accuracy").is_null()) e.test_accuracy = j["test_accuracy"].get<double>();
    std::vector<std::string> keys;
    for (auto it = j.at("budgets").begin(); it != j["budgets"].end(); ++it) {
      keys.push_back(it.key());
      e.budgets.push_back(it.value().get<double>());
    }
    if (labels) {
      if (labels->empty()) *labels = keys;
      else if (*labels != keys) corrupt(file, line_no, "budget dimensions differ from earlier lines");
    }
    e.mutation.idea_text = j.at("idea_text").get<std::string>();
    e.mutation.directive_kind = j.at("directive_kind").get<std::string>();
    e.mutation.parent_id = e.candidate.parent_id.value_or("");
    e.mutation.trace = trace_from_json(j.at("trace"));
    if (!(e.val_accuracy >= 0.0 && e.val_accuracy <= 100.0)) {
      corrupt(file, line_no, "val_accuracy outside [0, 100]");
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    corrupt(file, line_no, ex.what());
  } catch (const CorruptionError& ex) {
    if (std::string_view(ex.what()).starts_with(file)) throw;
    corrupt(file, line_no, ex.what());
  }
}

std::string failure_to_json(const FailureEntry& f) {
  ordered_json j;
  j["slot"] = f.slot;
  j["generation"] = f.generation;
  j["stage"] = to_string(f.stage);
  j["parent_id"] = f.parent_id;
  j["reason"] = f.reason;
  j["message"] = f.message;
  j["terminal"] = f.terminal;
  j["trace"] = trace_to_json(f.trace);
  return j.dump();
}

FailureEntry parse_failure_line(std::string_view line, std::size_t line_no) {
  const std::string file = "failures.jsonl";
  try {
    const ordered_json j = ordered_json::parse(line);
    FailureEntry f;
    f.slot = j.at("slot").get<std::string>();
    f.generation = j.at("generation").get<int>();
    auto stage = parse_stage(j.at("stage").get<std::string>());
    if (!stage) corrupt(file, line_no, "unknown stage");
    f.stage = *stage;
    f.parent_id = j.at("parent_id").get<std::string>();
    f.reason = j.at("reason").get<std::string>();
    f.message = j.at("message").get<std::string>();
    f.terminal = j.at("terminal").get<bool>();
    f.trace = trace_from_json(j.at("trace"));
    return f;
  } catch (const nlohmann::json::exception& ex) {
    corrupt(file, line_no, ex.what());
  } catch (const CorruptionError& ex) {
    if (std::string_view(ex.what()).starts_with(file)) throw;
    corrupt(file, line_no, ex.what());
  }
}

RunDirectory::RunDirectory(std::filesystem::path root) : root_(std::move(root)) {}

bool RunDirectory::has_checkpoint() const { return std::filesystem::exists(state_file()); }

std::optional<Checkpoint> RunDirectory::checkpoint() const {
  if (!has_checkpoint()) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(read_text_file(state_file()));
    Checkpoint c;
    c.completed_generation = j.at("completed_generation").get<int>();
    c.history_lines = j.at("history_lines").get<std::size_t>();
    c.failure_lines = j.at("failure_lines").get<std::size_t>();
    c.planned_slots = j.at("planned_slots").get<std::size_t>();
    c.generated_candidates = j.at("generated_candidates").get<std::size_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError("state.json: " + std::string(e.what()));
  }
}

void RunDirectory::create(bool force, std::string_view config_text, std::string_view base_source) {
  namespace fs = std::filesystem;
  const fs::path owned[] = {history_file(), failures_file(), transcript_file(), state_file(),
                            config_file(),  base_file(),     root_ / "candidates", report_dir()};
  bool occupied = false;
  for (const auto& p : owned) occupied = occupied || fs::exists(p);
  if (occupied && !force) {
    throw ConfigError("out: run directory '" + root_.string() +
                "' already holds a run; pass --force to replace it or --resume to continue it");
  }
  for (const auto& p : owned) fs::remove_all(p);
  fs::create_directories(root_ / "candidates");
  write_text_file(config_file(), config_text);
  write_text_file(base_file(), base_source);
  write_text_file(history_file(), "");
  write_text_file(failures_file(), "");
  history_written_ = 0;
  failures_written_ = 0;
}

void RunDirectory::save(const SearchState& state, const std::vector<BudgetLimit>& thresholds) {
  const auto& entries = state.history.entries();
  std::vector<std::string> lines;
  for (std::size_t i = history_written_; i < entries.size(); ++i) {
    write_text_file(root_ / "candidates" / (entries[i].candidate.id + ".py"), entries[i].candidate.source);
    lines.push_back(history_entry_to_json(entries[i], thresholds));
  }
  append_lines(history_file(), lines);
  history_written_ = entries.size();

  lines.clear();
  for (std::size_t i = failures_written_; i < state.failures.size(); ++i) {
    lines.push_back(failure_to_json(state.failures[i]));
  }
  append_lines(failures_file(), lines);
  failures_written_ = state.failures.size();

  nlohmann::ordered_json j;
  j["completed_generation"] = state.completed_generation;
  j["history_lines"] = history_written_;
  j["failure_lines"] = failures_written_;
  j["planned_slots"] = state.planned_slots;
  j["generated_candidates"] = state.generated_candidates;
  write_atomically(state_file(), j.dump(2) + "\n");
}

SearchState RunDirectory::resume() {
  const auto cp = checkpoint();
  if (!cp) throw Error("run directory '" + root_.string() + "' has no checkpoint to resume");
  truncate_lines(history_file(), cp->history_lines);
  truncate_lines(failures_file(), cp->failure_lines);

  SearchState state;
  const auto hist = read_lines(history_file());
  if (hist.size() != cp->history_lines) {
    throw CorruptionError("history.jsonl has " + std::to_string(hist.size()) +
                          " lines, state.json expects " + std::to_string(cp->history_lines));
  }
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    HistoryEntry e = parse_history_line(hist[i], i + 1, &labels);
    e.candidate.source = read_text_file(root_ / "candidates" / (e.candidate.id + ".py"));
    state.history.append(std::move(e));
  }
  const auto fails = read_lines(failures_file());
  for (std::size_t i = 0; i < fails.size(); ++i) {
    state.failures.push_back(parse_failure_line(fails[i], i + 1));
  }
  state.completed_generation = cp->completed_generation;
  state.planned_slots = cp->planned_slots;
  state.generated_candidates = cp->generated_candidates;
  history_written_ = hist.size();
  failures_written_ = fails.size();
  return state;
}

}  // namespace archevo
