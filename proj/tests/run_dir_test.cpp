#include <gtest/gtest.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "archevo/app.hpp"
#include "archevo/config.hpp"
#include "archevo/report.hpp"
#include "archevo/run_dir.hpp"
#include "test_support.hpp"

using namespace archevo;
using archevo::testing::fixture;
using archevo::testing::TempDir;

namespace {

SearchRequest demo_request(const std::filesystem::path& out, int generations) {
  SearchRequest req;
  req.config_text = read_text_file(fixture("demo.toml"));
  req.config = parse_config(req.config_text, fixture(""));
  req.config.search.generations = generations;
  req.base_source = read_text_file(fixture("base_model.py"));
  req.out_dir = out;
  return req;
}

std::size_t line_count(const std::filesystem::path& p) {
  std::size_t n = 0;
  for (const auto& l : split_lines(read_text_file(p))) n += !trim(l).empty();
  return n;
}

void append_line(const std::filesystem::path& p, const std::string& line) {
  std::ofstream out(p, std::ios::app);
  out << line << "\n";
}

}  // namespace

TEST(HistoryLines, RoundTrip) {
  HistoryEntry e;
  e.index = 3;
  e.candidate = Candidate{"g1.fair.02", "src", std::string("base"), Stage::fair, 1};
  e.val_accuracy = 71.25;
  e.test_accuracy = 70.95;
  e.budgets = {1.0e6, 1.0e9};
  e.mutation.idea_text = "idea";
  e.mutation.directive_kind = "new-module";
  e.mutation.trace = {{TraceKind::compile_fail, "x"}, {TraceKind::debug, "round 1"}, {TraceKind::pass, ""}};
  const std::vector<BudgetLimit> dims = {{"params", 1.5e6}, {"flops", 1.6e9}};
  const std::string line = history_entry_to_json(e, dims);
  std::vector<std::string> labels;
  const auto back = parse_history_line(line, 1, &labels);
  EXPECT_EQ(back.index, 3u);
  EXPECT_EQ(back.candidate.id, e.candidate.id);
  EXPECT_EQ(back.candidate.parent_id, e.candidate.parent_id);
  EXPECT_EQ(back.candidate.stage, Stage::fair);
  EXPECT_EQ(back.val_accuracy, 71.25);
  EXPECT_EQ(back.budgets, e.budgets);
  EXPECT_EQ(back.mutation.trace, e.mutation.trace);
  EXPECT_EQ(labels, (std::vector<std::string>{"params", "flops"}));
  EXPECT_EQ(history_entry_to_json(back, dims), line);
}

TEST(HistoryLines, CorruptLineNamesLineNumber) {
  try {
    parse_history_line("{\"index\": 0}", 7);
    FAIL() << "expected CorruptionError";
  } catch (const CorruptionError& e) {
    EXPECT_NE(std::string(e.what()).find("line 7"), std::string::npos);
  }
  EXPECT_THROW(parse_history_line("not json", 1), CorruptionError);
}

TEST(FailureLines, RoundTrip) {
  const FailureEntry f{"g1.llm.00.s2", 1, Stage::llm_iter, "g1.llm.00.s1", "chain-stopped",
                       "step 1 of the chain failed", true, {}};
  const auto back = parse_failure_line(failure_to_json(f), 1);
  EXPECT_EQ(back.slot, f.slot);
  EXPECT_EQ(back.reason, f.reason);
  EXPECT_EQ(back.stage, Stage::llm_iter);
  EXPECT_TRUE(back.terminal);
}

TEST(RunDir, DemoRunLayoutAndReport) {
  TempDir dir;
  const auto out = dir / "run";
  std::ostringstream log;
  const auto res = run_search_in_directory(demo_request(out, 1), &log);
  RunDirectory rd(out);
  for (const auto& f : {rd.config_file(), rd.base_file(), rd.history_file(), rd.failures_file(),
                        rd.transcript_file(), rd.state_file()}) {
    EXPECT_TRUE(std::filesystem::exists(f)) << f;
  }
  EXPECT_EQ(line_count(rd.history_file()), res.state.history.size());
  for (const auto& e : res.state.history.entries()) {
    EXPECT_EQ(read_text_file(out / "candidates" / (e.candidate.id + ".py")), e.candidate.source);
  }
  const auto cp = rd.checkpoint();
  ASSERT_TRUE(cp);
  EXPECT_EQ(cp->completed_generation, 1);
  EXPECT_EQ(cp->history_lines, res.state.history.size());
  EXPECT_NE(log.str().find("generation 1:"), std::string::npos);

  EXPECT_EQ(line_count(rd.report_dir() / "history.csv"), res.state.history.size() + 1);
  const auto summary = nlohmann::json::parse(read_text_file(rd.report_dir() / "summary.json"));
  EXPECT_EQ(summary.at("best").at("id"), res.state.history.at(res.best).candidate.id);
  EXPECT_TRUE(std::filesystem::exists(rd.report_dir() / "accuracy.svg"));
  EXPECT_TRUE(std::filesystem::exists(rd.report_dir() / "pareto_front.csv"));
  EXPECT_TRUE(std::filesystem::exists(rd.report_dir() / "pass_rates.csv"));
}

TEST(RunDir, ResumeMatchesUninterruptedRun) {
  TempDir dir;
  run_search_in_directory(demo_request(dir / "full", 2));
  run_search_in_directory(demo_request(dir / "split", 1));
  auto again = demo_request(dir / "split", 2);
  again.resume = true;
  const auto res = run_search_in_directory(again);
  EXPECT_FALSE(res.already_complete);
  EXPECT_EQ(read_text_file(dir / "split" / "history.jsonl"),
            read_text_file(dir / "full" / "history.jsonl"));
  EXPECT_EQ(read_text_file(dir / "split" / "failures.jsonl"),
            read_text_file(dir / "full" / "failures.jsonl"));

  const auto noop = run_search_in_directory(again);
  EXPECT_TRUE(noop.already_complete);
  EXPECT_EQ(noop.state.history.size(), res.state.history.size());
}

TEST(RunDir, TranscriptReplayReproducesTheRun) {
  TempDir dir;
  run_search_in_directory(demo_request(dir / "live", 2));
  auto replay = demo_request(dir / "replay", 2);
  replay.config.gateway.synthetic = false;
  replay.config.gateway.script = dir / "live" / "transcript.jsonl";
  run_search_in_directory(replay);
  EXPECT_EQ(read_text_file(dir / "replay" / "history.jsonl"),
            read_text_file(dir / "live" / "history.jsonl"));
  EXPECT_EQ(read_text_file(dir / "replay" / "failures.jsonl"),
            read_text_file(dir / "live" / "failures.jsonl"));
}

TEST(RunDir, ResumeDropsAnInterruptedGeneration) {
  TempDir dir;
  const auto out = dir / "run";
  const auto first = run_search_in_directory(demo_request(out, 1));
  RunDirectory rd(out);
  const std::string history = read_text_file(rd.history_file());
  // A generation that died halfway left extra lines behind.
  append_line(rd.history_file(), split_lines(history).back());
  append_line(rd.failures_file(), "{\"slot\": \"partial\"}");
  const SearchState s = RunDirectory(out).resume();
  EXPECT_EQ(s.history.size(), first.state.history.size());
  EXPECT_EQ(s.completed_generation, 1);
  EXPECT_EQ(read_text_file(rd.history_file()), history);
}

TEST(RunDir, RefusesToOverwriteWithoutForce) {
  TempDir dir;
  const auto out = dir / "run";
  run_search_in_directory(demo_request(out, 0));
  write_text_file(out / "notes.txt", "mine");
  EXPECT_THROW(run_search_in_directory(demo_request(out, 0)), ConfigError);
  auto forced = demo_request(out, 0);
  forced.force = true;
  run_search_in_directory(forced);
  EXPECT_EQ(read_text_file(out / "notes.txt"), "mine");
}

TEST(RunDir, ResumeRejectsChangedThresholds) {
  TempDir dir;
  run_search_in_directory(demo_request(dir / "run", 0));
  auto req = demo_request(dir / "run", 1);
  req.resume = true;
  req.config.search.thresholds.pop_back();
  EXPECT_THROW(run_search_in_directory(req), Error);
}

TEST(Report, CorruptAndEmptyRuns) {
  TempDir dir;
  const auto out = dir / "run";
  run_search_in_directory(demo_request(out, 0));
  RunDirectory rd(out);
  const std::string good = read_text_file(rd.history_file());
  auto lines = split_lines(good);
  lines[2] = "{\"index\": 2, \"id\": ";
  std::string broken;
  for (const auto& l : lines) broken += l + "\n";
  write_text_file(rd.history_file(), broken);
  try {
    load_run(out);
    FAIL() << "expected CorruptionError";
  } catch (const CorruptionError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  write_text_file(rd.history_file(), "");
  EXPECT_THROW(load_run(out), Error);
}

TEST(Report, PassRatesDropWithoutBudgetVerifier) {
  TempDir dir;
  const auto on = run_search_in_directory(demo_request(dir / "on", 2));
  auto req = demo_request(dir / "off", 2);
  req.config.search.verifiers.budget = false;
  run_search_in_directory(req);
  const auto pr_on = compute_pass_rates(load_run(dir / "on"));
  const auto pr_off = compute_pass_rates(load_run(dir / "off"));
  EXPECT_EQ(pr_on.recorded + 1, on.state.history.size());
  EXPECT_LT(pr_off.overall(), pr_on.overall());
  EXPECT_LE(pr_on.execution_passed, pr_on.execution_entered);
  EXPECT_LE(pr_on.budget_passed, pr_on.budget_entered);
  EXPECT_LE(pr_on.structure_passed, pr_on.structure_entered);
  EXPECT_EQ(pr_on.budget_entered, pr_on.execution_passed);
}
