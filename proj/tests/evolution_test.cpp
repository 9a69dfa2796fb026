#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "archevo/evolution.hpp"
#include "test_support.hpp"

using namespace archevo;
using archevo::testing::fenced;
using archevo::testing::fixture;
using archevo::testing::model;

namespace {

bool is_verify_prompt(const ChatRequest& r) {
  return r.user.rfind("The target model was mutated from the parent model.\n\nJudge", 0) == 0;
}

// Every generation compiles, fits the budget and passes structural review.
// The model depends on the stream only, so it is the same at any worker
// count.
Responder always_pass() {
  return [](const ChatRequest& r, std::uint64_t) -> std::string {
    if (is_verify_prompt(r)) return "##response##yes";
    const auto h = fnv1a64(r.stream);
    return fenced(model(2 + static_cast<int>(h % 6), 8 + static_cast<int>((h >> 8) % 24)));
  };
}

struct World {
  ScriptedGateway llm;
  SurrogateEvaluator evaluator;
  KnowledgeDB db;
  TranscriptLog log;
  SearchConfig config;

  explicit World(Responder responder)
      : llm(std::move(responder)),
        db(KnowledgeDB::load_jsonl(load_attribute_tree_file(fixture("attribute_tree.json")),
                                   fixture("ideas_demo.jsonl"))) {
    llm.set_transcript(&log);
    config.thresholds = {{"params", 1.5e6}, {"flops", 1.6e9}};
    config.seed = 7;
  }

  SearchEngine engine() { return SearchEngine(config, SearchDeps{&llm, &evaluator, &db}); }
};

const std::string kBase = model(3, 16);

std::size_t terminal_failures(const SearchState& s) {
  return std::count_if(s.failures.begin(), s.failures.end(),
                       [](const FailureEntry& f) { return f.terminal; });
}

HistoryEntry entry(std::size_t index, std::string id, double acc, double budget) {
  HistoryEntry e;
  e.index = index;
  e.candidate.id = std::move(id);
  e.val_accuracy = acc;
  e.budgets = {budget};
  return e;
}

EvaluationResult valid_result(double acc, double params) {
  EvaluationResult r;
  r.valid = true;
  r.val_accuracy = acc;
  r.budgets = BudgetReport{params, params * 1024};
  return r;
}

}  // namespace

TEST(History, AppendGuardsIdsAndIndices) {
  History h;
  h.append(entry(0, "a", 1, 1));
  EXPECT_THROW(h.append(entry(1, "a", 1, 1)), CorruptionError);
  EXPECT_THROW(h.append(entry(5, "b", 1, 1)), CorruptionError);
  h.append(entry(1, "b", 1, 1));
  EXPECT_EQ(h.find("b")->index, 1u);
  EXPECT_EQ(h.find("zz"), nullptr);
}

TEST(History, RecordGuard) {
  History h;
  const std::vector<BudgetLimit> limits = {{"params", 1.5e6}};
  const Candidate c{"c", "src", std::string("base"), Stage::fair, 1};
  EvaluationResult invalid;
  invalid.compile_error = "boom";
  EXPECT_FALSE(record(h, c, invalid, {}, limits));
  EXPECT_FALSE(record(h, c, valid_result(50, 1.6e6), {}, limits));
  EXPECT_TRUE(h.empty());
  EXPECT_TRUE(record(h, c, valid_result(50, 1.5e6), {}, limits));
  EXPECT_EQ(h.at(0).budgets, (std::vector<double>{1.5e6}));
  EXPECT_THROW(record(h, c, valid_result(50, 1.0e6), {}, limits), CorruptionError);
}

TEST(TopK, OrderAndTies) {
  History h;
  h.append(entry(0, "a", 80, 3));
  h.append(entry(1, "b", 90, 5));
  h.append(entry(2, "c", 90, 4));
  h.append(entry(3, "d", 80, 3));
  EXPECT_EQ(select_topk_parents(h, 10), (std::vector<std::size_t>{2, 1, 0, 3}));
  EXPECT_EQ(select_topk_parents(h, 2), (std::vector<std::size_t>{2, 1}));
  EXPECT_TRUE(select_topk_parents(h, 0).empty());
  EXPECT_EQ(best_entry(h), 2u);
  EXPECT_THROW(best_entry(History{}), EmptyHistoryError);
}

TEST(Refinement, SwitchRule) {
  const std::vector<BudgetLimit> limits = {{"params", 1.5e6}, {"flops", 1.6e9}};
  Rng rng(3);
  const auto upscale = PromptLibrary::builtin().list("refinement-ideas-upscale");
  const auto hyper = PromptLibrary::builtin().list("refinement-ideas-hyperparam");
  auto r = choose_refinement({1.0e6, 1.5e9}, limits, 0.9, rng);
  EXPECT_EQ(r.kind, RefinementKind::upscale);
  EXPECT_NE(std::find(upscale.begin(), upscale.end(), r.instruction), upscale.end());
  r = choose_refinement({1.4e6, 1.5e9}, limits, 0.9, rng);
  EXPECT_EQ(r.kind, RefinementKind::hyperparam);
  EXPECT_NE(std::find(hyper.begin(), hyper.end(), r.instruction), hyper.end());
  EXPECT_EQ(choose_refinement({1.4e6, 1.0e9}, limits, 0.9, rng).kind, RefinementKind::upscale);
  EXPECT_EQ(choose_refinement({1.35e6, 1.44e9}, limits, 0.9, rng).kind, RefinementKind::hyperparam);
  EXPECT_THROW(choose_refinement({1.0}, limits, 0.9, rng), InvariantError);
}

TEST(SearchConfig, Validation) {
  SearchConfig c;
  try {
    c.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("thresholds", 0), 0u);
  }
  c.thresholds = {{"latency", 1}};
  EXPECT_THROW(c.validate(), ConfigError);
  c.thresholds = {{"params", 1}, {"params", 2}};
  EXPECT_THROW(c.validate(), ConfigError);
  c.thresholds = {{"params", 1}};
  c.validate();
  c.workers = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Search, InitialPopulation) {
  World w(always_pass());
  SearchState s;
  w.engine().init_population(s, kBase);
  ASSERT_EQ(s.history.size(), 9u);
  EXPECT_EQ(s.history.at(0).candidate.id, "base");
  EXPECT_FALSE(s.history.at(0).candidate.parent_id);
  for (std::size_t i = 1; i < 9; ++i) {
    const auto& c = s.history.at(i).candidate;
    EXPECT_EQ(c.id, "g0.init.0" + std::to_string(i - 1));
    EXPECT_EQ(c.parent_id, std::optional<std::string>("base"));
    EXPECT_EQ(c.stage, Stage::init);
  }
  EXPECT_EQ(s.planned_slots, 8u);
  EXPECT_EQ(s.completed_generation, 0);
  EXPECT_THROW(w.engine().init_population(s, kBase), InvariantError);
}

TEST(Search, EmptyInitialPopulation) {
  World w(always_pass());
  w.config.k0 = 0;
  SearchState s;
  w.engine().init_population(s, kBase);
  EXPECT_EQ(s.history.size(), 1u);
  EXPECT_EQ(w.log.size(), 0u);
}

TEST(Search, InvalidBaseIsFatal) {
  World w(always_pass());
  SearchState s;
  EXPECT_THROW(w.engine().init_population(s, "no descriptor"), Error);
  EXPECT_THROW(w.engine().init_population(s, model(8, 64)), Error);
}

TEST(Search, FailedSlotsAreLogged) {
  World w([](const ChatRequest&, std::uint64_t) { return fenced("class Network:\n    pass\n"); });
  SearchState s;
  w.engine().init_population(s, kBase);
  EXPECT_EQ(s.history.size(), 1u);
  ASSERT_EQ(s.failures.size(), 8u);
  for (const auto& f : s.failures) {
    EXPECT_EQ(f.reason, "compile");
    EXPECT_TRUE(f.terminal);
    EXPECT_EQ(f.parent_id, "base");
  }
}

TEST(Search, FullGenerationAllPass) {
  World w(always_pass());
  SearchState s;
  auto engine = w.engine();
  engine.init_population(s, kBase);
  engine.run_generation(s, 1);
  EXPECT_EQ(s.history.size(), 9u + 24u);
  EXPECT_EQ(s.planned_slots, 32u);
  EXPECT_TRUE(s.failures.empty());
  std::size_t fair = 0, pareto = 0, chain = 0;
  for (const auto& e : s.history.entries()) {
    if (e.candidate.generation != 1) continue;
    fair += e.candidate.stage == Stage::fair;
    pareto += e.candidate.stage == Stage::pareto;
    chain += e.candidate.stage == Stage::llm_iter;
  }
  EXPECT_EQ(fair, 8u);
  EXPECT_EQ(pareto, 8u);
  EXPECT_EQ(chain, 8u);
  EXPECT_THROW(engine.run_generation(s, 3), InvariantError);
}

TEST(Search, StagesAreBarriers) {
  World w(always_pass());
  w.config.workers = 8;
  SearchState s;
  auto engine = w.engine();
  engine.init_population(s, kBase);
  engine.run_generation(s, 1);
  // Every exchange of a stage precedes every exchange of the next stage.
  int last_stage = 0;
  for (const auto& ex : w.log.exchanges()) {
    int stage = 0;
    if (ex.stream.find(".fair.") != std::string::npos) stage = 1;
    if (ex.stream.find(".pareto.") != std::string::npos) stage = 2;
    if (ex.stream.find(".llm.") != std::string::npos) stage = 3;
    EXPECT_GE(stage, last_stage) << ex.stream;
    last_stage = stage;
  }
  EXPECT_EQ(last_stage, 3);
}

TEST(Search, ChainsStopAtFirstFailure) {
  World w([](const ChatRequest& r, std::uint64_t seq) -> std::string {
    if (r.stream.ends_with(".s1")) return fenced("broken");
    return always_pass()(r, seq);
  });
  SearchState s;
  auto engine = w.engine();
  engine.init_population(s, kBase);
  engine.run_generation(s, 1);
  std::size_t stopped = 0;
  for (const auto& f : s.failures) stopped += f.reason == "chain-stopped";
  EXPECT_EQ(stopped, 4u);
  EXPECT_EQ(s.history.size(), 9u + 16u);
  EXPECT_EQ(s.history.size(), 1 + s.planned_slots - terminal_failures(s));
  for (const auto& ex : w.log.exchanges()) EXPECT_FALSE(ex.stream.ends_with(".s2"));
}

TEST(Search, ChainFromBaseFallsBackToFairIdea) {
  World w(always_pass());
  w.config.k0 = 0;
  w.config.k1 = 0;
  w.config.k2 = 0;
  w.config.k3 = 1;
  SearchState s;
  auto engine = w.engine();
  engine.init_population(s, kBase);
  engine.run_generation(s, 1);
  ASSERT_EQ(s.history.size(), 3u);
  const auto ex = w.log.exchanges();
  ASSERT_EQ(ex.size(), 4u);
  EXPECT_EQ(ex[0].stream, "g1.llm.00.s1");
  EXPECT_EQ(ex[0].system, PromptLibrary::builtin().text("common-mutation.system"));
  EXPECT_EQ(ex[2].stream, "g1.llm.00.s2");
  EXPECT_FALSE(ex[2].system);
  const auto& first = s.history.at(1);
  const bool improved = first.val_accuracy > s.history.at(0).val_accuracy;
  EXPECT_NE(ex[2].user.find(improved ? "has improved the performance" : "with degraded performance"),
            std::string::npos);
  EXPECT_NE(ex[2].user.find("Parent model: " + kBase + "\n\nMutated model: " +
                            first.candidate.source),
            std::string::npos);
  EXPECT_EQ(s.history.at(2).candidate.parent_id, std::optional<std::string>("g1.llm.00.s1"));
}

TEST(Search, NoParetoStage) {
  World w(always_pass());
  w.config.k2 = 0;
  SearchState s;
  auto engine = w.engine();
  engine.init_population(s, kBase);
  engine.run_generation(s, 1);
  for (const auto& e : s.history.entries()) EXPECT_NE(e.candidate.stage, Stage::pareto);
  EXPECT_EQ(s.history.size(), 9u + 16u);
}

TEST(Search, ZeroGenerations) {
  World w(always_pass());
  w.config.generations = 0;
  SearchState s;
  const auto best = w.engine().run_search(s, kBase);
  EXPECT_EQ(s.history.size(), 9u);
  EXPECT_EQ(s.completed_generation, 0);
  EXPECT_EQ(best, best_entry(s.history));
}

TEST(Search, BestIsHighestAccuracy) {
  World w(make_synthetic_responder(3));
  SearchState s;
  int observed = 0;
  const auto best = w.engine().run_search(s, kBase, [&](const SearchState&) { ++observed; });
  EXPECT_EQ(observed, 4);
  for (const auto& e : s.history.entries()) EXPECT_LE(e.val_accuracy, s.history.at(best).val_accuracy);
  EXPECT_EQ(s.history.size(), 1 + s.planned_slots - terminal_failures(s));
}

TEST(Search, WorkerCountDoesNotChangeResults) {
  auto run = [](std::size_t workers) {
    World w(make_synthetic_responder(11));
    w.config.workers = workers;
    SearchState s;
    w.engine().run_search(s, kBase);
    return s;
  };
  const auto a = run(1);
  const auto b = run(8);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history.at(i).candidate.id, b.history.at(i).candidate.id);
    EXPECT_EQ(a.history.at(i).candidate.source, b.history.at(i).candidate.source);
    EXPECT_EQ(a.history.at(i).val_accuracy, b.history.at(i).val_accuracy);
  }
  ASSERT_EQ(a.failures.size(), b.failures.size());
  for (std::size_t i = 0; i < a.failures.size(); ++i) {
    EXPECT_EQ(a.failures[i].slot, b.failures[i].slot);
    EXPECT_EQ(a.failures[i].reason, b.failures[i].reason);
  }
  EXPECT_EQ(a.generated_candidates, b.generated_candidates);
}

TEST(Search, DisabledBudgetVerifierLeavesGuardInCharge) {
  World w([](const ChatRequest& r, std::uint64_t) -> std::string {
    if (is_verify_prompt(r)) return "##response##yes";
    return fenced(model(6, 64));
  });
  w.config.verifiers.budget = false;
  SearchState s;
  w.engine().init_population(s, kBase);
  EXPECT_EQ(s.history.size(), 1u);
  ASSERT_EQ(s.failures.size(), 8u);
  for (const auto& f : s.failures) {
    EXPECT_EQ(f.reason, "invalid");
    EXPECT_EQ(f.message, "over budget");
  }
}

TEST(ParallelFor, RunsEveryIndexAndRethrows) {
  std::vector<int> hits(100, 0);
  parallel_for(100, 7, [&](std::size_t i) { ++hits[i]; });
  EXPECT_EQ(std::count(hits.begin(), hits.end(), 1), 100);
  EXPECT_THROW(parallel_for(10, 4, [](std::size_t i) {
                 if (i == 5) throw Error("x");
               }),
               Error);
}
