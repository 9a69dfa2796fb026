#include <gtest/gtest.h>

#include <cmath>

#include "archevo/evaluation.hpp"
#include "test_support.hpp"

using namespace archevo;
using archevo::testing::model;

TEST(Descriptor, ParsesFirstMarkerLine) {
  const auto d = parse_descriptor("import torch\n  #SURROGATE depth=3 width=16 tags=attn,SE\n");
  ASSERT_TRUE(d);
  EXPECT_EQ(d->depth, 3);
  EXPECT_EQ(d->width, 16);
  EXPECT_EQ(d->tags, (std::vector<std::string>{"attn", "se"}));

  const auto no_tags = parse_descriptor("#SURROGATE width=4 depth=2");
  ASSERT_TRUE(no_tags);
  EXPECT_TRUE(no_tags->tags.empty());
}

TEST(Descriptor, Errors) {
  std::string error;
  EXPECT_FALSE(parse_descriptor("class Network: pass", &error));
  EXPECT_EQ(error, "missing descriptor");
  for (const char* bad : {"#SURROGATE depth=1 width=4", "#SURROGATE depth=2 width=0",
                          "#SURROGATE depth=x width=4", "#SURROGATE depth=2",
                          "#SURROGATE depth=2 width=4 depth=3", "#SURROGATEdepth=2 width=4",
                          "#SURROGATE depth=2 width=4 colour=red"}) {
    error.clear();
    EXPECT_FALSE(parse_descriptor(bad, &error)) << bad;
    EXPECT_EQ(error, "malformed descriptor") << bad;
  }
  // A later well-formed line does not rescue a malformed first one.
  EXPECT_FALSE(parse_descriptor("#SURROGATE depth=1 width=4\n#SURROGATE depth=2 width=4\n"));
}

TEST(Descriptor, FormatRoundTrip) {
  const SurrogateDescriptor d{4, 32, {"dwconv", "mlp"}};
  const auto back = parse_descriptor(format_descriptor(d));
  ASSERT_TRUE(back);
  EXPECT_EQ(back->depth, 4);
  EXPECT_EQ(back->tags, d.tags);
  const auto rendered = parse_descriptor(model(5, 8, {"se"}));
  ASSERT_TRUE(rendered);
  EXPECT_EQ(rendered->depth, 5);
}

TEST(Surrogate, Arithmetic) {
  const auto small = SurrogateEvaluator::budgets_of({2, 16, {}});
  EXPECT_EQ(small.params, 32768.0);
  EXPECT_EQ(small.flops, 33554432.0);
  EXPECT_NEAR(SurrogateEvaluator::val_accuracy_of({2, 16, {}}), 11.7503, 1e-3);
  EXPECT_EQ(SurrogateEvaluator::budgets_of({6, 64, {}}).params, 1572864.0);
}

TEST(Surrogate, BonusCountsDistinctKnownTags) {
  const double base = 100.0 * (1.0 - std::exp(-3.0 * 16.0 / 256.0));
  EXPECT_DOUBLE_EQ(SurrogateEvaluator::val_accuracy_of({3, 16, {"attn", "attn", "foo"}}), base * 1.01);
  EXPECT_DOUBLE_EQ(SurrogateEvaluator::val_accuracy_of({3, 16, {"attn", "se", "dwconv", "mlp"}}),
                   base * 1.04);
  EXPECT_EQ(SurrogateEvaluator::val_accuracy_of({64, 512, {"attn"}}), 99.0);
}

TEST(Surrogate, AccuracyGrowsWithCapacity) {
  double prev_depth = 0.0;
  for (int depth = 2; depth <= 12; ++depth) {
    double prev_width = 0.0;
    for (int width = 1; width <= 128; width *= 2) {
      const double acc = SurrogateEvaluator::val_accuracy_of({depth, width, {}});
      EXPECT_GT(acc, prev_width);
      prev_width = acc;
    }
    const double acc = SurrogateEvaluator::val_accuracy_of({depth, 16, {}});
    EXPECT_GT(acc, prev_depth);
    prev_depth = acc;
  }
}

TEST(Surrogate, EqualParamsFavourDepthTimesWidth) {
  std::vector<SurrogateDescriptor> grid;
  for (int depth = 2; depth <= 8; ++depth) {
    for (int width : {8, 16, 32, 64}) grid.push_back({depth, width, {}});
  }
  int pairs = 0;
  for (const auto& a : grid) {
    for (const auto& b : grid) {
      if (SurrogateEvaluator::budgets_of(a).params != SurrogateEvaluator::budgets_of(b).params) continue;
      if (a.depth * a.width <= b.depth * b.width) continue;
      ++pairs;
      EXPECT_GT(SurrogateEvaluator::val_accuracy_of(a), SurrogateEvaluator::val_accuracy_of(b));
    }
  }
  EXPECT_GT(pairs, 0);
}

TEST(Surrogate, EvaluatorInterface) {
  SurrogateEvaluator ev;
  EXPECT_TRUE(ev.check_compile(model(3, 16)).ok);
  EXPECT_EQ(ev.check_compile("print(1)").error, "missing descriptor");
  EXPECT_EQ(ev.measure_budgets(model(3, 16)).params, 3.0 * 256 * 64);
  EXPECT_THROW(ev.measure_budgets("x"), EvaluatorError);

  const auto ok = ev.train_eval(model(2, 16));
  EXPECT_TRUE(ok.valid);
  EXPECT_TRUE(ok.well_formed());
  EXPECT_NEAR(*ok.test_accuracy, *ok.val_accuracy - 0.3, 1e-12);
  const auto bad = ev.train_eval("#SURROGATE depth=0 width=1");
  EXPECT_FALSE(bad.valid);
  EXPECT_TRUE(bad.well_formed());
  EXPECT_EQ(bad.compile_error, std::optional<std::string>("malformed descriptor"));
}

TEST(BudgetLabels, Lookup) {
  const BudgetReport r{1.0, 2.0};
  EXPECT_EQ(budget_value(r, "params"), 1.0);
  EXPECT_EQ(budget_value(r, "flops"), 2.0);
  EXPECT_THROW(budget_value(r, "latency"), InvariantError);
  EXPECT_TRUE(is_budget_label("flops"));
  EXPECT_FALSE(is_budget_label("memory"));
}

TEST(StructureJudge, Verdicts) {
  const std::string parent = model(3, 16);
  const std::string child = model(4, 16);
  ScriptedGateway llm;
  llm.push("v", "Both hold.\n##response##Yes.");
  llm.push("v", "**response**no");
  llm.push("v", "I think it is fine.");
  llm.push("v", "no marker");
  EXPECT_TRUE(judge_structure(parent, child, llm, "v").yes);
  const auto no = judge_structure(parent, child, llm, "v");
  EXPECT_FALSE(no.yes);
  EXPECT_FALSE(no.fallback);
  const auto unparsable = judge_structure(parent, child, llm, "v");
  EXPECT_FALSE(unparsable.yes);
  EXPECT_TRUE(unparsable.fallback);
  EXPECT_EQ(unparsable.reason, "verdict unparsable");
  std::string respaced = parent;
  respaced.insert(respaced.find("class Block"), "\n\n   ");
  const auto copy = judge_structure(parent, respaced, llm, "v");
  EXPECT_FALSE(copy.yes);
  EXPECT_NE(copy.reason.find("identical"), std::string::npos);
}

TEST(StructureJudge, PromptCarriesBothModels) {
  ScriptedGateway llm;
  TranscriptLog log;
  llm.set_transcript(&log);
  llm.push("v", "##response##yes");
  judge_structure("PARENT_SRC", "CHILD_SRC", llm, "v");
  const auto ex = log.exchanges().at(0);
  EXPECT_FALSE(ex.system);
  EXPECT_LT(ex.user.find("Target model: CHILD_SRC"), ex.user.find("Parent model: PARENT_SRC"));
}
