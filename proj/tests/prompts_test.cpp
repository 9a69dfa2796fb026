#include <gtest/gtest.h>

#include "archevo/common.hpp"
#include "archevo/prompts.hpp"
#include "test_support.hpp"

using namespace archevo;

TEST(RenderTemplate, SubstitutesSlots) {
  EXPECT_EQ(render_template("a {x} b {y}", {{"x", "1"}, {"y", "2"}}), "a 1 b 2");
}

TEST(RenderTemplate, ValuesAreNotRescanned) {
  // A value that looks like a slot stays literal.
  EXPECT_EQ(render_template("{idea}!", {{"idea", "use {parent_model_code} and {}"}}),
            "use {parent_model_code} and {}!");
}

TEST(RenderTemplate, NonIdentifierBracesAreLiteral) {
  EXPECT_EQ(render_template("{\n  x: {}\n} {1a}", {}), "{\n  x: {}\n} {1a}");
}

TEST(RenderTemplate, MissingSlotThrows) {
  EXPECT_THROW(render_template("{missing}", {}), Error);
}

TEST(TemplateSlots, ListsIdentifiersInOrder) {
  const auto s = template_slots("{a} {b} { c } {a}");
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0], "a");
  EXPECT_EQ(s[1], "b");
  EXPECT_EQ(s[2], "a");
}

TEST(PromptLibrary, BuiltinMatchesPromptFilesByteForByte) {
  const auto& lib = PromptLibrary::builtin();
  const auto names = lib.names();
  EXPECT_EQ(names.size(), 25u);
  for (const auto& name : names) {
    std::string file = read_text_file(std::filesystem::path(ARCHEVO_PROMPT_DIR) / (name + ".txt"));
    if (!file.empty() && file.back() == '\n') file.pop_back();
    EXPECT_EQ(lib.text(name), file) << name;
  }
}

TEST(PromptLibrary, TemplatesExposeTheirDocumentedSlots) {
  const auto& lib = PromptLibrary::builtin();
  EXPECT_EQ(template_slots(lib.text("common-mutation.user")),
            (std::vector<std::string>{"idea", "parent_model_code"}));
  EXPECT_EQ(template_slots(lib.text("debug.user")),
            (std::vector<std::string>{"prompt", "error", "sample_model_code", "parent_model_code"}));
  EXPECT_EQ(template_slots(lib.text("structural-verify")),
            (std::vector<std::string>{"sample_model_code", "parent_model_code"}));
  EXPECT_EQ(lib.list("refinement-ideas-upscale").size(), 4u);
  EXPECT_EQ(lib.list("refinement-ideas-hyperparam").size(), 4u);
  EXPECT_EQ(lib.list("downscale-shrink-list").size(), 4u);
}

TEST(PromptLibrary, DirectoryOverridesBuiltins) {
  archevo::testing::TempDir dir;
  write_text_file(dir / "target-network-level.txt", "Network change: {idea}\n");
  const auto lib = PromptLibrary::from_directory(dir.path());
  EXPECT_EQ(lib.render("target-network-level", {{"idea", "x"}}), "Network change: x");
  EXPECT_TRUE(lib.contains("debug.user"));
}

TEST(PromptLibrary, UnknownTemplateThrows) {
  EXPECT_THROW(PromptLibrary::builtin().text("no-such-template"), Error);
}
