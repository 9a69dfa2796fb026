#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "archevo/attribute_tree.hpp"
#include "archevo/knowledge.hpp"
#include "archevo/llm_gateway.hpp"
#include "archevo/prompts.hpp"

namespace archevo {

struct ReferenceModel {
  std::string name;
  std::string source;
};

struct TreeBuildResult {
  AttributeTree tree;
  std::vector<std::string> warnings;
};

// One (granularity, main category, sub-categories) triple of a parsed
// attribute-structuring answer.
struct AttributeListing {
  Granularity granularity;
  std::string main_category;
  std::vector<std::string> sub_categories;
};

struct ParsedAttributes {
  std::map<Target, std::vector<AttributeListing>> by_target;
};

// Parses the **Performance** / **Efficiency** blocks of an attribute
// structuring answer. Returns nullopt when neither block is present.
std::optional<ParsedAttributes> parse_attribute_response(std::string_view response);

// Queries each reference model and merges the sub-categories it names into
// the template. Main categories and granularities are never added or
// removed; unknown ones are reported as warnings.
TreeBuildResult build_attribute_tree(const AttributeTree& tmpl,
                                     std::span<const ReferenceModel> references, ChatGateway& llm,
                                     const PromptLibrary& prompts = PromptLibrary::builtin());

struct Classification {
  bool keep = false;
  IdeaTag tag;
};

// Throws ParseError for a malformed or unresolvable ##response## payload.
Classification classify_abstract(std::string_view title, std::string_view abstract,
                                 const AttributeTree& tree, ChatGateway& llm,
                                 const std::string& stream,
                                 const PromptLibrary& prompts = PromptLibrary::builtin());

// Bullet or numbered list items of an extraction answer.
std::vector<std::string> parse_idea_list(std::string_view response);

// One idea per bullet, all tagged with `tag`. Over-long ideas are truncated
// and reported through `warnings`.
std::vector<DesignIdea> extract_ideas(std::string_view paper_text, const IdeaTag& tag,
                                      const std::string& source_paper, const AttributeTree& tree,
                                      ChatGateway& llm, const std::string& stream,
                                      std::vector<std::string>* warnings = nullptr,
                                      const PromptLibrary& prompts = PromptLibrary::builtin());

struct CorpusPaper {
  std::string id;
  std::string title;
  std::string abstract;
  std::string body;
};

// Line 1: title; line 2: blank; then "# ABSTRACT", the abstract, "# BODY",
// and the body.
CorpusPaper parse_corpus_paper(std::string id, std::string_view text);
// Every regular file of `dir`, sorted by file name; the id is the file stem.
std::vector<CorpusPaper> load_corpus(const std::filesystem::path& dir);

struct ExtractionStats {
  std::size_t papers = 0;
  std::size_t kept = 0;
  std::size_t discarded = 0;
  std::size_t failed = 0;
  std::size_t ideas = 0;
  std::map<CategoryKey, std::size_t> ideas_per_category;
  std::vector<std::string> log;
};

// Filter then extract over a corpus. Per-paper failures are logged and
// skipped; a classification parse error is retried once before discarding.
ExtractionStats run_extraction(std::span<const CorpusPaper> corpus, KnowledgeDB& db,
                               ChatGateway& llm,
                               const PromptLibrary& prompts = PromptLibrary::builtin());

}  // namespace archevo
