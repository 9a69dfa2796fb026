#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "archevo/attribute_tree.hpp"
#include "archevo/common.hpp"
#include "archevo/prompts.hpp"

namespace archevo {

inline constexpr std::size_t kMaxIdeaWords = 50;

struct IdeaTag {
  Target target = Target::performance;
  Granularity granularity = Granularity::operation;
  std::string main_category;
  std::optional<std::string> sub_category;

  friend bool operator==(const IdeaTag&, const IdeaTag&) = default;
};

struct DesignIdea {
  std::string id;
  std::string text;
  IdeaTag tag;
  std::string source_paper;

  friend bool operator==(const DesignIdea&, const DesignIdea&) = default;
};

// Content hash of (text, tag, source_paper); re-ingesting the same idea
// yields the same id.
std::string make_idea_id(std::string_view text, const IdeaTag& tag, std::string_view source_paper);

// Truncates to kMaxIdeaWords words. `truncated` reports whether it did.
std::string cap_idea_words(std::string_view text, bool* truncated = nullptr);

class NoIdeasError : public Error {
 public:
  using Error::Error;
};

struct CategoryKey {
  Target target;
  std::string main_category;

  friend auto operator<=>(const CategoryKey&, const CategoryKey&) = default;
};

// Tagged idea store with a (target, main category) index. Immutable once
// ingestion finishes; concurrent const access is safe.
class KnowledgeDB {
 public:
  explicit KnowledgeDB(AttributeTree tree);

  const AttributeTree& tree() const { return tree_; }

  // Validates the tag against the tree, normalizes names, caps text length
  // and fills in the id. Returns false for an idea already present.
  // Throws InvariantError for empty text or an unresolvable tag.
  bool add(DesignIdea idea);

  std::size_t size() const { return ideas_.size(); }
  const std::vector<DesignIdea>& ideas() const { return ideas_; }
  const DesignIdea* find(std::string_view id) const;

  // Categories holding at least one idea, optionally for one target only.
  std::vector<CategoryKey> categories(std::optional<Target> target = std::nullopt) const;
  const std::vector<std::size_t>& ideas_in(const CategoryKey& key) const;
  bool has_ideas(Target target) const;

  // Throws CorruptionError if the index does not cover the ideas exactly.
  void check_index() const;

  static KnowledgeDB load_jsonl(AttributeTree tree, const std::filesystem::path& path);
  void save_jsonl(const std::filesystem::path& path) const;
  std::string to_jsonl() const;

 private:
  AttributeTree tree_;
  std::vector<DesignIdea> ideas_;
  std::map<CategoryKey, std::vector<std::size_t>> index_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
};

// Two-stage draw: uniform over non-empty main categories (of `target`, or
// of both targets when nullopt), then uniform within the chosen category.
const DesignIdea& fair_sample(const KnowledgeDB& db, std::optional<Target> target, Rng& rng);

enum class TargetMixture { equal, pooled };

// Picks the target for one fair-sampling draw. `equal` flips a fair coin
// between targets that hold ideas; `pooled` returns nullopt so every main
// category of both targets competes on equal footing.
std::optional<Target> choose_target(const KnowledgeDB& db, TargetMixture mixture, Rng& rng);

enum class TemplateKind { new_module, modify_module, network_level };
std::string_view to_string(TemplateKind kind);

struct MutationDirective {
  DesignIdea idea;
  TemplateKind template_kind;
  std::string rendered_instruction;
};

// Operation / block granularity: new-module or modify-module with equal
// probability. Network granularity: always network-level.
MutationDirective make_directive(const DesignIdea& idea, Rng& rng,
                                 const PromptLibrary& prompts = PromptLibrary::builtin());

}  // namespace archevo
