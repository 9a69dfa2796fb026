#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace archevo {

enum class Target { performance, efficiency };
enum class Granularity { operation, block_connectivity, network };

inline constexpr std::array<Target, 2> kTargets = {Target::performance, Target::efficiency};
inline constexpr std::array<Granularity, 3> kGranularities = {
    Granularity::operation, Granularity::block_connectivity, Granularity::network};

std::string_view to_string(Target target);
// Label used in files and prompts: "operation level", ...
std::string_view to_string(Granularity granularity);
std::optional<Target> parse_target(std::string_view text);
// Accepts "operation", "operation level", "block-and-connectivity",
// "block and connectivity level", "network", ... in any case.
std::optional<Granularity> parse_granularity(std::string_view text);

struct MainCategory {
  std::string name;
  std::vector<std::string> sub_categories;
};

struct GranularityLevel {
  Granularity granularity;
  std::vector<MainCategory> categories;
};

// Three-level design-attribute hierarchy per target:
// granularity -> main category -> sub-category.
class AttributeTree {
 public:
  AttributeTree();

  std::array<GranularityLevel, 3>& levels(Target target);
  const std::array<GranularityLevel, 3>& levels(Target target) const;

  // Lookups normalize `main` / `sub` before comparing.
  const MainCategory* find_main(Target target, std::string_view main) const;
  std::optional<Granularity> granularity_of(Target target, std::string_view main) const;
  bool resolves(Target target, Granularity granularity, std::string_view main,
                const std::optional<std::string>& sub) const;

  // Adds a normalized sub-category unless present. Returns true if added.
  // Throws InvariantError if the main category is absent.
  bool add_sub_category(Target target, Granularity granularity, std::string_view main,
                        std::string_view sub);

  std::size_t main_category_count() const;
  std::size_t main_category_count(Target target) const;
  std::size_t sub_category_count() const;

  // Throws InvariantError naming the offending node.
  void validate() const;

  // Indented listing used in prompt slots:
  //   operation level:
  //       feature extraction operators: [attention, mlp]
  std::string render_for_prompt(Target target) const;

  friend bool operator==(const AttributeTree&, const AttributeTree&);

 private:
  std::array<std::array<GranularityLevel, 3>, 2> levels_;
};

bool operator==(const MainCategory& a, const MainCategory& b);
bool operator==(const GranularityLevel& a, const GranularityLevel& b);

// JSON document: {"performance": {"operation level": {"main": ["sub", ...]}}, ...}.
// Names are normalized on load. Throws ParseError (with line/column) or
// InvariantError.
AttributeTree load_attribute_tree(std::string_view document);
AttributeTree load_attribute_tree_file(const std::filesystem::path& path);
// Canonical form: two-space indented JSON followed by a newline.
std::string serialize_attribute_tree(const AttributeTree& tree);

}  // namespace archevo
