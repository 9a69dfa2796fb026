#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace archevo {

using SlotMap = std::map<std::string, std::string, std::less<>>;

// Substitutes every `{name}` whose name is an identifier. Substituted values
// are inserted literally and never re-scanned. Braces that do not enclose an
// identifier are kept as-is. Throws Error when a template slot has no value.
std::string render_template(std::string_view tmpl, const SlotMap& slots);

// Identifiers of all `{name}` slots in a template, in order of appearance.
std::vector<std::string> template_slots(std::string_view tmpl);

// Verbatim prompt templates keyed by name. Each template is one file
// `<name>.txt`; a single trailing newline is not part of the template.
// List templates hold one item per non-empty line.
class PromptLibrary {
 public:
  // Templates compiled into the binary from the repository's prompts/ dir.
  static const PromptLibrary& builtin();
  // Built-in templates overridden by any `<name>.txt` found in `dir`.
  static PromptLibrary from_directory(const std::filesystem::path& dir);

  bool contains(std::string_view name) const;
  const std::string& text(std::string_view name) const;
  std::vector<std::string> list(std::string_view name) const;
  std::string render(std::string_view name, const SlotMap& slots) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

namespace detail {
const std::vector<std::pair<std::string, std::string>>& builtin_prompt_files();
}

}  // namespace archevo
