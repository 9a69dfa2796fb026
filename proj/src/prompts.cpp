#include "archevo/prompts.hpp"

#include <cctype>

#include "archevo/common.hpp"

namespace archevo {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Length of the identifier slot starting at tmpl[pos] == '{', or 0.
std::size_t slot_length(std::string_view tmpl, std::size_t pos) {
  std::size_t i = pos + 1;
  if (i >= tmpl.size() || !is_ident_start(tmpl[i])) return 0;
  while (i < tmpl.size() && is_ident_char(tmpl[i])) ++i;
  if (i >= tmpl.size() || tmpl[i] != '}') return 0;
  return i - pos + 1;
}

std::string strip_final_newline(std::string text) {
  if (!text.empty() && text.back() == '\n') text.pop_back();
  return text;
}

}  // namespace

std::string render_template(std::string_view tmpl, const SlotMap& slots) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    std::size_t open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    std::size_t len = slot_length(tmpl, open);
    if (len == 0) {
      out.push_back('{');
      pos = open + 1;
      continue;
    }
    std::string_view name = tmpl.substr(open + 1, len - 2);
    auto it = slots.find(name);
    if (it == slots.end()) throw Error("prompt slot '{" + std::string(name) + "}' has no value");
    out.append(it->second);
    pos = open + len;
  }
  return out;
}

std::vector<std::string> template_slots(std::string_view tmpl) {
  std::vector<std::string> names;
  for (std::size_t pos = tmpl.find('{'); pos != std::string_view::npos;
       pos = tmpl.find('{', pos + 1)) {
    if (std::size_t len = slot_length(tmpl, pos); len > 0) {
      names.emplace_back(tmpl.substr(pos + 1, len - 2));
    }
  }
  return names;
}

const PromptLibrary& PromptLibrary::builtin() {
  static const PromptLibrary lib = [] {
    PromptLibrary l;
    for (const auto& [name, content] : detail::builtin_prompt_files()) {
      l.templates_.emplace(name, strip_final_newline(content));
    }
    return l;
  }();
  return lib;
}

PromptLibrary PromptLibrary::from_directory(const std::filesystem::path& dir) {
  PromptLibrary lib = builtin();
  if (!std::filesystem::is_directory(dir)) {
    throw Error("prompt directory '" + dir.string() + "' does not exist");
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (!entry.is_regular_file() || p.extension() != ".txt") continue;
    std::string name = p.filename().string();
    name.resize(name.size() - 4);
    lib.templates_[name] = strip_final_newline(read_text_file(p));
  }
  return lib;
}

bool PromptLibrary::contains(std::string_view name) const {
  return templates_.find(name) != templates_.end();
}

const std::string& PromptLibrary::text(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw Error("unknown prompt template '" + std::string(name) + "'");
  return it->second;
}

std::vector<std::string> PromptLibrary::list(std::string_view name) const {
  std::vector<std::string> items;
  for (auto& line : split_lines(text(name))) {
    if (!trim(line).empty()) items.push_back(std::move(line));
  }
  return items;
}

std::string PromptLibrary::render(std::string_view name, const SlotMap& slots) const {
  return render_template(text(name), slots);
}

std::vector<std::string> PromptLibrary::names() const {
  std::vector<std::string> out;
  out.reserve(templates_.size());
  for (const auto& [name, _] : templates_) out.push_back(name);
  return out;
}

}  // namespace archevo
