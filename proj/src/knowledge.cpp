#include "archevo/knowledge.hpp"

#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

namespace archevo {

using ordered_json = nlohmann::ordered_json;

std::string make_idea_id(std::string_view text, const IdeaTag& tag, std::string_view source_paper) {
  std::string key;
  key.append(text).push_back('\x1f');
  key.append(to_string(tag.target)).push_back('\x1f');
  key.append(to_string(tag.granularity)).push_back('\x1f');
  key.append(tag.main_category).push_back('\x1f');
  key.append(tag.sub_category.value_or("")).push_back('\x1f');
  key.append(source_paper);
  return to_hex(fnv1a64(key));
}

std::string cap_idea_words(std::string_view text, bool* truncated) {
  std::istringstream in{std::string(text)};
  std::string word;
  std::string out;
  std::size_t n = 0;
  bool cut = false;
  while (in >> word) {
    if (n == kMaxIdeaWords) {
      cut = true;
      break;
    }
    if (!out.empty()) out.push_back(' ');
    out += word;
    ++n;
  }
  if (truncated) *truncated = cut;
  return cut ? out : collapse_whitespace(text);
}

KnowledgeDB::KnowledgeDB(AttributeTree tree) : tree_(std::move(tree)) { tree_.validate(); }

bool KnowledgeDB::add(DesignIdea idea) {
  idea.text = cap_idea_words(idea.text);
  if (idea.text.empty()) throw InvariantError("design idea text is empty");
  idea.tag.main_category = normalize_name(idea.tag.main_category);
  if (idea.tag.sub_category) {
    idea.tag.sub_category = normalize_name(*idea.tag.sub_category);
    if (idea.tag.sub_category->empty()) idea.tag.sub_category.reset();
  }
  if (!tree_.resolves(idea.tag.target, idea.tag.granularity, idea.tag.main_category,
                      idea.tag.sub_category)) {
    throw InvariantError("design idea tag " + std::string(to_string(idea.tag.target)) + "*" +
                         std::string(to_string(idea.tag.granularity)) + "*" +
                         idea.tag.main_category + "*" + idea.tag.sub_category.value_or("") +
                         " does not resolve against the attribute tree");
  }
  idea.id = make_idea_id(idea.text, idea.tag, idea.source_paper);
  if (by_id_.count(idea.id)) return false;
  const std::size_t pos = ideas_.size();
  by_id_.emplace(idea.id, pos);
  index_[CategoryKey{idea.tag.target, idea.tag.main_category}].push_back(pos);
  ideas_.push_back(std::move(idea));
  return true;
}

const DesignIdea* KnowledgeDB::find(std::string_view id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &ideas_[it->second];
}

std::vector<CategoryKey> KnowledgeDB::categories(std::optional<Target> target) const {
  std::vector<CategoryKey> keys;
  for (const auto& [key, members] : index_) {
    if (members.empty()) continue;
    if (target && key.target != *target) continue;
    keys.push_back(key);
  }
  return keys;
}

const std::vector<std::size_t>& KnowledgeDB::ideas_in(const CategoryKey& key) const {
  static const std::vector<std::size_t> empty;
  auto it = index_.find(key);
  return it == index_.end() ? empty : it->second;
}

bool KnowledgeDB::has_ideas(Target target) const { return !categories(target).empty(); }

void KnowledgeDB::check_index() const {
  std::vector<int> seen(ideas_.size(), 0);
  for (const auto& [key, members] : index_) {
    for (std::size_t pos : members) {
      if (pos >= ideas_.size()) throw CorruptionError("knowledge index holds a dangling entry");
      const auto& tag = ideas_[pos].tag;
      if (tag.target != key.target || tag.main_category != key.main_category) {
        throw CorruptionError("knowledge index files idea " + ideas_[pos].id +
                              " under the wrong category");
      }
      ++seen[pos];
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] != 1) {
      throw CorruptionError("knowledge index covers idea " + ideas_[i].id + " " +
                            std::to_string(seen[i]) + " times");
    }
  }
}

namespace {

ordered_json idea_to_json(const DesignIdea& idea) {
  ordered_json j;
  j["id"] = idea.id;
  j["text"] = idea.text;
  j["target"] = std::string(to_string(idea.tag.target));
  j["granularity"] = std::string(to_string(idea.tag.granularity));
  j["main_category"] = idea.tag.main_category;
  j["sub_category"] = idea.tag.sub_category ? ordered_json(*idea.tag.sub_category) : ordered_json();
  j["source_paper"] = idea.source_paper;
  return j;
}

}  // namespace

std::string KnowledgeDB::to_jsonl() const {
  std::string out;
  for (const auto& idea : ideas_) {
    out += idea_to_json(idea).dump();
    out.push_back('\n');
  }
  return out;
}

void KnowledgeDB::save_jsonl(const std::filesystem::path& path) const {
  write_text_file(path, to_jsonl());
}

KnowledgeDB KnowledgeDB::load_jsonl(AttributeTree tree, const std::filesystem::path& path) {
  KnowledgeDB db(std::move(tree));
  const auto lines = split_lines(read_text_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::size_t line_no = i + 1;
    ordered_json j;
    try {
      j = ordered_json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string() + ": " + e.what(), line_no, e.byte);
    }
    try {
      DesignIdea idea;
      auto target = parse_target(j.at("target").get<std::string>());
      auto granularity = parse_granularity(j.at("granularity").get<std::string>());
      if (!target || !granularity) throw InvariantError("unknown target or granularity");
      idea.tag.target = *target;
      idea.tag.granularity = *granularity;
      idea.tag.main_category = j.at("main_category").get<std::string>();
      if (j.contains("sub_category") && j["sub_category"].is_string()) {
        idea.tag.sub_category = j["sub_category"].get<std::string>();
      }
      idea.text = j.at("text").get<std::string>();
      idea.source_paper = j.value("source_paper", std::string());
      db.add(std::move(idea));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), line_no, 1);
    } catch (const InvariantError& e) {
      throw InvariantError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return db;
}

const DesignIdea& fair_sample(const KnowledgeDB& db, std::optional<Target> target, Rng& rng) {
  const auto cats = db.categories(target);
  if (cats.empty()) {
    throw NoIdeasError(target ? "no ideas for target '" + std::string(to_string(*target)) + "'"
                              : std::string("knowledge database holds no ideas"));
  }
  const auto& members = db.ideas_in(cats[rng.uniform_index(cats.size())]);
  return db.ideas()[members[rng.uniform_index(members.size())]];
}

std::optional<Target> choose_target(const KnowledgeDB& db, TargetMixture mixture, Rng& rng) {
  if (mixture == TargetMixture::pooled) return std::nullopt;
  std::vector<Target> available;
  for (Target t : kTargets) {
    if (db.has_ideas(t)) available.push_back(t);
  }
  if (available.empty()) throw NoIdeasError("knowledge database holds no ideas");
  return available[rng.uniform_index(available.size())];
}

std::string_view to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::new_module:
      return "new-module";
    case TemplateKind::modify_module:
      return "modify-module";
    case TemplateKind::network_level:
      return "network-level";
  }
  return "";
}

MutationDirective make_directive(const DesignIdea& idea, Rng& rng, const PromptLibrary& prompts) {
  TemplateKind kind = TemplateKind::network_level;
  if (idea.tag.granularity != Granularity::network) {
    kind = rng.uniform_index(2) == 0 ? TemplateKind::new_module : TemplateKind::modify_module;
  }
  const std::string name = "target-" + std::string(to_string(kind));
  return MutationDirective{idea, kind, prompts.render(name, {{"idea", idea.text}})};
}

}  // namespace archevo
