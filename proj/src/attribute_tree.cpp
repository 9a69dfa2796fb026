#include "archevo/attribute_tree.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "archevo/common.hpp"

namespace archevo {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Target target) {
  return target == Target::performance ? "performance" : "efficiency";
}

std::string_view to_string(Granularity granularity) {
  switch (granularity) {
    case Granularity::operation:
      return "operation level";
    case Granularity::block_connectivity:
      return "block and connectivity level";
    case Granularity::network:
      return "network level";
  }
  return "";
}

std::optional<Target> parse_target(std::string_view text) {
  std::string t = normalize_name(text);
  if (t == "performance") return Target::performance;
  if (t == "efficiency") return Target::efficiency;
  return std::nullopt;
}

std::optional<Granularity> parse_granularity(std::string_view text) {
  std::string g = normalize_name(text);
  std::replace(g.begin(), g.end(), '-', ' ');
  if (g.size() > 6 && g.ends_with(" level")) g.resize(g.size() - 6);
  if (g == "operation") return Granularity::operation;
  if (g == "block and connectivity") return Granularity::block_connectivity;
  if (g == "network") return Granularity::network;
  return std::nullopt;
}

bool operator==(const MainCategory& a, const MainCategory& b) {
  return a.name == b.name && a.sub_categories == b.sub_categories;
}

bool operator==(const GranularityLevel& a, const GranularityLevel& b) {
  return a.granularity == b.granularity && a.categories == b.categories;
}

bool operator==(const AttributeTree& a, const AttributeTree& b) { return a.levels_ == b.levels_; }

AttributeTree::AttributeTree() {
  for (auto& per_target : levels_) {
    for (std::size_t g = 0; g < kGranularities.size(); ++g) {
      per_target[g].granularity = kGranularities[g];
    }
  }
}

std::array<GranularityLevel, 3>& AttributeTree::levels(Target target) {
  return levels_[static_cast<std::size_t>(target)];
}

const std::array<GranularityLevel, 3>& AttributeTree::levels(Target target) const {
  return levels_[static_cast<std::size_t>(target)];
}

const MainCategory* AttributeTree::find_main(Target target, std::string_view main) const {
  const std::string key = normalize_name(main);
  for (const auto& level : levels(target)) {
    for (const auto& cat : level.categories) {
      if (cat.name == key) return &cat;
    }
  }
  return nullptr;
}

std::optional<Granularity> AttributeTree::granularity_of(Target target,
                                                         std::string_view main) const {
  const std::string key = normalize_name(main);
  for (const auto& level : levels(target)) {
    for (const auto& cat : level.categories) {
      if (cat.name == key) return level.granularity;
    }
  }
  return std::nullopt;
}

bool AttributeTree::resolves(Target target, Granularity granularity, std::string_view main,
                             const std::optional<std::string>& sub) const {
  const auto& level = levels(target)[static_cast<std::size_t>(granularity)];
  const std::string key = normalize_name(main);
  auto it = std::find_if(level.categories.begin(), level.categories.end(),
                         [&](const MainCategory& c) { return c.name == key; });
  if (it == level.categories.end()) return false;
  if (!sub) return true;
  const std::string sub_key = normalize_name(*sub);
  return std::find(it->sub_categories.begin(), it->sub_categories.end(), sub_key) !=
         it->sub_categories.end();
}

bool AttributeTree::add_sub_category(Target target, Granularity granularity,
                                     std::string_view main, std::string_view sub) {
  auto& level = levels(target)[static_cast<std::size_t>(granularity)];
  const std::string key = normalize_name(main);
  auto it = std::find_if(level.categories.begin(), level.categories.end(),
                         [&](const MainCategory& c) { return c.name == key; });
  if (it == level.categories.end()) {
    throw InvariantError("no main category '" + key + "' under " + std::string(to_string(target)) +
                         "/" + std::string(to_string(granularity)));
  }
  const std::string sub_key = normalize_name(sub);
  if (sub_key.empty()) return false;
  if (std::find(it->sub_categories.begin(), it->sub_categories.end(), sub_key) !=
      it->sub_categories.end()) {
    return false;
  }
  it->sub_categories.push_back(sub_key);
  return true;
}

std::size_t AttributeTree::main_category_count(Target target) const {
  std::size_t n = 0;
  for (const auto& level : levels(target)) n += level.categories.size();
  return n;
}

std::size_t AttributeTree::main_category_count() const {
  return main_category_count(Target::performance) + main_category_count(Target::efficiency);
}

std::size_t AttributeTree::sub_category_count() const {
  std::size_t n = 0;
  for (const auto& per_target : levels_) {
    for (const auto& level : per_target) {
      for (const auto& cat : level.categories) n += cat.sub_categories.size();
    }
  }
  return n;
}

void AttributeTree::validate() const {
  for (Target target : kTargets) {
    const std::string tname(to_string(target));
    std::set<std::string> mains;
    const auto& lv = levels(target);
    for (std::size_t g = 0; g < lv.size(); ++g) {
      if (lv[g].granularity != kGranularities[g]) {
        throw InvariantError(tname + ": granularity levels out of order");
      }
      const std::string path = tname + "/" + std::string(to_string(lv[g].granularity));
      for (const auto& cat : lv[g].categories) {
        if (cat.name.empty()) throw InvariantError(path + ": empty main-category name");
        if (cat.name != normalize_name(cat.name)) {
          throw InvariantError(path + "/" + cat.name + ": name is not normalized");
        }
        if (!mains.insert(cat.name).second) {
          throw InvariantError(path + "/" + cat.name + ": duplicate main category");
        }
        std::set<std::string> subs;
        for (const auto& sub : cat.sub_categories) {
          if (sub.empty()) throw InvariantError(path + "/" + cat.name + ": empty sub-category");
          if (sub != normalize_name(sub)) {
            throw InvariantError(path + "/" + cat.name + "/" + sub + ": name is not normalized");
          }
          if (!subs.insert(sub).second) {
            throw InvariantError(path + "/" + cat.name + "/" + sub + ": duplicate sub-category");
          }
        }
      }
    }
  }
}

std::string AttributeTree::render_for_prompt(Target target) const {
  std::ostringstream out;
  bool first = true;
  for (const auto& level : levels(target)) {
    if (!first) out << '\n';
    first = false;
    out << to_string(level.granularity) << ':';
    for (const auto& cat : level.categories) {
      out << "\n    " << cat.name << ": [";
      for (std::size_t i = 0; i < cat.sub_categories.size(); ++i) {
        if (i) out << ", ";
        out << cat.sub_categories[i];
      }
      out << ']';
    }
  }
  return out.str();
}

namespace {

std::pair<std::size_t, std::size_t> line_column(std::string_view doc, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  const std::size_t end = std::min(byte == 0 ? 0 : byte - 1, doc.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (doc[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

AttributeTree load_attribute_tree(std::string_view document) {
  ordered_json doc;
  // Parsing merges repeated keys silently; track keys per open object.
  std::vector<std::set<std::string>> open_objects;
  std::vector<std::string> key_path;
  auto reject_duplicates = [&](int depth, ordered_json::parse_event_t event,
                               ordered_json& parsed) {
    using E = ordered_json::parse_event_t;
    if (event == E::object_start) {
      open_objects.emplace_back();
    } else if (event == E::object_end) {
      open_objects.pop_back();
    } else if (event == E::key) {
      const std::string key = parsed.get<std::string>();
      key_path.resize(static_cast<std::size_t>(std::max(depth - 1, 0)));
      key_path.push_back(key);
      if (!open_objects.back().insert(key).second) {
        std::string path;
        for (const auto& k : key_path) path += (path.empty() ? "" : "/") + k;
        throw InvariantError("attribute tree: duplicate entry '" + path + "'");
      }
    }
    return true;
  };
  try {
    doc = ordered_json::parse(document.begin(), document.end(), reject_duplicates);
  } catch (const nlohmann::json::parse_error& e) {
    auto [line, col] = line_column(document, e.byte);
    throw ParseError(std::string("attribute tree: ") + e.what(), line, col);
  }
  if (!doc.is_object()) throw ParseError("attribute tree: top level must be an object", 1, 1);

  AttributeTree tree;
  std::set<Target> seen_targets;
  for (const auto& [tkey, per_target] : doc.items()) {
    auto target = parse_target(tkey);
    if (!target) throw InvariantError("attribute tree: unknown target '" + tkey + "'");
    if (!seen_targets.insert(*target).second) {
      throw InvariantError("attribute tree: duplicate target '" + tkey + "'");
    }
    if (!per_target.is_object()) {
      throw InvariantError("attribute tree: '" + tkey + "' must map granularity to categories");
    }
    std::size_t g_index = 0;
    for (const auto& [gkey, cats] : per_target.items()) {
      auto granularity = parse_granularity(gkey);
      if (!granularity) {
        throw InvariantError("attribute tree: " + tkey + ": unknown granularity '" + gkey + "'");
      }
      if (g_index >= 3 || *granularity != kGranularities[g_index]) {
        throw InvariantError("attribute tree: " + tkey + ": granularity '" + gkey +
                             "' out of order (expected operation, block-and-connectivity, network)");
      }
      if (!cats.is_object()) {
        throw InvariantError("attribute tree: " + tkey + "/" + gkey +
                             " must map main category to a list");
      }
      auto& level = tree.levels(*target)[g_index];
      for (const auto& [mkey, subs] : cats.items()) {
        if (!subs.is_array()) {
          throw InvariantError("attribute tree: " + tkey + "/" + gkey + "/" + mkey +
                               " must be a list of sub-categories");
        }
        MainCategory cat{normalize_name(mkey), {}};
        for (const auto& s : subs) {
          if (!s.is_string()) {
            throw InvariantError("attribute tree: " + tkey + "/" + gkey + "/" + mkey +
                                 ": sub-categories must be strings");
          }
          cat.sub_categories.push_back(normalize_name(s.get<std::string>()));
        }
        level.categories.push_back(std::move(cat));
      }
      ++g_index;
    }
    if (g_index != 3) {
      throw InvariantError("attribute tree: " + tkey + " must have exactly three granularity levels");
    }
  }
  if (seen_targets.size() != 2) {
    throw InvariantError("attribute tree: both 'performance' and 'efficiency' are required");
  }
  tree.validate();
  return tree;
}

AttributeTree load_attribute_tree_file(const std::filesystem::path& path) {
  return load_attribute_tree(read_text_file(path));
}

std::string serialize_attribute_tree(const AttributeTree& tree) {
  ordered_json doc = ordered_json::object();
  for (Target target : kTargets) {
    ordered_json per_target = ordered_json::object();
    for (const auto& level : tree.levels(target)) {
      ordered_json cats = ordered_json::object();
      for (const auto& cat : level.categories) cats[cat.name] = cat.sub_categories;
      per_target[std::string(to_string(level.granularity))] = std::move(cats);
    }
    doc[std::string(to_string(target))] = std::move(per_target);
  }
  return doc.dump(2) + "\n";
}

}  // namespace archevo
