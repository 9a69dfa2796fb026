#include "archevo/extraction.hpp"

#include <algorithm>
#include <cctype>

#include "archevo/common.hpp"
#include "archevo/response_parsing.hpp"

namespace archevo {

namespace {

std::string strip_token(std::string_view text) {
  std::string t = trim(text);
  while (!t.empty() && (t.front() == '"' || t.front() == '\'' || t.front() == '-' ||
                        t.front() == '*' || t.front() == '`')) {
    t.erase(t.begin());
  }
  while (!t.empty() && (t.back() == '"' || t.back() == '\'' || t.back() == ',' ||
                        t.back() == '*' || t.back() == '`')) {
    t.pop_back();
  }
  return trim(t);
}

void parse_block(std::string_view block, std::vector<AttributeListing>& out) {
  std::optional<Granularity> current;
  std::string pending;
  for (const auto& raw : split_lines(block)) {
    std::string line = pending.empty() ? trim(raw) : pending + " " + trim(raw);
    pending.clear();
    if (line.empty() || line == "}" || line == "}," || line == "{") continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const std::string key = strip_token(line.substr(0, colon));
    const std::string rest = trim(line.substr(colon + 1));
    if (rest.empty() || rest.front() == '{') {
      if (auto g = parse_granularity(key)) current = g;
      continue;
    }
    const auto open = rest.find('[');
    if (open == std::string::npos) continue;
    const auto close = rest.find(']', open);
    if (close == std::string::npos) {
      pending = line;  // list continues on the next line
      continue;
    }
    if (!current) continue;
    AttributeListing listing{*current, normalize_name(key), {}};
    for (const auto& item : split(rest.substr(open + 1, close - open - 1), ',')) {
      std::string name = normalize_name(strip_token(item));
      if (!name.empty()) listing.sub_categories.push_back(std::move(name));
    }
    if (!listing.main_category.empty()) out.push_back(std::move(listing));
  }
}

}  // namespace

std::optional<ParsedAttributes> parse_attribute_response(std::string_view response) {
  const std::string lowered = to_lower(response);
  const auto perf = lowered.find("**performance**");
  const auto eff = lowered.find("**efficiency**");
  if (perf == std::string::npos && eff == std::string::npos) return std::nullopt;
  ParsedAttributes parsed;
  auto block_of = [&](std::size_t start, std::size_t marker_len, std::size_t other) {
    const std::size_t begin = start + marker_len;
    const std::size_t end = (other != std::string::npos && other > start) ? other : response.size();
    return response.substr(begin, end - begin);
  };
  if (perf != std::string::npos) {
    parse_block(block_of(perf, 15, eff), parsed.by_target[Target::performance]);
  }
  if (eff != std::string::npos) {
    parse_block(block_of(eff, 14, perf), parsed.by_target[Target::efficiency]);
  }
  return parsed;
}

TreeBuildResult build_attribute_tree(const AttributeTree& tmpl,
                                     std::span<const ReferenceModel> references, ChatGateway& llm,
                                     const PromptLibrary& prompts) {
  if (tmpl.sub_category_count() != 0) {
    throw InvariantError("attribute template must have empty sub-category lists");
  }
  if (references.empty()) throw InvariantError("reference corpus is empty");

  const std::string system = prompts.render(
      "attribute-template.system",
      {{"attribute_examples_for_performance_improvements",
        prompts.text("attribute-examples-performance")},
       {"attribute_examples_for_efficiency_improvements",
        prompts.text("attribute-examples-efficiency")}});

  TreeBuildResult result{tmpl, {}};
  for (const auto& ref : references) {
    ChatRequest req{"attributes/" + ref.name, system,
                    prompts.render("attribute-structuring.user",
                                   {{"reference_model_name", ref.name},
                                    {"reference_model_code", ref.source}})};
    const std::string response = llm.complete(req);
    auto parsed = parse_attribute_response(response);
    if (!parsed) {
      result.warnings.push_back(ref.name + ": response has no **Performance**/**Efficiency** "
                                           "blocks; skipped");
      continue;
    }
    for (const auto& [target, listings] : parsed->by_target) {
      for (const auto& listing : listings) {
        auto home = tmpl.granularity_of(target, listing.main_category);
        if (!home) {
          result.warnings.push_back(ref.name + ": unknown main category '" +
                                    listing.main_category + "' under " +
                                    std::string(to_string(target)) + "; ignored");
          continue;
        }
        for (const auto& sub : listing.sub_categories) {
          result.tree.add_sub_category(target, *home, listing.main_category, sub);
        }
      }
    }
  }
  result.tree.validate();
  return result;
}

Classification classify_abstract(std::string_view title, std::string_view abstract,
                                 const AttributeTree& tree, ChatGateway& llm,
                                 const std::string& stream, const PromptLibrary& prompts) {
  ChatRequest req{stream, std::nullopt,
                  prompts.render("paper-filtering",
                                 {{"title", std::string(title)},
                                  {"abstract", std::string(abstract)},
                                  {"attributes_for_performance_improvement",
                                   tree.render_for_prompt(Target::performance)},
                                  {"attributes_for_efficiency_improvement",
                                   tree.render_for_prompt(Target::efficiency)}})};
  const std::string payload = parse_tag_response(llm.complete(req));
  if (payload == "no") return Classification{false, {}};

  const auto parts = split(payload, '*');
  if (parts.size() < 3 || parts.size() > 4) {
    throw ParseError("classification '" + payload + "' is not target*granularity*main*sub");
  }
  auto target = parse_target(parts[0]);
  auto granularity = parse_granularity(parts[1]);
  if (!target || !granularity) {
    throw ParseError("classification '" + payload + "' names an unknown target or granularity");
  }
  IdeaTag tag{*target, *granularity, normalize_name(parts[2]), std::nullopt};
  if (parts.size() == 4 && !trim(parts[3]).empty()) tag.sub_category = normalize_name(parts[3]);
  if (!tree.resolves(tag.target, tag.granularity, tag.main_category, tag.sub_category)) {
    throw ParseError("classification '" + payload + "' does not resolve against the tree");
  }
  return Classification{true, std::move(tag)};
}

std::vector<std::string> parse_idea_list(std::string_view response) {
  std::vector<std::string> items;
  for (const auto& raw : split_lines(response)) {
    std::string line = trim(raw);
    std::size_t skip = 0;
    if (line.rfind("- ", 0) == 0 || line.rfind("* ", 0) == 0 || line.rfind("+ ", 0) == 0) {
      skip = 2;
    } else if (line.rfind("\xE2\x80\xA2", 0) == 0) {  // U+2022 bullet
      skip = 3;
    } else {
      std::size_t i = 0;
      while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
      if (i > 0 && i + 1 < line.size() && (line[i] == '.' || line[i] == ')') && line[i + 1] == ' ') {
        skip = i + 2;
      }
    }
    if (skip == 0) continue;
    std::string text = trim(std::string_view(line).substr(skip));
    // Drop markdown emphasis around the whole item.
    while (text.size() >= 4 && text.rfind("**", 0) == 0 && text.ends_with("**")) {
      text = trim(text.substr(2, text.size() - 4));
    }
    if (!text.empty()) items.push_back(std::move(text));
  }
  return items;
}

std::vector<DesignIdea> extract_ideas(std::string_view paper_text, const IdeaTag& tag,
                                      const std::string& source_paper, const AttributeTree& tree,
                                      ChatGateway& llm, const std::string& stream,
                                      std::vector<std::string>* warnings,
                                      const PromptLibrary& prompts) {
  ChatRequest req{stream, std::nullopt,
                  prompts.render("knowledge-extraction",
                                 {{"attributes_for_performance_improvement",
                                   tree.render_for_prompt(Target::performance)},
                                  {"attributes_for_efficiency_improvement",
                                   tree.render_for_prompt(Target::efficiency)},
                                  {"paper", std::string(paper_text)}})};
  std::vector<DesignIdea> ideas;
  for (const auto& item : parse_idea_list(llm.complete(req))) {
    bool truncated = false;
    DesignIdea idea;
    idea.text = cap_idea_words(item, &truncated);
    if (truncated && warnings) {
      warnings->push_back(source_paper + ": idea truncated to " + std::to_string(kMaxIdeaWords) +
                          " words");
    }
    idea.tag = tag;
    idea.source_paper = source_paper;
    idea.id = make_idea_id(idea.text, idea.tag, idea.source_paper);
    ideas.push_back(std::move(idea));
  }
  return ideas;
}

CorpusPaper parse_corpus_paper(std::string id, std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || trim(lines[0]).empty()) throw ParseError(id + ": missing title line", 1, 1);
  if (lines.size() < 2 || !trim(lines[1]).empty()) {
    throw ParseError(id + ": second line must be blank", 2, 1);
  }
  CorpusPaper paper{std::move(id), trim(lines[0]), {}, {}};
  std::size_t abstract_at = 0;
  std::size_t body_at = 0;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const std::string marker = trim(lines[i]);
    if (marker == "# ABSTRACT" && abstract_at == 0) abstract_at = i;
    if (marker == "# BODY" && body_at == 0) body_at = i;
  }
  if (abstract_at == 0) throw ParseError(paper.id + ": missing '# ABSTRACT' marker", 3, 1);
  if (body_at == 0 || body_at < abstract_at) {
    throw ParseError(paper.id + ": missing '# BODY' marker after the abstract", abstract_at + 1, 1);
  }
  auto join = [&](std::size_t from, std::size_t to) {
    std::string out;
    for (std::size_t i = from; i < to; ++i) {
      out += lines[i];
      out.push_back('\n');
    }
    return trim(out);
  };
  paper.abstract = join(abstract_at + 1, body_at);
  paper.body = join(body_at + 1, lines.size());
  return paper;
}

std::vector<CorpusPaper> load_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error("corpus directory '" + dir.string() + "' does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<CorpusPaper> corpus;
  corpus.reserve(files.size());
  for (const auto& f : files) {
    corpus.push_back(parse_corpus_paper(f.stem().string(), read_text_file(f)));
  }
  return corpus;
}

ExtractionStats run_extraction(std::span<const CorpusPaper> corpus, KnowledgeDB& db,
                               ChatGateway& llm, const PromptLibrary& prompts) {
  ExtractionStats stats;
  for (const auto& paper : corpus) {
    ++stats.papers;
    const std::string stream = "extract/" + paper.id;
    try {
      std::optional<Classification> verdict;
      for (int attempt = 0; attempt < 2 && !verdict; ++attempt) {
        try {
          verdict = classify_abstract(paper.title, paper.abstract, db.tree(), llm, stream, prompts);
        } catch (const ParseError& e) {
          stats.log.push_back(paper.id + ": classification attempt " +
                              std::to_string(attempt + 1) + " unparsable: " + e.what());
        }
      }
      if (!verdict || !verdict->keep) {
        ++stats.discarded;
        stats.log.push_back(paper.id + ": discarded");
        continue;
      }
      ++stats.kept;
      std::vector<std::string> warnings;
      auto ideas = extract_ideas(paper.body, verdict->tag, paper.id, db.tree(), llm, stream,
                                 &warnings, prompts);
      for (auto& w : warnings) stats.log.push_back(std::move(w));
      for (auto& idea : ideas) {
        const CategoryKey key{idea.tag.target, idea.tag.main_category};
        if (db.add(std::move(idea))) {
          ++stats.ideas;
          ++stats.ideas_per_category[key];
        }
      }
      stats.log.push_back(paper.id + ": kept, " + std::to_string(ideas.size()) + " ideas");
    } catch (const Error& e) {
      ++stats.failed;
      stats.log.push_back(paper.id + ": failed: " + e.what());
    }
  }
  return stats;
}

}  // namespace archevo
