#include "archevo/config.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <set>

namespace archevo {

namespace {

bool is_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

class LineScanner {
 public:
  LineScanner(std::string_view line, std::size_t line_no) : s_(line), line_(line_no) {}

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool at_end_or_comment() {
    skip_ws();
    return pos_ >= s_.size() || s_[pos_] == '#';
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("config: " + what, line_, pos_ + 1);
  }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string key() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && is_key_char(s_[pos_])) ++pos_;
    if (pos_ == start) fail("expected a key");
    return std::string(s_.substr(start, pos_ - start));
  }

  std::string string_literal() {
    expect('"');
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) fail("unterminated escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unknown escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  ConfigValue value() {
    skip_ws();
    const char c = peek();
    if (c == '"') return string_literal();
    if (c == '\'') {
      ++pos_;
      const auto end = s_.find('\'', pos_);
      if (end == std::string_view::npos) fail("unterminated literal string");
      std::string out(s_.substr(pos_, end - pos_));
      pos_ = end + 1;
      return out;
    }
    if (c == '[') {
      ++pos_;
      std::vector<std::string> items;
      skip_ws();
      if (peek() == ']') {
        ++pos_;
        return items;
      }
      for (;;) {
        items.push_back(string_literal());
        skip_ws();
        if (peek() == ',') {
          ++pos_;
          skip_ws();
          if (peek() == ']') {
            ++pos_;
            break;
          }
          continue;
        }
        expect(']');
        break;
      }
      return items;
    }
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ' ' && s_[pos_] != '\t' && s_[pos_] != '#') ++pos_;
    std::string token(s_.substr(start, pos_ - start));
    if (token == "true") return true;
    if (token == "false") return false;
    std::string digits;
    for (char ch : token) {
      if (ch != '_') digits.push_back(ch);
    }
    if (digits.empty()) fail("expected a value");
    errno = 0;
    char* end = nullptr;
    if (digits.find_first_of(".eE") == std::string::npos || digits.rfind("0x", 0) == 0) {
      const long long v = std::strtoll(digits.c_str(), &end, 0);
      if (errno == 0 && end && *end == '\0') return static_cast<std::int64_t>(v);
    } else {
      const double v = std::strtod(digits.c_str(), &end);
      if (errno == 0 && end && *end == '\0') return v;
    }
    pos_ = start;
    fail("cannot parse value '" + token + "'");
  }

 private:
  std::string_view s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

}  // namespace

ConfigTable parse_config_table(std::string_view text) {
  ConfigTable table;
  table.sections.push_back({"", {}});
  std::set<std::string> seen_sections;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    LineScanner scan(lines[i], i + 1);
    if (scan.at_end_or_comment()) continue;
    if (scan.peek() == '[') {
      scan.expect('[');
      std::string name = scan.key();
      scan.expect(']');
      if (!scan.at_end_or_comment()) scan.fail("unexpected text after section header");
      if (!seen_sections.insert(name).second) scan.fail("section [" + name + "] repeated");
      table.sections.push_back({std::move(name), {}});
      continue;
    }
    std::string key = scan.key();
    scan.expect('=');
    ConfigValue v = scan.value();
    if (!scan.at_end_or_comment()) scan.fail("unexpected text after value");
    auto& entries = table.sections.back().second;
    for (const auto& [k, _] : entries) {
      if (k == key) scan.fail("key '" + key + "' repeated");
    }
    entries.emplace_back(std::move(key), std::move(v));
  }
  return table;
}

namespace {

struct FieldReader {
  std::string path;
  const ConfigValue& value;

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(path + ": " + what); }

  std::string str() const {
    if (auto* s = std::get_if<std::string>(&value)) return *s;
    fail("expected a string");
  }
  bool boolean() const {
    if (auto* b = std::get_if<bool>(&value)) return *b;
    fail("expected true or false");
  }
  double number() const {
    if (auto* i = std::get_if<std::int64_t>(&value)) return static_cast<double>(*i);
    if (auto* d = std::get_if<double>(&value)) return *d;
    fail("expected a number");
  }
  std::int64_t integer() const {
    if (auto* i = std::get_if<std::int64_t>(&value)) return *i;
    fail("expected an integer");
  }
  std::size_t count() const {
    const auto v = integer();
    if (v < 0) fail("must be >= 0");
    return static_cast<std::size_t>(v);
  }
  int small_count() const {
    const auto v = integer();
    if (v < 0 || v > 1'000'000) fail("must be between 0 and 1000000");
    return static_cast<int>(v);
  }
  std::vector<std::string> strings() const {
    if (auto* a = std::get_if<std::vector<std::string>>(&value)) return *a;
    fail("expected an array of strings");
  }
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

AppConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                       bool gateway_only) {
  ConfigTable table;
  try {
    table = parse_config_table(text);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  AppConfig cfg;
  bool have_thresholds = false;
  for (const auto& [section, entries] : table.sections) {
    if (section.empty()) {
      if (!entries.empty()) throw ConfigError(entries.front().first + ": key outside any section");
      continue;
    }
    static const std::set<std::string> kSections = {"search",    "thresholds", "limits",
                                                    "verifiers", "knowledge",  "gateway",
                                                    "evaluator"};
    if (!kSections.contains(section)) throw ConfigError(section + ": unknown section");
    if (gateway_only && section != "gateway") continue;
    if (section == "thresholds") have_thresholds = true;
    for (const auto& [key, value] : entries) {
      const FieldReader f{section + "." + key, value};
      if (section == "search") {
        auto& s = cfg.search;
        if (key == "k0") s.k0 = f.count();
        else if (key == "k1") s.k1 = f.count();
        else if (key == "k2") s.k2 = f.count();
        else if (key == "k3") s.k3 = f.count();
        else if (key == "d") s.d = f.count();
        else if (key == "generations") s.generations = f.small_count();
        else if (key == "seed") s.seed = static_cast<std::uint64_t>(f.integer());
        else if (key == "workers") s.workers = f.count();
        else if (key == "refinement_switch_fraction") s.refinement_switch_fraction = f.number();
        else if (key == "base_module_classes") s.base_module_classes = f.str();
        else if (key == "target_mixture") {
          const std::string m = f.str();
          if (m == "equal") s.target_mixture = TargetMixture::equal;
          else if (m == "pooled") s.target_mixture = TargetMixture::pooled;
          else f.fail("expected \"equal\" or \"pooled\"");
        } else f.fail("unknown field");
      } else if (section == "thresholds") {
        cfg.search.thresholds.push_back({key, f.number()});
      } else if (section == "limits") {
        auto& l = cfg.search.limits;
        if (key == "max_debug") l.max_debug = f.small_count();
        else if (key == "max_downscale") l.max_downscale = f.small_count();
        else if (key == "max_struct_retries") l.max_struct_retries = f.small_count();
        else f.fail("unknown field");
      } else if (section == "verifiers") {
        auto& v = cfg.search.verifiers;
        if (key == "execution") v.execution = f.boolean();
        else if (key == "budget") v.budget = f.boolean();
        else if (key == "structure") v.structure = f.boolean();
        else f.fail("unknown field");
      } else if (section == "knowledge") {
        auto& k = cfg.knowledge;
        if (key == "tree") k.tree = resolve(base_dir, f.str());
        else if (key == "ideas") k.ideas = resolve(base_dir, f.str());
        else if (key == "prompts") k.prompts = resolve(base_dir, f.str());
        else f.fail("unknown field");
      } else if (section == "gateway") {
        auto& g = cfg.gateway;
        if (key == "mode") g.mode = f.str();
        else if (key == "script") g.script = resolve(base_dir, f.str());
        else if (key == "synthetic") g.synthetic = f.boolean();
        else if (key == "endpoint") g.http.endpoint = f.str();
        else if (key == "model") g.http.model = f.str();
        else if (key == "api_key_env") g.http.api_key_env = f.str();
        else if (key == "temperature") g.http.temperature = f.number();
        else if (key == "timeout_s") g.http.timeout_s = f.number();
        else f.fail("unknown field");
      } else if (section == "evaluator") {
        auto& e = cfg.evaluator;
        if (key == "mode") e.mode = f.str();
        else if (key == "worker_command") e.worker_command = f.strings();
        else if (key == "worker_config") e.worker_config = f.str();
        else if (key == "timeout_s") e.timeout_s = f.number();
        else f.fail("unknown field");
      }
    }
  }
  if (cfg.gateway.mode != "scripted" && cfg.gateway.mode != "http") {
    throw ConfigError("gateway.mode: expected \"scripted\" or \"http\"");
  }
  if (gateway_only) return cfg;
  if (!have_thresholds || cfg.search.thresholds.empty()) {
    throw ConfigError("thresholds: missing; at least one budget dimension (params, flops) is required");
  }
  if (cfg.evaluator.mode != "surrogate" && cfg.evaluator.mode != "sandbox") {
    throw ConfigError("evaluator.mode: expected \"surrogate\" or \"sandbox\"");
  }
  if (cfg.knowledge.tree.empty()) throw ConfigError("knowledge.tree: missing");
  if (cfg.knowledge.ideas.empty()) throw ConfigError("knowledge.ideas: missing");
  cfg.search.validate();
  return cfg;
}

AppConfig load_config(const std::filesystem::path& path, bool gateway_only) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.parent_path(), gateway_only);
}

}  // namespace archevo
