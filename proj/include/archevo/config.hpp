#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "archevo/evolution.hpp"
#include "archevo/llm_gateway.hpp"

namespace archevo {

// Values of the TOML subset used by run configs: strings, integers, floats,
// booleans and arrays of strings.
using ConfigValue = std::variant<std::string, std::int64_t, double, bool, std::vector<std::string>>;

struct ConfigTable {
  // Keys in file order, per section.
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, ConfigValue>>>> sections;
};

// [section] headers, `key = value` lines and `#` comments. Throws ParseError
// with line and column.
ConfigTable parse_config_table(std::string_view text);

struct GatewaySettings {
  std::string mode = "scripted";  // "scripted" or "http"
  std::optional<std::filesystem::path> script;
  // Scripted mode answers requests missing from the script with the
  // built-in synthetic responder instead of failing.
  bool synthetic = false;
  HttpGatewayConfig http;
};

struct EvaluatorSettings {
  std::string mode = "surrogate";  // "surrogate" or "sandbox"
  std::vector<std::string> worker_command;
  std::string worker_config = "{}";
  double timeout_s = 600.0;
};

struct KnowledgeSettings {
  std::filesystem::path tree;
  std::filesystem::path ideas;
  std::optional<std::filesystem::path> prompts;
};

struct AppConfig {
  SearchConfig search;
  KnowledgeSettings knowledge;
  GatewaySettings gateway;
  EvaluatorSettings evaluator;
};

// Relative paths resolve against `base_dir`. Throws ConfigError whose
// message starts with the offending field path (e.g. "thresholds").
// `gateway_only` reads just the [gateway] section and skips the search checks.
AppConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                       bool gateway_only = false);
AppConfig load_config(const std::filesystem::path& path, bool gateway_only = false);

}  // namespace archevo
