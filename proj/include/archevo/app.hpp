#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>

#include "archevo/config.hpp"
#include "archevo/evaluation.hpp"
#include "archevo/evolution.hpp"
#include "archevo/llm_gateway.hpp"

namespace archevo {

// Scripted mode loads the configured script (if any) and, when `synthetic`
// is set, answers the rest with the synthetic responder seeded by `seed`.
std::unique_ptr<ChatGateway> make_gateway(const GatewaySettings& settings, std::uint64_t seed);
std::unique_ptr<Evaluator> make_evaluator(const EvaluatorSettings& settings, std::size_t workers);

struct SearchOutcome {
  SearchState state;
  std::size_t best = 0;
  bool already_complete = false;
};

struct SearchRequest {
  AppConfig config;
  std::string config_text;
  std::string base_source;
  std::filesystem::path out_dir;
  bool resume = false;
  bool force = false;
};

// Runs (or resumes) a search in a run directory, checkpointing after every
// generation and writing the report at the end. Progress goes to `log`.
SearchOutcome run_search_in_directory(const SearchRequest& request, std::ostream* log = nullptr);

}  // namespace archevo
