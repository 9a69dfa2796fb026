#include "archevo/app.hpp"

#include <ostream>

#include "archevo/report.hpp"
#include "archevo/run_dir.hpp"
#include "archevo/sandbox.hpp"
#include "archevo/synthetic_llm.hpp"

namespace archevo {

std::unique_ptr<ChatGateway> make_gateway(const GatewaySettings& settings, std::uint64_t seed) {
  if (settings.mode == "http") {
    if (settings.http.endpoint.empty()) throw ConfigError("gateway.endpoint: required in http mode");
    if (settings.http.model.empty()) throw ConfigError("gateway.model: required in http mode");
    return std::make_unique<HttpGateway>(settings.http);
  }
  std::unique_ptr<ScriptedGateway> gw;
  if (settings.synthetic) {
    gw = std::make_unique<ScriptedGateway>(make_synthetic_responder(seed));
  } else {
    gw = std::make_unique<ScriptedGateway>();
  }
  if (settings.script) gw->load_jsonl(*settings.script);
  return gw;
}

std::unique_ptr<Evaluator> make_evaluator(const EvaluatorSettings& settings, std::size_t workers) {
  if (settings.mode == "sandbox") {
    if (settings.worker_command.empty()) {
      throw ConfigError("evaluator.worker_command: required in sandbox mode");
    }
    SandboxConfig sc;
    sc.command = settings.worker_command;
    sc.worker_config = settings.worker_config;
    sc.workers = workers;
    sc.timeout_s = settings.timeout_s;
    return std::make_unique<SandboxEvaluator>(std::move(sc));
  }
  return std::make_unique<SurrogateEvaluator>();
}

SearchOutcome run_search_in_directory(const SearchRequest& request, std::ostream* log) {
  const AppConfig& cfg = request.config;
  RunDirectory dir(request.out_dir);
  SearchOutcome outcome;

  if (request.resume) {
    outcome.state = dir.resume();
    if (!outcome.state.history.empty() &&
        outcome.state.history.at(0).budgets.size() != cfg.search.thresholds.size()) {
      throw ConfigError("thresholds: dimensions differ from the run being resumed");
    }
    if (outcome.state.completed_generation >= cfg.search.generations) {
      outcome.already_complete = true;
      outcome.best = best_entry(outcome.state.history);
      return outcome;
    }
  } else {
    dir.create(request.force, request.config_text, request.base_source);
  }

  const auto tree = load_attribute_tree_file(cfg.knowledge.tree);
  const KnowledgeDB db = KnowledgeDB::load_jsonl(tree, cfg.knowledge.ideas);
  const PromptLibrary prompts = cfg.knowledge.prompts ? PromptLibrary::from_directory(*cfg.knowledge.prompts)
                                                      : PromptLibrary::builtin();
  auto gateway = make_gateway(cfg.gateway, cfg.search.seed);
  TranscriptLog transcript(dir.transcript_file());
  gateway->set_transcript(&transcript);
  auto evaluator = make_evaluator(cfg.evaluator, cfg.search.workers);

  const std::string base_source =
      request.resume ? read_text_file(dir.base_file()) : request.base_source;
  SearchEngine engine(cfg.search, SearchDeps{gateway.get(), evaluator.get(), &db, &prompts});
  outcome.best = engine.run_search(outcome.state, base_source, [&](const SearchState& s) {
    dir.save(s, cfg.search.thresholds);
    if (log) {
      const auto& best = s.history.at(best_entry(s.history));
      *log << "generation " << s.completed_generation << ": " << s.history.size()
           << " architectures, best " << best.candidate.id << " val " << best.val_accuracy << "\n";
    }
  });
  write_report(load_run(request.out_dir), dir.report_dir());
  return outcome;
}

}  // namespace archevo
