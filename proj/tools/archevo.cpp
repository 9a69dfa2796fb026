// Command-line entry points: extract, search, validate, report.
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>

#include "archevo/app.hpp"
#include "archevo/config.hpp"
#include "archevo/extraction.hpp"
#include "archevo/report.hpp"
#include "archevo/run_dir.hpp"

namespace fs = std::filesystem;
using namespace archevo;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;

struct Options {
  std::string config;
  std::string base;
  std::string out;
  std::string corpus;
  std::string tree;
  std::string script;
  std::string source;
  std::string parent;
  std::string run;
  std::string gateway;
  std::string evaluator;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  bool resume = false;
  bool force = false;
};

void apply_overrides(AppConfig& cfg, const Options& o) {
  if (!o.gateway.empty()) cfg.gateway.mode = o.gateway;
  if (!o.evaluator.empty()) cfg.evaluator.mode = o.evaluator;
  if (!o.script.empty()) cfg.gateway.script = fs::path(o.script);
  if (o.seed) cfg.search.seed = *o.seed;
  if (o.workers) cfg.search.workers = *o.workers;
  cfg.search.validate();
}

int cmd_extract(const Options& o) {
  GatewaySettings gw;
  if (!o.config.empty()) gw = load_config(o.config, true).gateway;
  if (!o.gateway.empty()) gw.mode = o.gateway;
  if (!o.script.empty()) gw.script = fs::path(o.script);
  if (gw.mode == "scripted" && !gw.script && !gw.synthetic) {
    throw ConfigError("gateway.script: scripted extraction needs --script or a script in the config");
  }

  const fs::path out(o.out);
  const fs::path ideas_file = out / "ideas.jsonl";
  if (fs::exists(ideas_file) && !o.force) {
    throw ConfigError("out: '" + out.string() + "' already holds ideas.jsonl; pass --force to replace it");
  }
  fs::create_directories(out);
  fs::remove(out / "transcript.jsonl");

  auto tree = load_attribute_tree_file(o.tree);
  const auto corpus = load_corpus(o.corpus);
  auto llm = make_gateway(gw, o.seed.value_or(0));
  TranscriptLog transcript(out / "transcript.jsonl");
  llm->set_transcript(&transcript);

  KnowledgeDB db(tree);
  const ExtractionStats stats = run_extraction(corpus, db, *llm);
  db.save_jsonl(ideas_file);

  nlohmann::ordered_json j;
  j["papers"] = stats.papers;
  j["kept"] = stats.kept;
  j["discarded"] = stats.discarded;
  j["failed"] = stats.failed;
  j["ideas"] = stats.ideas;
  nlohmann::ordered_json hist = nlohmann::ordered_json::array();
  for (const auto& [key, n] : stats.ideas_per_category) {
    hist.push_back({{"target", to_string(key.target)}, {"main_category", key.main_category}, {"ideas", n}});
  }
  j["ideas_per_category"] = std::move(hist);
  j["log"] = stats.log;
  write_text_file(out / "extraction_stats.json", j.dump(2) + "\n");

  std::cout << "papers " << stats.papers << ", kept " << stats.kept << ", discarded "
            << stats.discarded << ", failed " << stats.failed << ", ideas " << stats.ideas << "\n";
  for (const auto& [key, n] : stats.ideas_per_category) {
    std::cout << "  " << std::setw(4) << n << "  " << to_string(key.target) << " / "
              << key.main_category << "\n";
  }
  if (stats.papers > 0 && stats.failed == stats.papers) {
    std::cerr << "error: every paper failed\n";
    return kRuntime;
  }
  if (stats.ideas == 0) std::cerr << "warning: no ideas extracted\n";
  return kOk;
}

int cmd_search(const Options& o) {
  const fs::path out(o.out);
  SearchRequest req;
  fs::path config_path = o.config;
  if (o.resume && config_path.empty()) config_path = RunDirectory(out).config_file();
  if (config_path.empty()) throw ConfigError("config: --config is required");
  req.config = load_config(config_path);
  req.config_text = read_text_file(config_path);
  apply_overrides(req.config, o);
  if (!o.resume) {
    if (o.base.empty()) throw ConfigError("base: --base is required for a new run");
    req.base_source = read_text_file(o.base);
  }
  req.out_dir = out;
  req.resume = o.resume;
  req.force = o.force;

  const SearchOutcome res = run_search_in_directory(req, &std::cout);
  if (res.already_complete) {
    std::cout << "run in '" << out.string() << "' is already complete; nothing to do\n";
  }
  const auto& best = res.state.history.at(res.best);
  std::cout << "best " << best.candidate.id << " val_accuracy " << best.val_accuracy;
  if (best.test_accuracy) std::cout << " test_accuracy " << *best.test_accuracy;
  for (std::size_t i = 0; i < best.budgets.size(); ++i) {
    std::cout << ' ' << req.config.search.thresholds[i].label << ' ' << best.budgets[i];
  }
  std::cout << "\n";
  return kOk;
}

int cmd_validate(const Options& o) {
  if (o.config.empty()) throw ConfigError("config: --config is required");
  AppConfig cfg = load_config(o.config);
  apply_overrides(cfg, o);
  const std::string source = read_text_file(o.source);
  auto evaluator = make_evaluator(cfg.evaluator, 1);

  struct Row {
    std::string check, result, detail;
  };
  std::vector<Row> rows;
  bool valid = true;
  const CompileCheck compile = evaluator->check_compile(source);
  rows.push_back({"compile", compile.ok ? "pass" : "fail", compile.ok ? "" : compile.error});
  valid = compile.ok;
  if (compile.ok) {
    const auto budgets = budget_vector(evaluator->measure_budgets(source), cfg.search.thresholds);
    std::ostringstream detail;
    for (std::size_t i = 0; i < budgets.size(); ++i) {
      if (i) detail << ", ";
      detail << cfg.search.thresholds[i].label << ' ' << budgets[i] << " / " << cfg.search.thresholds[i].limit;
    }
    const bool ok = within_limits(budgets, cfg.search.thresholds);
    rows.push_back({"budget", ok ? "pass" : "fail", detail.str()});
    valid = valid && ok;
  } else {
    rows.push_back({"budget", "skipped", "needs a compiling model"});
  }
  if (o.parent.empty()) {
    rows.push_back({"structure", "skipped", "no --parent given"});
  } else if (compile.ok) {
    auto llm = make_gateway(cfg.gateway, cfg.search.seed);
    const auto verdict = judge_structure(read_text_file(o.parent), source, *llm, "validate");
    rows.push_back({"structure", verdict.yes ? "pass" : "fail", verdict.reason});
    valid = valid && verdict.yes;
  } else {
    rows.push_back({"structure", "skipped", "needs a compiling model"});
  }
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(10) << r.check << std::setw(8) << r.result << r.detail << "\n";
  }
  std::cout << "verdict: " << (valid ? "valid" : "invalid") << "\n";
  return kOk;
}

int cmd_report(const Options& o) {
  const fs::path run = o.run.empty() ? fs::path(o.out) : fs::path(o.run);
  if (run.empty()) throw ConfigError("run: a run directory is required");
  const RunData data = load_run(run);
  const auto files = write_report(data, RunDirectory(run).report_dir());
  const PassRates pr = compute_pass_rates(data);
  std::cout << data.history.size() << " architectures, " << pr.generated
            << " generated candidates, pass rate " << pr.overall() << "\n";
  for (const auto& f : files) std::cout << "  " << (RunDirectory(run).report_dir() / f).string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-guided architecture search driven by a chat model"};
  app.require_subcommand(1);
  Options o;

  auto* extract = app.add_subcommand("extract", "Filter a paper corpus and extract tagged design ideas");
  extract->add_option("--corpus", o.corpus, "Directory of paper text files")->required();
  extract->add_option("--tree", o.tree, "Attribute tree JSON")->required();
  extract->add_option("--out", o.out, "Output directory")->required();
  extract->add_option("--config", o.config, "Config file; only [gateway] is read");
  extract->add_option("--script", o.script, "Scripted responses (JSONL)");
  extract->add_option("--gateway", o.gateway, "Gateway mode")->check(CLI::IsMember({"http", "scripted"}));
  extract->add_option("--seed", o.seed, "Seed for the synthetic responder");
  extract->add_flag("--force", o.force, "Replace an existing ideas.jsonl");

  auto* search = app.add_subcommand("search", "Run or resume an architecture search");
  search->add_option("--config", o.config, "Run config (TOML)");
  search->add_option("--base", o.base, "Base model source");
  search->add_option("--out", o.out, "Run directory")->required();
  search->add_flag("--resume", o.resume, "Continue the run in --out from its last generation");
  search->add_flag("--force", o.force, "Replace an existing run in --out");
  search->add_option("--gateway", o.gateway, "Gateway mode")->check(CLI::IsMember({"http", "scripted"}));
  search->add_option("--evaluator", o.evaluator, "Evaluator")->check(CLI::IsMember({"surrogate", "sandbox"}));
  search->add_option("--script", o.script, "Scripted responses (JSONL)");
  search->add_option("--seed", o.seed, "Override the config seed");
  search->add_option("--workers", o.workers, "Override the config worker count");
  search->get_option("--resume")->excludes(search->get_option("--force"));

  auto* validate = app.add_subcommand("validate", "Run the verification checks on one model");
  validate->add_option("--config", o.config, "Run config (TOML)")->required();
  validate->add_option("--source", o.source, "Model source to check")->required();
  validate->add_option("--parent", o.parent, "Parent source; enables the structural check");
  validate->add_option("--gateway", o.gateway, "Gateway mode")->check(CLI::IsMember({"http", "scripted"}));
  validate->add_option("--evaluator", o.evaluator, "Evaluator")->check(CLI::IsMember({"surrogate", "sandbox"}));
  validate->add_option("--script", o.script, "Scripted responses (JSONL)");

  auto* report = app.add_subcommand("report", "Write CSV tables and a plot for a run directory");
  report->add_option("run", o.run, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*extract) return cmd_extract(o);
    if (*search) return cmd_search(o);
    if (*validate) return cmd_validate(o);
    if (*report) return cmd_report(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
