#include "archevo/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "archevo/pareto.hpp"

namespace archevo {

RunData load_run(const std::filesystem::path& run_dir) {
  RunDirectory dir(run_dir);
  if (!std::filesystem::exists(dir.history_file())) {
    throw Error("'" + run_dir.string() + "' has no history.jsonl");
  }
  RunData run;
  run.checkpoint = dir.checkpoint();
  const auto lines = split_lines(read_text_file(dir.history_file()));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    run.history.push_back(parse_history_line(lines[i], i + 1, &run.budget_labels));
  }
  if (run.history.empty()) throw Error("history of '" + run_dir.string() + "' is empty");
  if (std::filesystem::exists(dir.failures_file())) {
    const auto flines = split_lines(read_text_file(dir.failures_file()));
    for (std::size_t i = 0; i < flines.size(); ++i) {
      if (trim(flines[i]).empty()) continue;
      run.failures.push_back(parse_failure_line(flines[i], i + 1));
    }
  }
  return run;
}

namespace {

// Classifies one generated candidate by where its feedback loop ended.
void tally(PassRates& r, const std::vector<TraceEvent>& trace, bool over_budget_at_record,
           bool recorded) {
  ++r.generated;
  if (recorded) ++r.recorded;
  const TraceKind last = trace.empty() ? TraceKind::gateway_fail : trace.back().kind;
  if (last == TraceKind::gateway_fail || last == TraceKind::evaluator_fail) return;
  ++r.execution_entered;
  if (last == TraceKind::compile_fail) return;
  ++r.execution_passed;
  ++r.budget_entered;
  if (last == TraceKind::budget_fail || over_budget_at_record) return;
  ++r.budget_passed;
  ++r.structure_entered;
  if (last == TraceKind::struct_fail) return;
  ++r.structure_passed;
}

std::string fmt(double v, int precision = 6) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : "nan";
  std::ostringstream out;
  out << std::setprecision(precision) << v;
  return out.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

std::string stage_color(Stage s) {
  switch (s) {
    case Stage::init: return "#7f7f7f";
    case Stage::fair: return "#1f77b4";
    case Stage::pareto: return "#2ca02c";
    case Stage::llm_iter: return "#d62728";
  }
  return "#000000";
}

std::string render_svg(const RunData& run) {
  const double w = 720, h = 360, left = 60, right = 20, top = 20, bottom = 50;
  const double n = static_cast<double>(std::max<std::size_t>(run.history.size() - 1, 1));
  double lo = 100, hi = 0;
  for (const auto& e : run.history) {
    lo = std::min(lo, e.val_accuracy);
    hi = std::max(hi, e.val_accuracy);
  }
  lo = std::floor(lo / 5) * 5;
  hi = std::min(100.0, std::ceil(hi / 5) * 5);
  if (hi <= lo) hi = lo + 5;
  auto x = [&](double i) { return left + (w - left - right) * i / n; };
  auto y = [&](double a) { return top + (h - top - bottom) * (1 - (a - lo) / (hi - lo)); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\""
      << h - bottom << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double a = lo + (hi - lo) * t / 4;
    svg << "<text x=\"" << left - 6 << "\" y=\"" << y(a) + 4 << "\" text-anchor=\"end\">" << fmt(a, 4)
        << "</text>\n";
  }
  svg << "<text x=\"" << (w + left) / 2 << "\" y=\"" << h - 12
      << "\" text-anchor=\"middle\">architecture index</text>\n";
  svg << "<text x=\"14\" y=\"" << (h - bottom + top) / 2 << "\" transform=\"rotate(-90 14 "
      << (h - bottom + top) / 2 << ")\" text-anchor=\"middle\">validation accuracy (%)</text>\n";

  std::ostringstream best_path;
  double best = -1;
  for (std::size_t i = 0; i < run.history.size(); ++i) {
    best = std::max(best, run.history[i].val_accuracy);
    best_path << (i ? " L" : "M") << fmt(x(static_cast<double>(i))) << ' ' << fmt(y(best));
  }
  svg << "<path d=\"" << best_path.str() << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  for (std::size_t i = 0; i < run.history.size(); ++i) {
    const auto& e = run.history[i];
    svg << "<circle cx=\"" << fmt(x(static_cast<double>(i))) << "\" cy=\"" << fmt(y(e.val_accuracy))
        << "\" r=\"3\" fill=\"" << stage_color(e.candidate.stage) << "\"/>\n";
  }
  double ly = top + 4;
  for (Stage s : {Stage::init, Stage::fair, Stage::pareto, Stage::llm_iter}) {
    svg << "<circle cx=\"" << w - 110 << "\" cy=\"" << ly << "\" r=\"4\" fill=\"" << stage_color(s)
        << "\"/><text x=\"" << w - 100 << "\" y=\"" << ly + 4 << "\">" << to_string(s) << "</text>\n";
    ly += 16;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace

PassRates compute_pass_rates(const RunData& run) {
  PassRates r;
  for (const auto& e : run.history) {
    if (!e.candidate.parent_id) continue;  // the base model was not generated
    tally(r, e.mutation.trace, false, true);
  }
  for (const auto& f : run.failures) {
    if (f.reason == "chain-stopped") continue;  // never generated
    tally(r, f.trace, f.reason == "invalid" && f.message == "over budget", false);
  }
  return r;
}

std::vector<std::string> write_report(const RunData& run, const std::filesystem::path& out_dir) {
  std::vector<std::string> written;
  std::filesystem::create_directories(out_dir);

  {
    std::ostringstream csv;
    csv << "index,id,parent_id,stage,generation,val_accuracy,test_accuracy";
    for (const auto& l : run.budget_labels) csv << ',' << l;
    csv << ",best_so_far\n";
    double best = -1;
    for (const auto& e : run.history) {
      best = std::max(best, e.val_accuracy);
      csv << e.index << ',' << csv_field(e.candidate.id) << ','
          << csv_field(e.candidate.parent_id.value_or("")) << ',' << to_string(e.candidate.stage) << ','
          << e.candidate.generation << ',' << fmt(e.val_accuracy, 8) << ','
          << (e.test_accuracy ? fmt(*e.test_accuracy, 8) : "");
      for (double b : e.budgets) csv << ',' << fmt(b, 12);
      csv << ',' << fmt(best, 8) << '\n';
    }
    write_text_file(out_dir / "history.csv", csv.str());
    written.push_back("history.csv");
  }

  {
    std::vector<ScoredPoint> points;
    for (const auto& e : run.history) points.push_back({e.index, e.val_accuracy, e.budgets});
    const auto fronts = non_dominated_sort(points);
    std::ostringstream csv;
    csv << "index,id,stage,val_accuracy";
    for (const auto& l : run.budget_labels) csv << ',' << l;
    csv << '\n';
    if (!fronts.empty()) {
      for (std::size_t idx : fronts.front()) {
        const auto& e = run.history[idx];
        csv << e.index << ',' << csv_field(e.candidate.id) << ',' << to_string(e.candidate.stage) << ','
            << fmt(e.val_accuracy, 8);
        for (double b : e.budgets) csv << ',' << fmt(b, 12);
        csv << '\n';
      }
    }
    write_text_file(out_dir / "pareto_front.csv", csv.str());
    written.push_back("pareto_front.csv");
  }

  const PassRates pr = compute_pass_rates(run);
  {
    auto rate = [](std::size_t pass, std::size_t in) {
      return in ? fmt(static_cast<double>(pass) / in, 4) : std::string("");
    };
    std::ostringstream csv;
    csv << "phase,entered,passed,pass_rate\n";
    csv << "execution," << pr.execution_entered << ',' << pr.execution_passed << ','
        << rate(pr.execution_passed, pr.execution_entered) << '\n';
    csv << "budget," << pr.budget_entered << ',' << pr.budget_passed << ','
        << rate(pr.budget_passed, pr.budget_entered) << '\n';
    csv << "structure," << pr.structure_entered << ',' << pr.structure_passed << ','
        << rate(pr.structure_passed, pr.structure_entered) << '\n';
    csv << "overall," << pr.generated << ',' << pr.recorded << ',' << rate(pr.recorded, pr.generated)
        << '\n';
    write_text_file(out_dir / "pass_rates.csv", csv.str());
    written.push_back("pass_rates.csv");
  }

  write_text_file(out_dir / "accuracy.svg", render_svg(run));
  written.push_back("accuracy.svg");

  {
    History history;
    for (const auto& e : run.history) history.append(e);
    const std::size_t best = best_entry(history);
    std::map<std::string, std::size_t> reasons;
    for (const auto& f : run.failures) ++reasons[f.terminal ? f.reason : f.reason + " (retried)"];
    nlohmann::ordered_json j;
    j["recorded_architectures"] = run.history.size();
    j["generated_candidates"] = pr.generated;
    j["pass_rate"] = pr.overall();
    j["best"] = {{"id", run.history[best].candidate.id},
                 {"val_accuracy", run.history[best].val_accuracy}};
    j["failures"] = reasons;
    write_text_file(out_dir / "summary.json", j.dump(2) + "\n");
    written.push_back("summary.json");
  }
  return written;
}

}  // namespace archevo
