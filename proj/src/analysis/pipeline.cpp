// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/analysis/pipeline.hpp"
#include "neuroflow/common/csv.hpp"
#include "neuroflow/common/error.hpp"
#include "neuroflow/common/io.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <cstdio>

namespace neuroflow::analysis {

namespace {

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Feature names become file stems; anything outside [A-Za-z0-9._-] is replaced.
std::string file_stem(const std::string& feature) {
  std::string out;
  for (char c : feature) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_') ? c : '_';
  return out.empty() ? "feature" : out;
}

}  // namespace

StatsRun run_stats(const StatsOptions& opts) {
  if (opts.out_dir.empty()) throw ConfigError("stats output directory is required");
  const auto labels = load_labels(opts.labels_csv);
  const auto features = load_features(opts.features_csv);
  const auto formula = parse_formula(opts.formula);
  const auto match = match_visits(labels, features.scans(), opts.window_days);

  StatsRun run;
  run.labels = labels.size();
  run.matched = match.matched.size();
  run.unmatched = match.unmatched.size();
  run.report = fit_feature_models(features, match.matched, formula);

  std::filesystem::create_directories(opts.out_dir);
  const auto write = [&](const std::filesystem::path& p, const std::string& text) {
    write_file_atomic(p, text);
    run.written.push_back(p);
  };
  write(opts.out_dir / "stats_report.csv", stats_report_csv(run.report));

  nlohmann::json unmatched = nlohmann::json::array();
  for (const auto& l : match.unmatched) unmatched.push_back({{"subject_id", l.subject_id}, {"reference_date", l.reference_date}});
  nlohmann::json matched = nlohmann::json::array();
  for (const auto& m : match.matched)
    matched.push_back({{"subject_id", m.label.subject_id},
                       {"reference_date", m.label.reference_date},
                       {"scan_date", m.scan_date},
                       {"mismatch_days", m.mismatch_days}});
  write(opts.out_dir / "matching.json", nlohmann::json{{"window_days", opts.window_days},
                                                       {"labels", run.labels},
                                                       {"matched", matched},
                                                       {"unmatched", unmatched},
                                                       {"skipped_features", run.report.skipped}}
                                                .dump(2) + "\n");

  std::vector<std::string> drawn = opts.figure_features;
  if (drawn.empty())
    for (const auto& m : run.report.models) drawn.push_back(m.feature);

  std::vector<csv::Row> groups{{"feature", "group", "n", "intercept", "slope", "se", "t", "p"}};
  const auto fig_dir = opts.out_dir / "figures";
  std::filesystem::create_directories(fig_dir);
  for (const auto& feature : drawn) {
    const auto data = collect_feature(features, match.matched, feature);
    for (const auto& g : data.fits)
      groups.push_back({feature, std::string(to_string(g.group)), std::to_string(g.fit.n), format_number(g.fit.beta[0]),
                        format_number(g.fit.beta[1]), format_number(g.fit.se[1]), format_number(g.fit.t[1]),
                        format_number(g.fit.p[1])});
    if (data.points.empty()) continue;
    const auto stem = file_stem(feature);
    for (auto kind : {FigureKind::SCATTER_FIT, FigureKind::GROUP_BOX}) {
      const auto fig = emit_figure_data(data, kind);
      const std::string suffix = kind == FigureKind::SCATTER_FIT ? ".scatter" : ".box";
      write(fig_dir / (stem + suffix + ".json"), fig.data.dump(2) + "\n");
      write(fig_dir / (stem + suffix + ".svg"), fig.svg);
    }
  }
  write(opts.out_dir / "group_regressions.csv", csv::emit(groups));
  return run;
}

}  // namespace neuroflow::analysis
