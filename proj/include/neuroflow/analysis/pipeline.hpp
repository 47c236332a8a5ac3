// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/analysis/cohort.hpp"
#include "neuroflow/analysis/figures.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace neuroflow::analysis {

inline constexpr const char* kDefaultFormula = "* ~ age + sex + diagnosis";

struct StatsOptions {
  std::filesystem::path labels_csv;
  std::filesystem::path features_csv;
  std::string formula = kDefaultFormula;
  int window_days = kDefaultWindowDays;
  std::filesystem::path out_dir;
  /// Features to draw; empty draws every modelled feature.
  std::vector<std::string> figure_features;
};

struct StatsRun {
  std::size_t labels = 0;
  std::size_t matched = 0;
  std::size_t unmatched = 0;
  StatsReport report;
  std::vector<std::filesystem::path> written;
};

/// Writes stats_report.csv, group_regressions.csv, matching.json and figures/ under out_dir.
StatsRun run_stats(const StatsOptions& opts);

}  // namespace neuroflow::analysis
