// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/analysis/cohort.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace neuroflow::analysis {

enum class FigureKind { SCATTER_FIT, GROUP_BOX };
std::string_view to_string(FigureKind k);
FigureKind parse_figure_kind(std::string_view token);

struct FeaturePoint {
  std::string subject_id;
  std::string date;
  Diagnosis group = Diagnosis::CN;
  double age = 0.0;
  double value = 0.0;
};

/// Complete-case points of one feature plus its per-group age fits.
struct FeatureData {
  std::string feature;
  std::vector<FeaturePoint> points;
  std::vector<GroupFit> fits;
};

FeatureData collect_feature(const FeatureTable& features, const std::vector<MatchedVisit>& cohort,
                            const std::string& feature);

/// Quartiles by linear interpolation between order statistics; whiskers reach the most
/// extreme values within 1.5 IQR of the box.
struct BoxSummary {
  std::size_t n = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;
};

BoxSummary box_summary(std::vector<double> values);

struct Figure {
  nlohmann::json data;
  std::string svg;
};

Figure emit_figure_data(const FeatureData& data, FigureKind kind);

}  // namespace neuroflow::analysis
