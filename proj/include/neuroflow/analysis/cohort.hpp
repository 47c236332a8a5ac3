// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/analysis/stats.hpp"
#include "neuroflow/integrator/manifest.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace neuroflow::analysis {

enum class Diagnosis { CN, MCI, AD };
enum class Sex { F, M };

std::string_view to_string(Diagnosis d);
std::string_view to_string(Sex s);
Diagnosis parse_diagnosis(std::string_view token);
Sex parse_sex(std::string_view token);

struct LabelRow {
  std::string subject_id;
  std::string reference_date;  // YYYY-MM-DD
  Diagnosis diagnosis = Diagnosis::CN;
  double age = 0.0;
  Sex sex = Sex::F;
};

struct Scan {
  std::string subject_id;
  std::string date;
};

struct MatchedVisit {
  LabelRow label;
  std::string scan_date;
  int mismatch_days = 0;
};

struct MatchResult {
  std::vector<MatchedVisit> matched;
  std::vector<LabelRow> unmatched;
};

inline constexpr int kDefaultWindowDays = 30;

/// Signed day count b - a between two YYYY-MM-DD dates.
int days_between(const std::string& a, const std::string& b);

/// Nearest scan within the window per label row; ties go to the earlier scan.
MatchResult match_visits(const std::vector<LabelRow>& labels, const std::vector<Scan>& scans,
                         int window_days = kDefaultWindowDays);

/// Columns SubjectID, RefDate, Diagnosis, Age, Sex (aliases accepted).
std::vector<LabelRow> parse_labels(std::string_view csv_text);
std::vector<LabelRow> load_labels(const std::filesystem::path& path);

/// Numeric features keyed by (SubjectID, Date). Empty, NA and NaN cells are missing.
struct FeatureTable {
  std::vector<std::string> features;
  std::vector<integrator::SubjectKey> keys;
  std::vector<std::vector<std::optional<double>>> values;  // [row][feature]

  std::vector<Scan> scans() const;
  std::optional<std::size_t> row(const integrator::SubjectKey& key) const;
  std::size_t feature_index(const std::string& name) const;
};

FeatureTable parse_features(std::string_view csv_text);
FeatureTable load_features(const std::filesystem::path& path);

/// "<response> ~ <covariate> + ...". The response is a glob over feature names.
struct Formula {
  std::string response;
  std::vector<std::string> covariates;  // age, sex, diagnosis
};

Formula parse_formula(std::string_view text);

struct Design {
  Eigen::MatrixXd x;
  std::vector<std::string> terms;
};

/// Intercept, then covariates in formula order. Sex baseline F, diagnosis reference CN.
Design encode_design(const std::vector<MatchedVisit>& rows, const Formula& formula);

struct FeatureModel {
  std::string feature;
  OlsResult fit;
};

struct StatsReport {
  std::vector<FeatureModel> models;
  /// BH across features, one family per term; adjusted_p is in model order.
  std::map<std::string, FdrResult> fdr;
  std::vector<std::string> skipped;  // "<feature>: <reason>"

  double p_fdr(std::size_t model, const std::string& term) const;
};

/// Complete-case fit per feature matching the response glob, then FDR.
StatsReport fit_feature_models(const FeatureTable& features, const std::vector<MatchedVisit>& cohort,
                               const Formula& formula);

/// feature, term, n, beta, se, t, p, p_fdr, degenerate
std::string stats_report_csv(const StatsReport& report);

struct GroupFit {
  Diagnosis group;
  OlsResult fit;  // terms Intercept, age
};

/// value ~ age within each diagnosis group; groups with fewer than 3 complete rows are skipped.
std::vector<GroupFit> group_age_regressions(const FeatureTable& features, const std::vector<MatchedVisit>& cohort,
                                            const std::string& feature);

}  // namespace neuroflow::analysis
