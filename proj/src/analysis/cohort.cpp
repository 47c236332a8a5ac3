// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/analysis/cohort.hpp"
#include "neuroflow/common/csv.hpp"
#include "neuroflow/common/error.hpp"
#include "neuroflow/common/io.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>

namespace neuroflow::analysis {

std::string_view to_string(Diagnosis d) {
  switch (d) {
    case Diagnosis::CN:
      return "CN";
    case Diagnosis::MCI:
      return "MCI";
    case Diagnosis::AD:
      return "AD";
  }
  return "CN";
}

std::string_view to_string(Sex s) { return s == Sex::M ? "M" : "F"; }

Diagnosis parse_diagnosis(std::string_view token) {
  const auto t = to_upper(trim(token));
  if (t == "CN") return Diagnosis::CN;
  if (t == "MCI") return Diagnosis::MCI;
  if (t == "AD") return Diagnosis::AD;
  throw ConfigError("diagnosis must be CN, MCI or AD: " + std::string(token));
}

Sex parse_sex(std::string_view token) {
  const auto t = to_upper(trim(token));
  if (t == "F" || t == "FEMALE") return Sex::F;
  if (t == "M" || t == "MALE") return Sex::M;
  throw ConfigError("sex must be F or M: " + std::string(token));
}

namespace {

std::chrono::sys_days to_days(const std::string& date) {
  const auto norm = integrator::normalize_date(date);
  if (!norm) throw ConfigError("not a calendar date: " + date);
  const int y = std::stoi(norm->substr(0, 4));
  const unsigned m = static_cast<unsigned>(std::stoi(norm->substr(5, 2)));
  const unsigned d = static_cast<unsigned>(std::stoi(norm->substr(8, 2)));
  return std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d};
}

std::string require_date(const std::string& text, const std::string& what) {
  const auto norm = integrator::normalize_date(trim(text));
  if (!norm) throw ConfigError(what + " is not a calendar date: " + text);
  return *norm;
}

/// First header column whose lower-cased name is one of `names`, or whose alias-canonical form is `canonical`.
int find_column(const csv::Table& t, const integrator::ColumnAliases& aliases, std::initializer_list<const char*> names,
                const char* canonical) {
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    const auto lower = to_lower(trim(t.header[i]));
    for (const char* n : names)
      if (lower == to_lower(n)) return static_cast<int>(i);
  }
  if (canonical)
    for (std::size_t i = 0; i < t.header.size(); ++i)
      if (aliases.canonicalize(trim(t.header[i])) == canonical) return static_cast<int>(i);
  return -1;
}

int require_column(const csv::Table& t, const integrator::ColumnAliases& aliases,
                   std::initializer_list<const char*> names, const char* canonical, const char* what) {
  const int c = find_column(t, aliases, names, canonical);
  if (c < 0) throw ConfigError(std::string("missing column ") + what);
  return c;
}

const std::string& field(const csv::Row& row, int column, std::size_t line) {
  if (column >= static_cast<int>(row.size()))
    throw ConfigError("row " + std::to_string(line) + " is shorter than the header");
  return row[static_cast<std::size_t>(column)];
}

std::optional<double> parse_cell(const std::string& raw, std::size_t line, const std::string& column) {
  const auto text = trim(raw);
  const auto lower = to_lower(text);
  if (text.empty() || lower == "na" || lower == "nan" || lower == "n/a") return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size()) throw ConfigError("row " + std::to_string(line) + ", " + column + ": not a number: " + text);
  if (!std::isfinite(v)) throw ConfigError("row " + std::to_string(line) + ", " + column + ": non-finite value");
  return v;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void append_covariate(const std::string& cov, std::vector<std::string>& terms) {
  if (cov == "age") {
    terms.push_back("age");
  } else if (cov == "sex") {
    terms.push_back("sex[M]");
  } else if (cov == "diagnosis") {
    terms.push_back("dx[MCI]");
    terms.push_back("dx[AD]");
  } else {
    throw ConfigError("unsupported covariate '" + cov + "' (age, sex, diagnosis)");
  }
}

}  // namespace

int days_between(const std::string& a, const std::string& b) {
  return static_cast<int>((to_days(b) - to_days(a)).count());
}

MatchResult match_visits(const std::vector<LabelRow>& labels, const std::vector<Scan>& scans, int window_days) {
  if (window_days <= 0) throw ConfigError("matching window must be positive");
  std::map<std::string, std::set<std::chrono::sys_days>> by_subject;
  for (const auto& s : scans) by_subject[s.subject_id].insert(to_days(s.date));

  MatchResult out;
  for (const auto& label : labels) {
    const auto ref = to_days(label.reference_date);
    const auto it = by_subject.find(label.subject_id);
    std::optional<std::chrono::sys_days> best;
    int best_gap = 0;
    if (it != by_subject.end())
      for (const auto& d : it->second) {  // ascending, so a strict improvement keeps the earlier scan on ties
        const int gap = std::abs(static_cast<int>((d - ref).count()));
        if (gap > window_days) continue;
        if (!best || gap < best_gap) {
          best = d;
          best_gap = gap;
        }
      }
    if (!best) {
      out.unmatched.push_back(label);
      continue;
    }
    const std::chrono::year_month_day ymd{*best};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    out.matched.push_back({label, buf, best_gap});
  }
  return out;
}

std::vector<LabelRow> parse_labels(std::string_view csv_text) {
  const auto t = csv::parse_table(csv_text);
  const auto aliases = integrator::ColumnAliases::load_default();
  const int subject = require_column(t, aliases, {"SubjectID"}, "SubjectID", "SubjectID");
  const int date = require_column(t, aliases, {"RefDate", "ReferenceDate"}, "Date", "RefDate");
  const int dx = require_column(t, aliases, {"Diagnosis", "DX", "DX_bl"}, nullptr, "Diagnosis");
  const int age = require_column(t, aliases, {"Age"}, nullptr, "Age");
  const int sex = require_column(t, aliases, {"Sex", "Gender", "PTGENDER"}, nullptr, "Sex");

  std::vector<LabelRow> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const auto line = i + 2;
    LabelRow r;
    r.subject_id = trim(field(row, subject, line));
    if (r.subject_id.empty()) throw ConfigError("row " + std::to_string(line) + ": empty SubjectID");
    r.reference_date = require_date(field(row, date, line), "row " + std::to_string(line) + " RefDate");
    r.diagnosis = parse_diagnosis(field(row, dx, line));
    r.sex = parse_sex(field(row, sex, line));
    const auto a = parse_cell(field(row, age, line), line, "Age");
    if (!a || !(*a > 0.0)) throw ConfigError("row " + std::to_string(line) + ": Age must be a positive number");
    r.age = *a;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<LabelRow> load_labels(const std::filesystem::path& path) { return parse_labels(read_file(path)); }

std::vector<Scan> FeatureTable::scans() const {
  std::vector<Scan> out;
  for (const auto& k : keys) out.push_back({k.subject_id, k.date});
  return out;
}

std::optional<std::size_t> FeatureTable::row(const integrator::SubjectKey& key) const {
  const auto it = std::lower_bound(keys.begin(), keys.end(), key);
  if (it == keys.end() || *it != key) return std::nullopt;
  return static_cast<std::size_t>(it - keys.begin());
}

std::size_t FeatureTable::feature_index(const std::string& name) const {
  const auto it = std::find(features.begin(), features.end(), name);
  if (it == features.end()) throw NotFoundError("no feature named " + name);
  return static_cast<std::size_t>(it - features.begin());
}

FeatureTable parse_features(std::string_view csv_text) {
  const auto t = csv::parse_table(csv_text);
  const auto aliases = integrator::ColumnAliases::load_default();
  const int subject = require_column(t, aliases, {"SubjectID"}, "SubjectID", "SubjectID");
  const int date = require_column(t, aliases, {"Date"}, "Date", "Date");

  FeatureTable out;
  std::vector<std::size_t> feature_cols;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (static_cast<int>(i) == subject || static_cast<int>(i) == date) continue;
    const auto name = trim(t.header[i]);
    if (name.empty()) throw ConfigError("feature column " + std::to_string(i + 1) + " has no name");
    if (std::find(out.features.begin(), out.features.end(), name) != out.features.end())
      throw ConfigError("duplicate feature column " + name);
    out.features.push_back(name);
    feature_cols.push_back(i);
  }

  std::map<integrator::SubjectKey, std::vector<std::optional<double>>> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const auto line = i + 2;
    integrator::SubjectKey key{trim(field(row, subject, line)),
                               require_date(field(row, date, line), "row " + std::to_string(line) + " Date")};
    if (key.subject_id.empty()) throw ConfigError("row " + std::to_string(line) + ": empty SubjectID");
    std::vector<std::optional<double>> values;
    for (std::size_t f = 0; f < feature_cols.size(); ++f)
      values.push_back(parse_cell(field(row, static_cast<int>(feature_cols[f]), line), line, out.features[f]));
    if (!rows.emplace(key, std::move(values)).second)
      throw ConfigError("duplicate feature row " + key.subject_id + " " + key.date);
  }
  for (auto& [k, v] : rows) {
    out.keys.push_back(k);
    out.values.push_back(std::move(v));
  }
  return out;
}

FeatureTable load_features(const std::filesystem::path& path) { return parse_features(read_file(path)); }

Formula parse_formula(std::string_view text) {
  const auto tilde = text.find('~');
  if (tilde == std::string_view::npos || text.find('~', tilde + 1) != std::string_view::npos)
    throw ConfigError("formula needs exactly one '~': " + std::string(text));
  Formula f;
  f.response = trim(text.substr(0, tilde));
  if (f.response.empty()) throw ConfigError("formula has no response");
  const auto rhs = text.substr(tilde + 1);
  for (std::size_t start = 0; start <= rhs.size();) {
    auto end = rhs.find('+', start);
    if (end == std::string_view::npos) end = rhs.size();
    const auto raw = rhs.substr(start, end - start);
    start = end + 1;
    auto term = to_lower(trim(raw));
    if (term == "dx") term = "diagnosis";
    if (term == "1") continue;
    if (term != "age" && term != "sex" && term != "diagnosis")
      throw ConfigError("unsupported covariate '" + trim(raw) + "' (age, sex, diagnosis)");
    if (std::find(f.covariates.begin(), f.covariates.end(), term) != f.covariates.end())
      throw ConfigError("covariate listed twice: " + term);
    f.covariates.push_back(term);
  }
  return f;
}

Design encode_design(const std::vector<MatchedVisit>& rows, const Formula& formula) {
  Design d;
  d.terms.push_back("Intercept");
  for (const auto& c : formula.covariates) append_covariate(c, d.terms);

  d.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d.terms.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& l = rows[i].label;
    const auto r = static_cast<Eigen::Index>(i);
    Eigen::Index c = 0;
    d.x(r, c++) = 1.0;
    for (const auto& cov : formula.covariates) {
      if (cov == "age") {
        d.x(r, c++) = l.age;
      } else if (cov == "sex") {
        d.x(r, c++) = l.sex == Sex::M ? 1.0 : 0.0;
      } else {
        d.x(r, c++) = l.diagnosis == Diagnosis::MCI ? 1.0 : 0.0;
        d.x(r, c++) = l.diagnosis == Diagnosis::AD ? 1.0 : 0.0;
      }
    }
  }
  return d;
}

double StatsReport::p_fdr(std::size_t model, const std::string& term) const {
  const auto it = fdr.find(term);
  if (it == fdr.end()) throw NotFoundError("no FDR family for term " + term);
  return it->second.adjusted_p.at(model);
}

StatsReport fit_feature_models(const FeatureTable& features, const std::vector<MatchedVisit>& cohort,
                               const Formula& formula) {
  StatsReport report;
  bool any = false;
  for (std::size_t f = 0; f < features.features.size(); ++f) {
    const auto& name = features.features[f];
    if (::fnmatch(formula.response.c_str(), name.c_str(), 0) != 0) continue;
    any = true;
    std::vector<MatchedVisit> rows;
    std::vector<double> y;
    for (const auto& v : cohort) {
      const auto r = features.row({v.label.subject_id, v.scan_date});
      if (!r || !features.values[*r][f]) continue;
      rows.push_back(v);
      y.push_back(*features.values[*r][f]);
    }
    const auto design = encode_design(rows, formula);
    if (rows.size() <= design.terms.size()) {
      report.skipped.push_back(name + ": " + std::to_string(rows.size()) + " complete rows for " +
                               std::to_string(design.terms.size()) + " terms");
      continue;
    }
    try {
      report.models.push_back({name, ols_fit(design.x, Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())), design.terms)});
    } catch (const RankDeficientError& e) {
      report.skipped.push_back(name + ": " + e.what());
    }
  }
  if (!any) throw ConfigError("formula response '" + formula.response + "' matches no feature column");

  if (!report.models.empty())
    for (const auto& term : report.models.front().fit.terms) {
      std::vector<double> p;
      for (const auto& m : report.models) p.push_back(m.fit.p[m.fit.index(term)]);
      report.fdr[term] = bh_fdr(p);
    }
  return report;
}

std::string stats_report_csv(const StatsReport& report) {
  std::vector<csv::Row> rows{{"feature", "term", "n", "beta", "se", "t", "p", "p_fdr", "degenerate"}};
  for (std::size_t m = 0; m < report.models.size(); ++m) {
    const auto& fit = report.models[m].fit;
    for (std::size_t j = 0; j < fit.terms.size(); ++j)
      rows.push_back({report.models[m].feature, fit.terms[j], std::to_string(fit.n), format_number(fit.beta[j]),
                      format_number(fit.se[j]), format_number(fit.t[j]), format_number(fit.p[j]),
                      format_number(report.p_fdr(m, fit.terms[j])), fit.degenerate ? "true" : "false"});
  }
  return csv::emit(rows);
}

std::vector<GroupFit> group_age_regressions(const FeatureTable& features, const std::vector<MatchedVisit>& cohort,
                                            const std::string& feature) {
  const auto f = features.feature_index(feature);
  std::vector<GroupFit> out;
  for (Diagnosis g : {Diagnosis::CN, Diagnosis::MCI, Diagnosis::AD}) {
    std::vector<double> age, y;
    for (const auto& v : cohort) {
      if (v.label.diagnosis != g) continue;
      const auto r = features.row({v.label.subject_id, v.scan_date});
      if (!r || !features.values[*r][f]) continue;
      age.push_back(v.label.age);
      y.push_back(*features.values[*r][f]);
    }
    if (y.size() < 3) continue;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(y.size()), 2);
    for (std::size_t i = 0; i < y.size(); ++i) {
      x(static_cast<Eigen::Index>(i), 0) = 1.0;
      x(static_cast<Eigen::Index>(i), 1) = age[i];
    }
    try {
      out.push_back({g, ols_fit(x, Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())),
                                {"Intercept", "age"})});
    } catch (const RankDeficientError&) {
      // Every subject in the group has the same age; there is no slope to report.
    }
  }
  return out;
}

}  // namespace neuroflow::analysis
