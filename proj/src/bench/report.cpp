// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/bench/bench.hpp"
#include "neuroflow/common/csv.hpp"
#include "neuroflow/common/error.hpp"
#include "neuroflow/common/io.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <map>
#include <sstream>

namespace neuroflow::bench {

using nlohmann::json;

const std::vector<std::string>& suite_checks(Suite s) {
  static const std::vector<std::string> intent{"ModalityEM", "TaskEM", "JointEM", "Invalid"};
  static const std::vector<std::string> preproc{"Syntax", "Tool", "InPath", "OutPath", "StepConst", "AllPass"};
  static const std::vector<std::string> integration{"RowEM",           "F1",            "PathValidity",
                                                    "ColCompleteness", "DuplicateFree", "AllPass"};
  switch (s) {
    case Suite::INTENT:
      return intent;
    case Suite::PREPROC:
      return preproc;
    case Suite::INTEGRATION:
      return integration;
  }
  return intent;
}

namespace {

std::size_t check_index(const BenchReport& r, const std::string& check) {
  const auto it = std::find(r.checks.begin(), r.checks.end(), check);
  if (it == r.checks.end()) throw NotFoundError("no check named " + check);
  return static_cast<std::size_t>(it - r.checks.begin());
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

double BenchReport::aggregate(const std::string& check) const {
  const auto i = check_index(*this, check);
  if (cases.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& c : cases) sum += c.values.at(i);
  return sum / static_cast<double>(cases.size());
}

std::vector<double> BenchReport::aggregates() const {
  std::vector<double> out;
  for (const auto& c : checks) out.push_back(aggregate(c));
  return out;
}

const CaseResult& BenchReport::result(const std::string& case_id) const {
  for (const auto& c : cases)
    if (c.case_id == case_id) return c;
  throw NotFoundError("no case named " + case_id);
}

double BenchReport::value(const std::string& case_id, const std::string& check) const {
  return result(case_id).values.at(check_index(*this, check));
}

json to_json(const BenchReport& r) {
  json cases = json::array();
  for (const auto& c : r.cases) {
    json values = json::object();
    for (std::size_t i = 0; i < r.checks.size(); ++i) values[r.checks[i]] = c.values.at(i);
    cases.push_back({{"case_id", c.case_id}, {"values", values}, {"detail", c.detail}});
  }
  json aggregates = json::object();
  for (const auto& check : r.checks) aggregates[check] = r.aggregate(check);
  return {{"suite", to_string(r.suite)}, {"backend_id", r.backend_id}, {"timestamp", r.timestamp},
          {"checks", r.checks},          {"cases", cases},             {"aggregates", aggregates}};
}

BenchReport report_from_json(const json& j) {
  BenchReport r;
  r.suite = parse_suite(j.at("suite").get<std::string>());
  r.backend_id = j.at("backend_id").get<std::string>();
  r.timestamp = j.at("timestamp").get<std::string>();
  r.checks = j.at("checks").get<std::vector<std::string>>();
  for (const auto& c : j.at("cases")) {
    CaseResult cr;
    cr.case_id = c.at("case_id").get<std::string>();
    cr.detail = c.value("detail", std::string{});
    for (const auto& check : r.checks) cr.values.push_back(c.at("values").at(check).get<double>());
    r.cases.push_back(std::move(cr));
  }
  return r;
}

std::string to_csv(const BenchReport& r) {
  std::vector<csv::Row> rows;
  csv::Row header{"case_id"};
  header.insert(header.end(), r.checks.begin(), r.checks.end());
  rows.push_back(header);
  for (const auto& c : r.cases) {
    csv::Row row{c.case_id};
    for (double v : c.values) row.push_back(format_value(v));
    rows.push_back(std::move(row));
  }
  csv::Row mean{"MEAN"};
  for (double v : r.aggregates()) mean.push_back(format_value(v));
  rows.push_back(std::move(mean));
  return csv::emit(rows);
}

fs::path default_reports_dir() { return default_bench_dir() / "reports"; }

fs::path write_report(const BenchReport& r, const fs::path& reports_root) {
  std::string stamp;
  for (char c : r.timestamp)
    if (c != ':' && c != '-' && c != '.') stamp += c;
  if (stamp.empty()) stamp = "report";
  fs::path dir = reports_root / stamp;
  for (int n = 2; fs::exists(dir); ++n) dir = reports_root / (stamp + "-" + std::to_string(n));
  fs::create_directories(dir);
  write_file_atomic(dir / "report.json", to_json(r).dump(2) + "\n");
  write_file_atomic(dir / "report.csv", to_csv(r));
  return dir;
}

std::string aggregate_csv(const std::vector<BenchReport>& reports) {
  std::vector<csv::Row> rows{{"suite", "backend_id", "cases", "check", "rate"}};
  for (const auto& r : reports)
    for (const auto& check : r.checks)
      rows.push_back({std::string(to_string(r.suite)), r.backend_id, std::to_string(r.cases.size()), check,
                      format_value(r.aggregate(check))});
  return csv::emit(rows);
}

std::string aggregate_text(const std::vector<BenchReport>& reports) {
  std::ostringstream out;
  for (const auto& r : reports) {
    out << to_string(r.suite) << " / " << r.backend_id << " (" << r.cases.size() << " cases)\n";
    for (const auto& check : r.checks)
      out << "  " << std::left << std::setw(16) << check << std::right << std::fixed << std::setprecision(1)
          << std::setw(7) << 100.0 * r.aggregate(check) << "%\n";
  }
  return out.str();
}

CorruptionOutcome check_corruption(const BenchReport& base, const BenchReport& corrupted,
                                   const std::string& corrupted_case_id, const Corruption& spec) {
  CorruptionOutcome o{corrupted_case_id, spec.base_case, spec.expect_false, {}, false};
  const auto& b = base.result(spec.base_case);
  const auto& c = corrupted.result(corrupted_case_id);
  if (base.checks != corrupted.checks) throw Error("reports cover different checks");

  std::set<std::string> allowed{spec.expect_false, "AllPass"};
  if (base.suite == Suite::INTEGRATION &&
      (spec.expect_false == "F1" || spec.expect_false == "ColCompleteness" || spec.expect_false == "DuplicateFree"))
    allowed.insert("RowEM");

  bool base_clean = true;
  for (std::size_t i = 0; i < base.checks.size(); ++i) {
    base_clean &= b.values[i] == 1.0;
    if (b.values[i] != c.values[i]) o.changed.push_back(base.checks[i]);
  }
  const bool intended_false = corrupted.value(corrupted_case_id, spec.expect_false) < 1.0;
  const bool only_allowed =
      std::all_of(o.changed.begin(), o.changed.end(), [&](const auto& ch) { return allowed.contains(ch); });
  o.ok = base_clean && intended_false && only_allowed && corrupted.value(corrupted_case_id, "AllPass") == 0.0;
  return o;
}

}  // namespace neuroflow::bench
