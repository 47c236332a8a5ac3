// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/bench/cases.hpp"
#include "neuroflow/planner/intent.hpp"
#include "neuroflow/toolkit/catalog.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace neuroflow::bench {

/// Check names of a suite, in report column order.
const std::vector<std::string>& suite_checks(Suite s);

struct CaseResult {
  std::string case_id;
  /// One value per check of the suite; pass/fail checks are 0 or 1.
  std::vector<double> values;
  std::string detail;
  bool operator==(const CaseResult&) const = default;
};

struct BenchReport {
  Suite suite = Suite::INTENT;
  std::string backend_id;
  std::string timestamp;
  std::vector<std::string> checks;
  std::vector<CaseResult> cases;

  /// Mean of the per-case values of one check; 0 for an empty report.
  double aggregate(const std::string& check) const;
  std::vector<double> aggregates() const;
  double value(const std::string& case_id, const std::string& check) const;
  const CaseResult& result(const std::string& case_id) const;
};

nlohmann::json to_json(const BenchReport& r);
BenchReport report_from_json(const nlohmann::json& j);
/// case_id + one column per check, then a MEAN row.
std::string to_csv(const BenchReport& r);
/// Writes <reports_root>/<timestamp>/report.{csv,json}; returns that directory.
std::filesystem::path write_report(const BenchReport& r, const std::filesystem::path& reports_root);
std::filesystem::path default_reports_dir();

/// Mean rate per check per (suite, backend), as CSV and as aligned text.
std::string aggregate_csv(const std::vector<BenchReport>& reports);
std::string aggregate_text(const std::vector<BenchReport>& reports);

// ---------------------------------------------------------------- intent

BenchReport run_intent_bench(const std::vector<IntentCase>& cases, const planner::BackendConfig& backend);
BenchReport run_intent_bench(const std::vector<IntentCase>& cases, planner::ChatBackend& backend,
                             int max_parse_retries);

// ---------------------------------------------------------------- preprocessing

class ScriptSource {
 public:
  virtual ~ScriptSource() = default;
  /// Script text for the case. Throws Error when nothing usable can be produced.
  virtual std::string generate(const PreprocCase& c) = 0;
  virtual std::string id() const = 0;
};

/// Tool adapter behind a "<modality>.<step>" label.
const toolkit::ToolAdapter& tool_for_label(const toolkit::TemplateCatalog& catalog, const std::string& label);

/// Expands the tool's script template against the case. Placeholders:
///   ${input:R}   first listing entry matching bench_inputs[R] (string body, unquoted)
///   ${inputs:R}  every match as a list literal
///   ${series:R}  distinct parent directories of the matches as (dir, BIDS name) pairs
///   ${output_root} ${subject} ${session}
/// Role globs let '*' cross '/'. Throws Error on an unknown placeholder or an unmatched role.
std::string instantiate_script_template(const toolkit::ToolAdapter& tool, const PreprocCase& c);

/// Deterministic generator: the catalog's script template.
class TemplateScriptSource : public ScriptSource {
 public:
  explicit TemplateScriptSource(const toolkit::TemplateCatalog& catalog) : catalog_(catalog) {}
  std::string generate(const PreprocCase& c) override;
  std::string id() const override { return "template"; }

 private:
  const toolkit::TemplateCatalog& catalog_;
};

/// Asks a chat backend for the script; the first fenced code block of the reply is used.
class ModelScriptSource : public ScriptSource {
 public:
  ModelScriptSource(const toolkit::TemplateCatalog& catalog, std::shared_ptr<planner::ChatBackend> backend)
      : catalog_(catalog), backend_(std::move(backend)) {}
  std::string generate(const PreprocCase& c) override;
  std::string id() const override { return backend_->id(); }
  std::vector<planner::ChatMessage> build_messages(const PreprocCase& c) const;

 private:
  const toolkit::TemplateCatalog& catalog_;
  std::shared_ptr<planner::ChatBackend> backend_;
};

struct BenchOptions {
  /// Scratch space for per-case directories; a fresh temp directory when empty.
  std::filesystem::path work_dir;
  double syntax_timeout_seconds = 60.0;
  double script_timeout_seconds = 120.0;
};

/// Throws ConfigError before running anything when a syntax_check_cmd is unavailable.
BenchReport run_preproc_bench(const std::vector<PreprocCase>& cases, ScriptSource& source,
                              const BenchOptions& opts = {});

// ---------------------------------------------------------------- integration

class IntegrationSource {
 public:
  virtual ~IntegrationSource() = default;
  /// Writes out_dir/final_data_list.csv for the materialized tree.
  virtual void produce(const IntegrationCase& c, const std::filesystem::path& tree_root,
                       const std::filesystem::path& out_dir) = 0;
  virtual std::string id() const = 0;
};

/// The built-in integrator, with paths relative to the tree root.
class IntegratorSource : public IntegrationSource {
 public:
  void produce(const IntegrationCase& c, const std::filesystem::path& tree_root,
               const std::filesystem::path& out_dir) override;
  std::string id() const override { return "integrator"; }
};

/// A model-written Python script run as `python3 <script> <out_csv>` inside the tree root.
class ModelIntegrationSource : public IntegrationSource {
 public:
  ModelIntegrationSource(std::shared_ptr<planner::ChatBackend> backend, BenchOptions opts = {})
      : backend_(std::move(backend)), opts_(std::move(opts)) {}
  void produce(const IntegrationCase& c, const std::filesystem::path& tree_root,
               const std::filesystem::path& out_dir) override;
  std::string id() const override { return backend_->id(); }
  std::vector<planner::ChatMessage> build_messages(const IntegrationCase& c) const;

 private:
  std::shared_ptr<planner::ChatBackend> backend_;
  BenchOptions opts_;
};

BenchReport run_integration_bench(const std::vector<IntegrationCase>& cases, IntegrationSource& source,
                                  const BenchOptions& opts = {});

// ---------------------------------------------------------------- corrupted variants

struct CorruptionOutcome {
  std::string case_id;
  std::string base_case;
  std::string expect_false;
  /// Checks whose value differs from the base case.
  std::vector<std::string> changed;
  bool ok = false;
};

/// A corrupted case is ok when its base case passes every check, the intended check is
/// false, and nothing else changed apart from AllPass and (for integration) RowEM when the
/// intended check is one RowEM implies.
CorruptionOutcome check_corruption(const BenchReport& base, const BenchReport& corrupted,
                                   const std::string& corrupted_case_id, const Corruption& spec);

}  // namespace neuroflow::bench
