// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/bench/bench.hpp"
#include "neuroflow/bench/metrics.hpp"
#include "neuroflow/common/error.hpp"
#include "neuroflow/common/io.hpp"
#include "neuroflow/executor/sandbox.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <sstream>

namespace neuroflow::bench {

namespace {

/// Per-run scratch space; a private temp directory is removed afterwards.
class Scratch {
 public:
  explicit Scratch(const fs::path& requested) {
    if (!requested.empty()) {
      root_ = requested;
      fs::create_directories(root_);
      return;
    }
    auto tmpl = (fs::temp_directory_path() / "neuroflow-bench-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw IoError("cannot create scratch directory under " + fs::temp_directory_path().string());
    root_ = tmpl;
    owned_ = true;
  }
  ~Scratch() {
    if (owned_) {
      std::error_code ec;
      fs::remove_all(root_, ec);
    }
  }
  Scratch(const Scratch&) = delete;
  Scratch& operator=(const Scratch&) = delete;

  fs::path fresh(const std::string& name) const {
    const auto dir = root_ / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
  }

 private:
  fs::path root_;
  bool owned_ = false;
};

double flag(bool b) { return b ? 1.0 : 0.0; }

std::string apply_text_mutations(std::string text, const std::vector<Mutation>& mutations, const std::string& case_id) {
  for (const auto& m : mutations) {
    if (m.duplicate_row) continue;
    if (text.find(m.find) == std::string::npos)
      throw ConfigError(case_id + ": mutation target not found: " + m.find);
    for (auto pos = text.find(m.find); pos != std::string::npos; pos = text.find(m.find, pos + m.replace.size()))
      text.replace(pos, m.find.size(), m.replace);
  }
  return text;
}

BenchReport empty_report(Suite suite, std::string backend_id) {
  BenchReport r;
  r.suite = suite;
  r.backend_id = std::move(backend_id);
  r.timestamp = now_iso8601();
  r.checks = suite_checks(suite);
  return r;
}

CaseResult failed(const std::string& case_id, std::size_t checks, std::string detail) {
  return {case_id, std::vector<double>(checks, 0.0), std::move(detail)};
}

template <typename Parse>
BenchReport intent_run(const std::vector<IntentCase>& cases, std::string backend_id, Parse parse) {
  auto report = empty_report(Suite::INTENT, std::move(backend_id));
  for (const auto& c : cases) {
    const auto outcome = parse(c.prompt);
    CaseResult r{c.case_id, {}, {}};
    if (!outcome.valid()) {
      // An invalid parse scores false on every exact-match column.
      r.values = {0.0, 0.0, 0.0, 1.0};
      r.detail = outcome.failure_reason.value_or("invalid");
    } else {
      const bool mod = outcome.intent->modalities == c.gold_modalities;
      const bool task = outcome.intent->tasks == c.gold_tasks;
      r.values = {flag(mod), flag(task), flag(mod && task), 0.0};
      if (!(mod && task)) r.detail = planner::to_json(*outcome.intent).dump();
    }
    report.cases.push_back(std::move(r));
  }
  return report;
}

}  // namespace

BenchReport run_intent_bench(const std::vector<IntentCase>& cases, const planner::BackendConfig& backend) {
  backend.check();
  return intent_run(cases, backend.id(), [&](const std::string& p) { return planner::parse_intent(p, backend); });
}

BenchReport run_intent_bench(const std::vector<IntentCase>& cases, planner::ChatBackend& backend,
                             int max_parse_retries) {
  return intent_run(cases, backend.id(),
                    [&](const std::string& p) { return planner::parse_intent(p, backend, max_parse_retries); });
}

BenchReport run_preproc_bench(const std::vector<PreprocCase>& cases, ScriptSource& source, const BenchOptions& opts) {
  for (const auto& c : cases)
    if (find_executable(c.syntax_check_cmd.front()).empty())
      throw ConfigError("syntax check command unavailable: " + c.syntax_check_cmd.front() + " (case " + c.case_id + ")");

  const Scratch scratch(opts.work_dir);
  auto report = empty_report(Suite::PREPROC, source.id());
  for (const auto& c : cases) {
    std::string script;
    try {
      script = source.generate(c);
    } catch (const std::exception& e) {
      report.cases.push_back(failed(c.case_id, report.checks.size(), std::string("generation failed: ") + e.what()));
      continue;
    }
    script = apply_text_mutations(std::move(script), c.mutations, c.case_id);

    const auto dir = scratch.fresh(c.case_id);
    const auto script_path = dir / "script.py";
    write_file(script_path, script);
    executor::SandboxSpec spec;
    for (const auto& arg : c.syntax_check_cmd) spec.argv.push_back(arg == "{script}" ? script_path.string() : arg);
    spec.cwd = dir;
    spec.timeout_seconds = opts.syntax_timeout_seconds;
    spec.stdout_log = dir / "syntax.stdout";
    spec.stderr_log = dir / "syntax.stderr";
    const auto run = executor::sandbox_exec(spec);

    std::vector<std::string> notes;
    const bool syntax = run.exit_code == 0 && !run.timed_out;
    if (!syntax) notes.push_back("syntax: " + trim(run.stderr_tail));

    bool tool = true;
    for (const auto& token : c.expected_tool_tokens) {
      if (script.find(token) != std::string::npos) continue;
      tool = false;
      notes.push_back("missing tool token: " + token);
    }

    std::size_t inputs = 0, outputs = 0;
    bool in_ok = true, out_ok = true;
    for (const auto& lit : extract_path_literals(script)) {
      if (lit.is_output) {
        ++outputs;
        if (!under_root(lit.text, c.expected_output_root)) {
          out_ok = false;
          notes.push_back("output outside root: " + lit.text);
        }
      } else {
        ++inputs;
        if (!grounded_in(lit.text, c.directory_tree)) {
          in_ok = false;
          notes.push_back("ungrounded input: " + lit.text);
        }
      }
    }
    // A script that names no input (or no output) cannot be grounded.
    if (inputs == 0) notes.push_back("no input path literal");
    if (outputs == 0) notes.push_back("no output path literal");
    const bool in_path = in_ok && inputs > 0;
    const bool out_path = out_ok && outputs > 0;

    bool step_const = true;
    for (const auto& r : validator::check_step_constraints(script, c.constraints)) {
      if (r.passed) continue;
      step_const = false;
      notes.push_back("constraint failed: " + r.label);
    }

    const bool all = syntax && tool && in_path && out_path && step_const;
    std::ostringstream detail;
    for (std::size_t i = 0; i < notes.size(); ++i) detail << (i ? "; " : "") << notes[i];
    report.cases.push_back(
        {c.case_id, {flag(syntax), flag(tool), flag(in_path), flag(out_path), flag(step_const), flag(all)}, detail.str()});
  }
  return report;
}

BenchReport run_integration_bench(const std::vector<IntegrationCase>& cases, IntegrationSource& source,
                                  const BenchOptions& opts) {
  const Scratch scratch(opts.work_dir);
  const auto aliases = integrator::ColumnAliases::load_default();
  auto report = empty_report(Suite::INTEGRATION, source.id());
  for (const auto& c : cases) {
    const auto dir = scratch.fresh(c.case_id);
    const auto tree = dir / "tree";
    const auto out = dir / "out";
    for (const auto& f : c.simulated_tree) write_file(tree / f, f + "\n");
    fs::create_directories(out);

    std::string text;
    try {
      source.produce(c, tree, out);
      text = read_file(out / integrator::kManifestFile);
    } catch (const std::exception& e) {
      report.cases.push_back(failed(c.case_id, report.checks.size(), std::string("integration failed: ") + e.what()));
      continue;
    }
    text = apply_text_mutations(std::move(text), c.mutations, c.case_id);
    for (const auto& m : c.mutations) {
      if (!m.duplicate_row) continue;
      auto rows = csv::parse(text);
      const auto at = *m.duplicate_row + 1;
      if (at >= rows.size()) throw ConfigError(c.case_id + ": duplicate_row beyond the produced table");
      rows.insert(rows.begin() + static_cast<std::ptrdiff_t>(at) + 1, rows[at]);
      text = csv::emit(rows);
    }

    CanonicalTable produced;
    try {
      produced = canonical_table(csv::parse_table(text), aliases);
    } catch (const std::exception& e) {
      report.cases.push_back(failed(c.case_id, report.checks.size(), std::string("unreadable manifest: ") + e.what()));
      continue;
    }
    const auto gold = canonical_table(csv::parse_table(read_file(c.gold_csv)), aliases);

    std::vector<std::string> notes;
    const bool row_em = produced == gold;
    if (!row_em) notes.push_back("rows differ from gold");

    std::set<integrator::SubjectKey> pred_keys, gold_keys;
    std::size_t produced_rows = 0;
    for (const auto& r : produced.rows) {
      pred_keys.insert({r[0], r[1]});
      ++produced_rows;
    }
    for (const auto& r : gold.rows) gold_keys.insert({r[0], r[1]});
    const auto pairs = pair_f1(pred_keys, gold_keys);
    const bool duplicate_free = pred_keys.size() == produced_rows;
    if (!duplicate_free) notes.push_back("duplicate (SubjectID, Date) rows");

    std::size_t non_empty = 0, existing = 0;
    for (const auto& r : produced.rows)
      for (std::size_t i = 2; i < r.size(); ++i) {
        if (r[i].empty()) continue;
        ++non_empty;
        const fs::path p(r[i]);
        if (fs::exists(p.is_absolute() ? p : tree / p))
          ++existing;
        else
          notes.push_back("missing file: " + r[i]);
      }
    // No paths at all means none is invalid.
    const double path_validity =
        non_empty ? static_cast<double>(existing) / static_cast<double>(non_empty) : 1.0;

    std::size_t matched = 0;
    for (const auto& t : c.required_triples) {
      const auto want = cell(gold, t.subject_id, t.date, t.column);
      const auto got = cell(produced, t.subject_id, t.date, t.column);
      if (want && got && *want == *got)
        ++matched;
      else
        notes.push_back("cell mismatch: " + t.subject_id + "/" + t.date + "/" + t.column);
    }
    const double completeness = static_cast<double>(matched) / static_cast<double>(c.required_triples.size());

    const bool all = row_em && pairs.perfect() && existing == non_empty &&
                     matched == c.required_triples.size() && duplicate_free;
    std::ostringstream detail;
    for (std::size_t i = 0; i < notes.size(); ++i) detail << (i ? "; " : "") << notes[i];
    report.cases.push_back({c.case_id,
                            {flag(row_em), pairs.f1, path_validity, completeness, flag(duplicate_free), flag(all)},
                            detail.str()});
  }
  return report;
}

}  // namespace neuroflow::bench
