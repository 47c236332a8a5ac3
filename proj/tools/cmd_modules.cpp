// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include "neuroflow/analysis/pipeline.hpp"
#include "neuroflow/bench/bench.hpp"
#include "neuroflow/common/csv.hpp"
#include "neuroflow/common/io.hpp"
#include "neuroflow/common/types.hpp"
#include "neuroflow/ensemble/fusion.hpp"
#include "neuroflow/gateway/server.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <iostream>
#include <memory>

namespace neuroflow::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// "rule" (or empty) selects the rule-based/template defaults; anything else is a backend JSON file.
planner::BackendConfig backend_arg(const std::string& value) {
  const auto v = to_lower(trim(value));
  if (v.empty() || v == "rule" || v == "rule_based") return {};
  if (!fs::is_regular_file(value)) throw UsageError("--backend must be 'rule' or a backend JSON file: " + value);
  const json doc = json::parse(read_file(value), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw UsageError(value + " is not a JSON object");
  auto b = planner::backend_from_json(doc.contains("backend") ? doc.at("backend") : doc);
  b.check();
  return b;
}

bench::BenchReport run_suite(bench::Suite suite, const fs::path& cases_dir, const planner::BackendConfig& backend,
                             const toolkit::TemplateCatalog& catalog) {
  const bool model = backend.kind == planner::BackendKind::HTTP_CHAT;
  switch (suite) {
    case bench::Suite::INTENT:
      return bench::run_intent_bench(bench::load_intent_cases(cases_dir), backend);
    case bench::Suite::PREPROC: {
      const auto cases = bench::load_preproc_cases(cases_dir);
      if (model) {
        bench::ModelScriptSource source(catalog, std::make_shared<planner::HttpChatBackend>(backend));
        return bench::run_preproc_bench(cases, source);
      }
      bench::TemplateScriptSource source(catalog);
      return bench::run_preproc_bench(cases, source);
    }
    case bench::Suite::INTEGRATION: {
      const auto cases = bench::load_integration_cases(cases_dir);
      if (model) {
        bench::ModelIntegrationSource source(std::make_shared<planner::HttpChatBackend>(backend));
        return bench::run_integration_bench(cases, source);
      }
      bench::IntegratorSource source;
      return bench::run_integration_bench(cases, source);
    }
  }
  throw UsageError("unknown suite");
}

std::string logits_csv(const ensemble::LogitTable& t) {
  csv::Row header{"subject_id", "label"};
  header.insert(header.end(), t.columns.begin(), t.columns.end());
  std::vector<csv::Row> rows{header};
  for (std::size_t i = 0; i < t.size(); ++i) {
    csv::Row row{t.subject_ids[i], std::to_string(t.labels[i])};
    for (const auto& v : t.values[i]) {
      char buf[32] = "";
      if (v) std::snprintf(buf, sizeof buf, "%.9g", *v);
      row.emplace_back(buf);
    }
    rows.push_back(std::move(row));
  }
  return csv::emit(rows);
}

}  // namespace

void add_bench_command(CLI::App& app, Context& ctx) {
  auto suite = std::make_shared<std::string>();
  auto cases = std::make_shared<std::string>();
  auto backend = std::make_shared<std::string>("rule");
  auto reports = std::make_shared<std::string>();
  auto corrupted = std::make_shared<std::string>();
  auto no_write = std::make_shared<bool>(false);
  auto* sub = app.add_subcommand("bench", "Score a bundled or custom benchmark suite");
  sub->add_option("suite", *suite, "intent, preproc or integration")
      ->required()
      ->check(CLI::IsMember({"intent", "preproc", "integration"}));
  sub->add_option("--cases", *cases, "Case directory (default: bundled suite)")->check(CLI::ExistingDirectory);
  sub->add_option("--backend", *backend, "'rule' or a backend JSON file (http backends score model output)")
      ->capture_default_str();
  sub->add_option("--reports", *reports, "Reports root (default: bench/reports)");
  sub->add_option("--corrupted", *corrupted, "Also score corrupted variants from this directory against the base run")
      ->check(CLI::ExistingDirectory);
  sub->add_flag("--no-write", *no_write, "Print aggregates without writing report files");
  sub->callback([&ctx, suite, cases, backend, reports, corrupted, no_write] {
    const auto s = bench::parse_suite(*suite);
    const auto b = backend_arg(*backend);
    const auto catalog = toolkit::TemplateCatalog::load_default();
    const fs::path dir = cases->empty() ? bench::default_cases_dir(s) : fs::path(*cases);
    const auto report = run_suite(s, dir, b, catalog);
    std::cout << bench::aggregate_text({report});
    if (!*no_write) {
      const auto where = bench::write_report(report, reports->empty() ? bench::default_reports_dir() : fs::path(*reports));
      std::cout << "report: " << where.string() << "\n";
    }
    if (corrupted->empty()) return;
    if (s == bench::Suite::INTENT) throw UsageError("corrupted variants exist for preproc and integration only");
    const auto bad = run_suite(s, *corrupted, b, catalog);
    std::vector<bench::Corruption> specs;
    if (s == bench::Suite::PREPROC)
      for (const auto& c : bench::load_preproc_cases(*corrupted)) specs.push_back(c.corruption.value_or(bench::Corruption{}));
    else
      for (const auto& c : bench::load_integration_cases(*corrupted))
        specs.push_back(c.corruption.value_or(bench::Corruption{}));
    for (std::size_t i = 0; i < bad.cases.size(); ++i) {
      if (specs[i].base_case.empty()) throw UsageError(bad.cases[i].case_id + " has no corruption block");
      const auto o = bench::check_corruption(report, bad, bad.cases[i].case_id, specs[i]);
      std::string changed;
      for (const auto& c : o.changed) changed += (changed.empty() ? "" : ",") + c;
      std::cout << (o.ok ? "ok   " : "FAIL ") << o.case_id << " (base " << o.base_case << ", expect " << o.expect_false
                << " false; changed " << changed << ")\n";
      if (!o.ok) ctx.exit_code = kExitHalted;
    }
  });
}

void add_stats_command(CLI::App& app, Context&) {
  auto opts = std::make_shared<analysis::StatsOptions>();
  auto labels = std::make_shared<std::string>();
  auto features = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto* sub = app.add_subcommand("stats", "Match visits, fit per-feature OLS with FDR, and emit figure data");
  sub->add_option("--labels", *labels, "Clinical labels CSV")->required()->check(CLI::ExistingFile);
  sub->add_option("--features", *features, "Per-scan feature CSV (subject_id, date, features...)")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--formula", opts->formula, "'<feature glob> ~ covariates'")->capture_default_str();
  sub->add_option("--out", *out, "Output directory")->required();
  sub->add_option("--window-days", opts->window_days, "Scan-to-visit matching window")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--figure", opts->figure_features, "Feature to draw (repeatable; default: all)");
  sub->callback([opts, labels, features, out] {
    opts->labels_csv = *labels;
    opts->features_csv = *features;
    opts->out_dir = *out;
    const auto run = analysis::run_stats(*opts);
    std::cout << "labels " << run.labels << ", matched " << run.matched << ", unmatched " << run.unmatched << "\n";
    std::cout << "models " << run.report.models.size() << ", skipped " << run.report.skipped.size() << "\n";
    for (const auto& s : run.report.skipped) std::cout << "  skipped " << s << "\n";
    for (const auto& p : run.written) std::cout << "wrote " << p.string() << "\n";
  });
}

void add_stack_command(CLI::App& app, Context&) {
  auto logits = std::make_shared<std::string>();
  auto config = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto seed = std::make_shared<std::uint64_t>(0);
  auto opts = std::make_shared<ensemble::FusionOptions>();
  auto cohort = std::make_shared<std::string>("union");
  auto synthetic = std::make_shared<int>(0);
  auto* sub = app.add_subcommand("stack", "Cross-validated stacking of per-model logits against averaging baselines");
  auto* from_file = sub->add_option("--logits", *logits, "Logit CSV (subject_id, label, <modality>.<model>...)")
                        ->check(CLI::ExistingFile);
  auto* from_synth = sub->add_option("--synthetic", *synthetic, "Generate a seeded synthetic cohort of N subjects instead")
                         ->check(CLI::PositiveNumber);
  from_file->excludes(from_synth);
  sub->add_option("--config", *config, "smri, pet, smri_pet or four")->required();
  sub->add_option("--seed", *seed, "Fold, oversampling and initialization seed")->capture_default_str();
  sub->add_option("--out", *out, "Output directory")->required();
  sub->add_option("--folds", opts->folds, "Stratified folds")->capture_default_str()->check(CLI::Range(2, 100));
  sub->add_option("--cohort", *cohort, "union or complete")->capture_default_str();
  sub->add_option("--epochs", opts->hyper.epochs, "Gradient-descent epochs")->capture_default_str()->check(CLI::NonNegativeNumber);
  sub->add_option("--learning-rate", opts->hyper.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
  sub->callback([logits, config, out, seed, opts, cohort, synthetic] {
    ensemble::Configuration c;
    try {
      c = ensemble::parse_configuration(*config);
      opts->cohort = ensemble::parse_cohort_mode(*cohort);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
    if (logits->empty() && *synthetic == 0) throw UsageError("one of --logits or --synthetic is required");
    opts->fold_seed = *seed;
    opts->hyper.seed = *seed;
    fs::create_directories(*out);
    ensemble::LogitTable table;
    if (*synthetic > 0) {
      ensemble::SyntheticSpec spec;
      spec.subjects = *synthetic;
      spec.seed = *seed;
      table = ensemble::synthetic_logits(spec);
      write_file_atomic(fs::path(*out) / "logits.csv", logits_csv(table));
    } else {
      table = ensemble::load_logits(*logits);
    }
    const auto report = ensemble::run_configuration(table, c, *opts);
    write_file_atomic(fs::path(*out) / "metrics.csv", ensemble::metrics_csv(report));

    json methods = json::object();
    for (const auto& m : report.methods) {
      json mean = json::object();
      const auto values = m.mean.values();
      for (std::size_t i = 0; i < values.size(); ++i) mean[ensemble::metric_names()[i]] = values[i];
      methods[m.name] = mean;
    }
    const json summary{{"configuration", ensemble::to_string(c)},
                       {"cohort", ensemble::to_string(opts->cohort)},
                       {"columns", report.columns},
                       {"subjects", report.subjects},
                       {"folds", opts->folds},
                       {"seed", *seed},
                       {"epochs", opts->hyper.epochs},
                       {"learning_rate", opts->hyper.learning_rate},
                       {"fold_of_subject", report.folds.fold},
                       {"mean", methods}};
    write_file_atomic(fs::path(*out) / "summary.json", summary.dump(2) + "\n");

    std::printf("%-28s %9s %9s %9s %9s %9s %9s\n", "method", "Accuracy", "Precision", "Recall", "F1", "AUC", "MCC");
    for (const auto& m : report.methods) {
      const auto v = m.mean.values();
      std::printf("%-28s %9.4f %9.4f %9.4f %9.4f %9.4f %9.4f\n", m.name.c_str(), v[0], v[1], v[2], v[3], v[4], v[5]);
    }
    std::cout << "wrote " << (fs::path(*out) / "metrics.csv").string() << "\n";
  });
}

void add_serve_command(CLI::App& app, Context& ctx) {
  auto port = std::make_shared<int>(8080);
  auto workspace = std::make_shared<std::string>("workflows");
  auto config = std::make_shared<std::string>();
  auto* sub = app.add_subcommand("serve", "HTTP API for workflows, approvals and artifacts (loopback only)");
  sub->add_option("--port", *port, "TCP port on 127.0.0.1")->capture_default_str()->check(CLI::Range(0, 65535));
  sub->add_option("--workspace", *workspace, "Directory holding workflow directories")->capture_default_str();
  sub->add_option("--config", *config, "Engine defaults for submitted workflows (JSON)")->check(CLI::ExistingFile);
  sub->callback([&ctx, port, workspace, config] {
    gateway::GatewayOptions o;
    o.runner = ctx.self;
    if (!config->empty()) {
      o.defaults = json::parse(read_file(*config), nullptr, false);
      if (o.defaults.is_discarded() || !o.defaults.is_object()) throw UsageError(*config + " is not a JSON object");
    }
    gateway::serve(*port, *workspace, o);
  });
}

}  // namespace neuroflow::cli
