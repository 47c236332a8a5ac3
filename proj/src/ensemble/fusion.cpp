// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/ensemble/fusion.hpp"
#include "neuroflow/common/csv.hpp"
#include "neuroflow/common/error.hpp"
#include "neuroflow/common/random.hpp"
#include "neuroflow/common/types.hpp"

#include <algorithm>
#include <cstdio>

namespace neuroflow::ensemble {

std::string_view to_string(Configuration c) {
  switch (c) {
    case Configuration::SMRI:
      return "smri";
    case Configuration::PET:
      return "pet";
    case Configuration::SMRI_PET:
      return "smri_pet";
    case Configuration::FOUR_MODALITY:
      return "four";
  }
  return "smri";
}

Configuration parse_configuration(std::string_view token) {
  const auto t = to_lower(trim(token));
  if (t == "smri") return Configuration::SMRI;
  if (t == "pet") return Configuration::PET;
  if (t == "smri_pet" || t == "smri+pet") return Configuration::SMRI_PET;
  if (t == "four" || t == "four_modality") return Configuration::FOUR_MODALITY;
  throw ConfigError("unknown configuration '" + std::string(token) + "' (smri, pet, smri_pet, four)");
}

std::vector<std::string> configuration_modalities(Configuration c) {
  switch (c) {
    case Configuration::SMRI:
      return {"smri"};
    case Configuration::PET:
      return {"pet"};
    case Configuration::SMRI_PET:
      return {"smri", "pet"};
    case Configuration::FOUR_MODALITY:
      return {"smri", "pet", "tabular", "fmri"};
  }
  return {};
}

int configuration_width(Configuration c) {
  switch (c) {
    case Configuration::SMRI:
    case Configuration::PET:
      return 3;
    case Configuration::SMRI_PET:
      return 6;
    case Configuration::FOUR_MODALITY:
      return 8;
  }
  return 0;
}

std::string_view to_string(CohortMode m) { return m == CohortMode::UNION ? "union" : "complete"; }

CohortMode parse_cohort_mode(std::string_view token) {
  const auto t = to_lower(trim(token));
  if (t == "union") return CohortMode::UNION;
  if (t == "complete") return CohortMode::COMPLETE;
  throw ConfigError("cohort mode must be union or complete: " + std::string(token));
}

const MethodReport& FusionReport::method(const std::string& name) const {
  for (const auto& m : methods)
    if (m.name == name) return m;
  throw NotFoundError("no method named " + name);
}

namespace {

struct Baseline {
  std::string name;
  std::vector<std::size_t> columns;  // into the configuration's matrix
};

std::vector<double> gather(const Eigen::VectorXd& v, const std::vector<std::size_t>& rows) {
  std::vector<double> out;
  for (auto r : rows) out.push_back(v(static_cast<Eigen::Index>(r)));
  return out;
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

FusionReport run_configuration(const LogitTable& table, Configuration config, const FusionOptions& opts) {
  table.check();
  FusionReport report;
  report.configuration = config;

  std::vector<std::size_t> table_cols;
  std::vector<Baseline> baselines;
  for (const auto& modality : configuration_modalities(config)) {
    const auto cols = table.modality_columns(modality);
    if (cols.empty()) throw ConfigError("configuration " + std::string(to_string(config)) + " needs " + modality + " columns");
    Baseline avg{"avg(" + modality + ")", {}};
    for (auto c : cols) {
      avg.columns.push_back(table_cols.size());
      baselines.push_back({table.columns[c], {table_cols.size()}});
      table_cols.push_back(c);
      report.columns.push_back(table.columns[c]);
    }
    if (avg.columns.size() > 1) baselines.push_back(std::move(avg));
  }
  if (static_cast<int>(table_cols.size()) != configuration_width(config))
    throw ConfigError("configuration " + std::string(to_string(config)) + " expects " +
                      std::to_string(configuration_width(config)) + " logit columns, table has " +
                      std::to_string(table_cols.size()));
  if (configuration_modalities(config).size() > 1) {
    Baseline all{"avg(all)", {}};
    for (std::size_t j = 0; j < table_cols.size(); ++j) all.columns.push_back(j);
    baselines.push_back(std::move(all));
  }

  std::vector<std::size_t> cohort;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto present = std::count_if(table_cols.begin(), table_cols.end(), [&](auto c) { return table.values[i][c].has_value(); });
    const bool keep = opts.cohort == CohortMode::UNION ? present > 0 : present == static_cast<long>(table_cols.size());
    if (keep) cohort.push_back(i);
  }
  report.subjects = cohort.size();
  if (cohort.size() < static_cast<std::size_t>(opts.folds))
    throw ConfigError("cohort of " + std::to_string(cohort.size()) + " subjects is smaller than the fold count");

  const Eigen::MatrixXd x = rows_of(impute_neutral(table, table_cols), cohort);
  std::vector<int> labels;
  for (auto i : cohort) labels.push_back(table.labels[i]);
  report.folds = stratified_kfold(labels, opts.folds, opts.fold_seed);

  for (const auto& b : baselines) report.methods.push_back({b.name, {}, {}});
  report.methods.push_back({kStackerName, {}, {}});

  for (int f = 0; f < opts.folds; ++f) {
    const auto split = oversample_training(report.folds, labels, f, opts.fold_seed + 1000 + static_cast<std::uint64_t>(f));
    std::vector<int> test_labels, train_labels;
    for (auto i : split.test) test_labels.push_back(labels[i]);
    for (auto i : split.train) train_labels.push_back(labels[i]);

    for (std::size_t b = 0; b < baselines.size(); ++b) {
      const Eigen::VectorXd fused = average_logits(x, baselines[b].columns).unaryExpr([](double z) { return logistic(z); });
      report.methods[b].per_fold.push_back(compute_metrics(gather(fused, split.test), test_labels));
    }
    const auto model = train_stacker(rows_of(x, split.train), train_labels, opts.hyper);
    const Eigen::VectorXd probs = predict_stacker(model, rows_of(x, split.test));
    std::vector<double> p(probs.data(), probs.data() + probs.size());
    report.methods.back().per_fold.push_back(compute_metrics(p, test_labels));
  }
  for (auto& m : report.methods) m.mean = average(m.per_fold);
  return report;
}

std::string metrics_csv(const FusionReport& report) {
  csv::Row header{"method", "fold"};
  for (const char* n : metric_names()) header.emplace_back(n);
  std::vector<csv::Row> rows{header};
  for (const auto& m : report.methods) {
    for (std::size_t f = 0; f < m.per_fold.size(); ++f) {
      csv::Row row{m.name, std::to_string(f)};
      for (double v : m.per_fold[f].values()) row.push_back(format_metric(v));
      rows.push_back(std::move(row));
    }
    csv::Row avg{m.name, "AVG"};
    for (double v : m.mean.values()) avg.push_back(format_metric(v));
    rows.push_back(std::move(avg));
  }
  return csv::emit(rows);
}

LogitTable synthetic_logits(const SyntheticSpec& spec) {
  if (spec.subjects < 2) throw ConfigError("synthetic cohort needs at least 2 subjects");
  if (!(spec.prevalence > 0.0 && spec.prevalence < 1.0)) throw ConfigError("prevalence must be in (0, 1)");
  Rng rng(spec.seed);
  LogitTable t;
  const std::vector<std::string> cnn{"resnet18", "densenet121", "efficientnet_b0"};
  for (const auto& m : {"smri", "pet"})
    for (const auto& s : cnn) t.columns.push_back(std::string(m) + "." + s);
  t.columns.push_back("fmri.connectivity");
  t.columns.push_back("tabular.tabpfn");

  for (int i = 0; i < spec.subjects; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "SYN%04d", i);
    t.subject_ids.emplace_back(id);
    const int y = rng.uniform() < spec.prevalence ? 1 : 0;
    t.labels.push_back(y);
    const double s = y ? 1.0 : -1.0;
    std::vector<std::optional<double>> row;
    const auto modality = [&](double signal, int columns, bool may_miss) {
      const double latent = signal * s + rng.normal();
      const bool missing = may_miss && rng.uniform() < spec.missing_rate;
      for (int c = 0; c < columns; ++c) {
        const double v = latent + 0.5 * rng.normal();
        row.push_back(missing ? std::nullopt : std::optional<double>(v));
      }
    };
    modality(spec.smri_signal, 3, false);
    modality(spec.pet_signal, 3, true);
    modality(spec.fmri_signal, 1, true);
    modality(spec.tabular_signal, 1, true);
    t.values.push_back(std::move(row));
  }
  return t;
}

}  // namespace neuroflow::ensemble
