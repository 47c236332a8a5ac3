// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/ensemble/logits.hpp"
#include "neuroflow/ensemble/metrics.hpp"
#include "neuroflow/ensemble/stacker.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace neuroflow::ensemble {

enum class Configuration { SMRI, PET, SMRI_PET, FOUR_MODALITY };

std::string_view to_string(Configuration c);
/// Accepts smri, pet, smri_pet (or smri+pet) and four (or four_modality), any case.
Configuration parse_configuration(std::string_view token);

/// Modality prefixes included by a configuration.
std::vector<std::string> configuration_modalities(Configuration c);
/// Stacker input width: 3, 3, 6 and 8.
int configuration_width(Configuration c);

/// UNION evaluates every subject with at least one logit in the configuration; COMPLETE only those with all.
enum class CohortMode { UNION, COMPLETE };
std::string_view to_string(CohortMode m);
CohortMode parse_cohort_mode(std::string_view token);

struct FusionOptions {
  int folds = 5;
  std::uint64_t fold_seed = 0;
  CohortMode cohort = CohortMode::UNION;
  StackerHyper hyper;
};

struct MethodReport {
  std::string name;  // a column, avg(<modality>), avg(all) or stacker
  std::vector<MetricRow> per_fold;
  MetricRow mean;
};

struct FusionReport {
  Configuration configuration = Configuration::SMRI;
  std::vector<std::string> columns;
  std::size_t subjects = 0;
  FoldAssignment folds;
  std::vector<MethodReport> methods;

  const MethodReport& method(const std::string& name) const;
};

inline constexpr const char* kStackerName = "stacker";

/// Baselines (each column, each modality average, the overall average) and the stacker, per fold.
FusionReport run_configuration(const LogitTable& table, Configuration config, const FusionOptions& opts = {});

/// method, fold, Accuracy, Precision, Recall, F1-Score, AUC, MCC; per-fold rows then an AVG row per method.
std::string metrics_csv(const FusionReport& report);

struct SyntheticSpec {
  int subjects = 300;
  double prevalence = 0.4;
  /// Label signal per modality latent; sMRI and PET get independent latent noise.
  double smri_signal = 1.0;
  double pet_signal = 1.0;
  double fmri_signal = 0.5;
  double tabular_signal = 0.8;
  /// Chance that a subject lacks a whole non-sMRI modality.
  double missing_rate = 0.0;
  std::uint64_t seed = 0;
};

/// Columns smri.{resnet18,densenet121,efficientnet_b0}, pet.{same}, fmri.connectivity, tabular.tabpfn.
LogitTable synthetic_logits(const SyntheticSpec& spec);

}  // namespace neuroflow::ensemble
