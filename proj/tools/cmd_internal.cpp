// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include "neuroflow/common/types.hpp"
#include "neuroflow/integrator/manifest.hpp"
#include "neuroflow/toolkit/mock.hpp"

#include <iostream>
#include <map>
#include <memory>

namespace neuroflow::cli {

namespace fs = std::filesystem;

namespace {

Modality modality_arg(const std::string& token) {
  const auto m = parse_modality(token);
  if (!m) throw UsageError("unknown modality '" + token + "'");
  return *m;
}

/// "MOD=value" pairs into a map keyed by modality.
std::map<Modality, std::string> keyed(const std::vector<std::string>& pairs, const char* flag) {
  std::map<Modality, std::string> out;
  for (const auto& p : pairs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw UsageError(std::string(flag) + " expects MODALITY=value, got '" + p + "'");
    out[modality_arg(p.substr(0, eq))] = p.substr(eq + 1);
  }
  return out;
}

}  // namespace

// Entry points invoked by generated step scripts and test harnesses; hidden from help.
void add_internal_commands(CLI::App& app, Context& ctx) {
  {
    auto manifest = std::make_shared<std::string>();
    auto tool = std::make_shared<std::string>();
    auto args = std::make_shared<std::vector<std::string>>();
    auto* sub = app.add_subcommand("mock-tool", "")->group("");
    sub->add_option("--manifest", *manifest)->required()->check(CLI::ExistingFile);
    sub->add_option("--tool", *tool)->required();
    sub->add_option("args", *args);
    sub->callback([&ctx, manifest, tool, args] {
      const auto m = toolkit::MockManifest::load(*manifest);
      ctx.exit_code = toolkit::run_mock_tool(m, *tool, *args, fs::current_path(), std::cout, std::cerr);
    });
  }
  {
    auto out = std::make_shared<std::string>();
    auto join = std::make_shared<std::string>("UNION");
    auto pattern = std::make_shared<std::string>(integrator::kDefaultSubjectPattern);
    auto roots = std::make_shared<std::vector<std::string>>();
    auto globs = std::make_shared<std::vector<std::string>>();
    auto base = std::make_shared<std::string>();
    auto* sub = app.add_subcommand("integrate", "")->group("");
    sub->add_option("--out", *out)->required();
    sub->add_option("--join", *join);
    sub->add_option("--subject-pattern", *pattern);
    sub->add_option("--root", *roots)->required();
    sub->add_option("--pattern", *globs)->required();
    sub->add_option("--base", *base);
    sub->callback([out, join, pattern, roots, globs, base] {
      integrator::IntegrateOptions opts;
      const auto root_map = keyed(*roots, "--root");
      const auto glob_map = keyed(*globs, "--pattern");
      for (const auto& [m, dir] : root_map) {
        const auto g = glob_map.find(m);
        if (g == glob_map.end()) throw UsageError("no --pattern for " + std::string(to_string(m)));
        opts.roots[m] = {dir, g->second};
      }
      opts.subject_pattern = *pattern;
      opts.join = integrator::parse_join_policy(*join);
      opts.out_dir = *out;
      opts.path_base = *base;
      const auto r = integrator::run_integration(opts);
      std::cout << "manifest: " << r.manifest.rows.size() << " rows, " << r.duplicates.size() << " duplicate keys, "
                << r.skips.size() << " skipped paths\n";
    });
  }
  {
    auto task = std::make_shared<std::string>();
    auto manifest = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto* sub = app.add_subcommand("task", "")->group("");
    sub->add_option("--task", *task)->required();
    sub->add_option("--manifest", *manifest)->required()->check(CLI::ExistingFile);
    sub->add_option("--out", *out)->required();
    sub->callback([task, manifest, out] {
      const auto t = parse_task(*task);
      if (!t) throw UsageError("unknown task '" + *task + "'");
      integrator::write_task_spec(*t, *manifest, *out);
    });
  }
  {
    auto spec = std::make_shared<toolkit::SyntheticDatasetSpec>();
    auto out = std::make_shared<std::string>();
    auto modalities = std::make_shared<std::vector<std::string>>();
    auto* sub = app.add_subcommand("synth-dataset", "")->group("");
    sub->add_option("--out", *out)->required();
    sub->add_option("--subjects", spec->subjects)->check(CLI::PositiveNumber);
    sub->add_option("--dates", spec->session_dates)->delimiter(',');
    sub->add_option("--modalities", *modalities)->delimiter(',');
    sub->add_option("--reverse-pe", spec->reverse_pe_subjects)->delimiter(',');
    sub->add_option("--pet-frames", spec->pet_frames)->check(CLI::PositiveNumber);
    sub->add_option("--seed", spec->seed);
    sub->callback([spec, out, modalities] {
      if (!modalities->empty()) {
        spec->modalities.clear();
        for (const auto& m : *modalities) spec->modalities.insert(modality_arg(m));
      }
      toolkit::make_synthetic_dataset(*out, *spec);
    });
  }
}

}  // namespace neuroflow::cli
