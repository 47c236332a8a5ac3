// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/bench/cases.hpp"

#include "neuroflow/bench/metrics.hpp"
#include "neuroflow/common/error.hpp"
#include "neuroflow/common/io.hpp"

#include <algorithm>

namespace neuroflow::bench {

using nlohmann::json;

std::string_view to_string(Suite s) {
  switch (s) {
    case Suite::INTENT:
      return "intent";
    case Suite::PREPROC:
      return "preproc";
    case Suite::INTEGRATION:
      return "integration";
  }
  return "intent";
}

Suite parse_suite(std::string_view token) {
  for (Suite s : {Suite::INTENT, Suite::PREPROC, Suite::INTEGRATION})
    if (to_string(s) == token) return s;
  throw ConfigError("unknown bench suite: " + std::string(token));
}

namespace {

std::string require_id(const json& j) {
  const auto id = j.at("case_id").get<std::string>();
  if (id.empty()) throw ConfigError("case_id must be non-empty");
  return id;
}

std::vector<Mutation> mutations_from_json(const json& j) {
  std::vector<Mutation> out;
  for (const auto& m : j.value("mutations", json::array())) {
    Mutation mu;
    if (m.contains("duplicate_row")) {
      mu.duplicate_row = m.at("duplicate_row").get<std::size_t>();
    } else {
      mu.find = m.at("find").get<std::string>();
      mu.replace = m.at("replace").get<std::string>();
      if (mu.find.empty()) throw ConfigError("mutation 'find' must be non-empty");
    }
    out.push_back(std::move(mu));
  }
  return out;
}

std::optional<Corruption> corruption_from_json(const json& j) {
  if (!j.contains("corruption")) return std::nullopt;
  const auto& c = j.at("corruption");
  return Corruption{c.at("base_case").get<std::string>(), c.at("expect_false").get<std::string>()};
}

template <typename Case, typename Parse>
std::vector<Case> load_dir(const fs::path& dir, Parse parse) {
  if (!fs::is_directory(dir)) throw ConfigError("case directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Case> out;
  for (const auto& f : files) {
    try {
      out.push_back(parse(json::parse(read_file(f)), f.parent_path()));
    } catch (const json::exception& e) {
      throw ConfigError(f.filename().string() + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(f.filename().string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

IntentCase intent_case_from_json(const json& j) {
  IntentCase c;
  c.case_id = require_id(j);
  c.prompt = j.at("prompt").get<std::string>();
  for (const auto& m : j.at("gold_modalities")) {
    const auto parsed = parse_modality(m.get<std::string>());
    if (!parsed) throw ConfigError("unknown gold modality: " + m.get<std::string>());
    c.gold_modalities.insert(*parsed);
  }
  for (const auto& t : j.at("gold_tasks")) {
    const auto parsed = parse_task(t.get<std::string>());
    if (!parsed) throw ConfigError("unknown gold task: " + t.get<std::string>());
    c.gold_tasks.insert(*parsed);
  }
  return c;
}

PreprocCase preproc_case_from_json(const json& j) {
  PreprocCase c;
  c.case_id = require_id(j);
  c.label = j.at("label").get<std::string>();
  if (c.label.find('.') == std::string::npos) throw ConfigError("label must be <modality>.<step>: " + c.label);
  c.directory_tree = j.at("directory_tree").get<std::vector<std::string>>();
  if (c.directory_tree.empty()) throw ConfigError("directory_tree must be non-empty");
  c.expected_tool_tokens = j.at("expected_tool_tokens").get<std::vector<std::string>>();
  if (c.expected_tool_tokens.empty()) throw ConfigError("expected_tool_tokens must be non-empty");
  c.expected_output_root = j.at("expected_output_root").get<std::string>();
  c.constraints = validator::constraint_case_from_json(j.value("constraints", json::array()));
  c.syntax_check_cmd = j.at("syntax_check_cmd").get<std::vector<std::string>>();
  if (c.syntax_check_cmd.empty()) throw ConfigError("syntax_check_cmd must be non-empty");
  c.mutations = mutations_from_json(j);
  for (const auto& m : c.mutations)
    if (m.duplicate_row) throw ConfigError("duplicate_row applies to integration cases only");
  c.corruption = corruption_from_json(j);
  return c;
}

IntegrationCase integration_case_from_json(const json& j, const fs::path& case_dir) {
  IntegrationCase c;
  c.case_id = require_id(j);
  c.description = j.value("description", std::string{});
  c.simulated_tree = j.at("simulated_tree").get<std::vector<std::string>>();
  for (const auto& f : c.simulated_tree) {
    const fs::path p(f);
    if (f.empty() || p.is_absolute() || std::any_of(p.begin(), p.end(), [](const auto& s) { return s == ".."; }))
      throw ConfigError("simulated_tree entries must be relative and stay inside the tree: " + f);
  }
  const json& config = j.at("config");
  for (const auto& [token, root] : config.at("roots").items()) {
    const auto m = parse_modality(token);
    if (!m) throw ConfigError("unknown modality in roots: " + token);
    c.roots[*m] = {root.at("dir").get<std::string>(), root.at("pattern").get<std::string>()};
  }
  if (c.roots.empty()) throw ConfigError("config.roots must be non-empty");
  c.subject_pattern = config.value("subject_pattern", std::string(integrator::kDefaultSubjectPattern));
  c.join = integrator::parse_join_policy(config.value("join", std::string("UNION")));
  c.gold_csv = j.at("gold_csv").get<std::string>();
  if (c.gold_csv.is_relative()) c.gold_csv = case_dir / c.gold_csv;
  c.gold_csv = c.gold_csv.lexically_normal();
  for (const auto& t : j.at("required_triples")) {
    const auto v = t.get<std::vector<std::string>>();
    if (v.size() != 3) throw ConfigError("required triple needs subject, date and column");
    c.required_triples.push_back({v[0], v[1], v[2]});
  }
  if (c.required_triples.empty()) throw ConfigError("required_triples must be non-empty");
  c.mutations = mutations_from_json(j);
  c.corruption = corruption_from_json(j);

  // The gold table must canonicalize and hold every required cell.
  if (!fs::exists(c.gold_csv)) throw ConfigError("gold CSV not found: " + c.gold_csv.string());
  try {
    const auto gold = canonical_table(csv::parse_table(read_file(c.gold_csv)),
                                      integrator::ColumnAliases::load_default());
    for (const auto& t : c.required_triples)
      if (!cell(gold, t.subject_id, t.date, t.column))
        throw ConfigError("required triple (" + t.subject_id + ", " + t.date + ", " + t.column +
                          ") has no gold cell");
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("gold CSV " + c.gold_csv.filename().string() + ": " + e.what());
  }
  return c;
}

std::vector<IntentCase> load_intent_cases(const fs::path& dir) {
  return load_dir<IntentCase>(dir, [](const json& j, const fs::path&) { return intent_case_from_json(j); });
}

std::vector<PreprocCase> load_preproc_cases(const fs::path& dir) {
  return load_dir<PreprocCase>(dir, [](const json& j, const fs::path&) { return preproc_case_from_json(j); });
}

std::vector<IntegrationCase> load_integration_cases(const fs::path& dir) {
  return load_dir<IntegrationCase>(dir, integration_case_from_json);
}

fs::path default_cases_dir(Suite s) { return default_bench_dir() / "cases" / std::string(to_string(s)); }

fs::path default_corrupted_dir(Suite s) {
  return default_bench_dir() / "cases" / "corrupted" / std::string(to_string(s));
}

}  // namespace neuroflow::bench
