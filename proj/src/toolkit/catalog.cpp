// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/toolkit/catalog.hpp"

#include "neuroflow/common/error.hpp"
#include "neuroflow/common/io.hpp"

#include <algorithm>
#include <set>

namespace neuroflow::toolkit {

using nlohmann::json;

namespace {

ParamMap params_from_json(const json& j) {
  ParamMap out;
  if (j.is_null()) return out;
  if (!j.is_object()) throw ConfigError("parameter map must be an object");
  for (const auto& [k, v] : j.items()) out[k] = v.is_string() ? v.get<std::string>() : v.dump();
  return out;
}

ToolAdapter tool_from_json(const std::string& id, const json& j, const std::vector<std::string>& interp) {
  ToolAdapter t;
  t.tool_id = id;
  t.binary = j.value("binary", id);
  t.command_template = j.value("command", std::string{});
  if (t.command_template.empty()) throw ConfigError("tool '" + id + "' has no command template");
  t.interpreter = j.contains("interpreter") ? j.at("interpreter").get<std::vector<std::string>>() : interp;
  if (t.interpreter.empty()) throw ConfigError("tool '" + id + "' has an empty interpreter");
  t.default_params = params_from_json(j.value("defaults", json::object()));
  for (const auto& rung : j.value("fallback_ladder", json::array())) t.fallback_ladder.push_back(params_from_json(rung));
  t.output_schema_id = j.value("schema", std::string{});
  t.default_timeout = j.value("timeout", 3600.0);
  if (t.default_timeout <= 0) throw ConfigError("tool '" + id + "' timeout must be positive");
  t.builtin = j.value("builtin", false);
  if (j.contains("script_template")) {
    // Either one string or an array of lines.
    const auto& st = j.at("script_template");
    if (st.is_string()) {
      t.script_template = st.get<std::string>();
    } else {
      for (const auto& line : st) t.script_template += line.get<std::string>() + "\n";
    }
  }
  const json bench_inputs = j.value("bench_inputs", json::object());
  for (const auto& [role, glob] : bench_inputs.items()) t.bench_inputs[role] = glob.get<std::string>();
  return t;
}

StepTemplate step_from_json(const json& j) {
  StepTemplate s;
  s.name = j.at("name").get<std::string>();
  if (s.name.empty() || s.name.find('.') != std::string::npos)
    throw ConfigError("step name must be non-empty and dot-free: '" + s.name + "'");
  s.tool_id = j.at("tool").get<std::string>();
  s.depends_on = j.value("depends_on", std::vector<std::string>{});
  const auto phase = graph::parse_step_phase(j.value("phase", std::string("PREPROCESS")));
  if (!phase || *phase == graph::StepPhase::INTEGRATE || *phase == graph::StepPhase::TASK)
    throw ConfigError("step '" + s.name + "' must be INGEST or PREPROCESS");
  s.phase = *phase;
  s.cross_modality_anchor = j.value("anchor", false);
  s.condition = j.value("condition", std::string{});
  s.params = params_from_json(j.value("params", json::object()));
  s.output_schema_id = j.value("schema", std::string{});
  if (j.contains("timeout")) s.timeout_seconds = j.at("timeout").get<double>();
  return s;
}

}  // namespace

bool DatasetContext::reverse_pe_b0() const {
  return std::any_of(subjects.begin(), subjects.end(), [](const auto& s) { return s.reverse_pe_b0; });
}

std::optional<double> DatasetContext::total_readout_time() const {
  for (const auto& s : subjects)
    if (s.total_readout_time) return s.total_readout_time;
  return std::nullopt;
}

bool DatasetContext::flag(const std::string& name) const {
  if (name.empty()) return true;
  if (name == "reverse_pe_b0") return reverse_pe_b0();
  throw ConfigError("unknown step condition '" + name + "'");
}

namespace {

std::vector<fs::path> sorted_dirs(const fs::path& dir, const std::string& prefix) {
  std::vector<fs::path> out;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return out;
  for (const auto& e : fs::directory_iterator(dir, ec))
    if (e.is_directory() && e.path().filename().string().rfind(prefix, 0) == 0) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

void read_sidecars(const fs::path& session_dir, SubjectContext& ctx) {
  std::set<std::string> directions;
  for (const char* sub : {"dwi", "fmap"}) {
    const fs::path dir = session_dir / sub;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) continue;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir, ec))
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      json doc;
      try {
        doc = json::parse(read_file(f));
      } catch (const json::exception& e) {
        throw ConfigError("malformed sidecar " + f.string() + ": " + e.what());
      }
      if (doc.contains("PhaseEncodingDirection") && doc["PhaseEncodingDirection"].is_string()) {
        const auto ped = doc["PhaseEncodingDirection"].get<std::string>();
        directions.insert(ped);
        if (std::string(sub) == "dwi" && ctx.phase_encoding_direction.empty()) ctx.phase_encoding_direction = ped;
      }
      if (!ctx.total_readout_time && doc.contains("TotalReadoutTime") && doc["TotalReadoutTime"].is_number())
        ctx.total_readout_time = doc["TotalReadoutTime"].get<double>();
    }
  }
  for (const auto& d : directions)
    if (d.size() >= 1 && d.back() != '-' && directions.contains(d + "-")) ctx.reverse_pe_b0 = true;
}

}  // namespace

DatasetContext scan_dataset(const fs::path& data_root) {
  DatasetContext out;
  for (const auto& subject_dir : sorted_dirs(data_root, "sub-")) {
    const auto subject = subject_dir.filename().string().substr(4);
    auto sessions = sorted_dirs(subject_dir, "ses-");
    if (sessions.empty()) sessions.push_back(subject_dir);
    for (const auto& session_dir : sessions) {
      SubjectContext ctx;
      ctx.subject_id = subject;
      if (session_dir != subject_dir) ctx.session = session_dir.filename().string().substr(4);
      read_sidecars(session_dir, ctx);
      out.subjects.push_back(std::move(ctx));
    }
  }
  return out;
}

TemplateCatalog TemplateCatalog::from_json(const json& j) {
  TemplateCatalog c;
  c.source_ = j;
  try {
    const auto interp = j.value("interpreter", std::vector<std::string>{"sh"});
    c.integrate_tool_ = j.value("integrate_tool", std::string("integrate"));
    c.task_tool_ = j.value("task_tool", std::string("task"));
    for (const auto& [id, sj] : j.at("schemas").items()) c.schemas_[id] = validator::schema_from_json(id, sj);
    for (const auto& [id, tj] : j.at("tools").items()) {
      auto tool = tool_from_json(id, tj, interp);
      if (!tool.output_schema_id.empty() && !c.schemas_.contains(tool.output_schema_id))
        throw ConfigError("tool '" + id + "' references unknown schema '" + tool.output_schema_id + "'");
      c.tools_[id] = std::move(tool);
    }
    for (const auto& id : {c.integrate_tool_, c.task_tool_})
      if (!c.tools_.contains(id)) throw ConfigError("catalog lacks required tool '" + id + "'");

    for (const auto& [token, mj] : j.at("modalities").items()) {
      const auto m = parse_modality(token);
      if (!m) throw ConfigError("unknown modality in catalog: " + token);
      ModalityTemplate mt;
      mt.modality = *m;
      std::set<std::string> seen;
      for (const auto& sj : mj.at("steps")) {
        auto step = step_from_json(sj);
        if (!c.tools_.contains(step.tool_id))
          throw ConfigError("step '" + step.name + "' references unknown tool '" + step.tool_id + "'");
        if (step.output_schema_id.empty()) step.output_schema_id = c.tools_.at(step.tool_id).output_schema_id;
        if (!c.schemas_.contains(step.output_schema_id))
          throw ConfigError("step '" + step.name + "' has no resolvable output schema");
        // Dependencies must name earlier steps, which keeps every per-modality list acyclic.
        for (const auto& dep : step.depends_on)
          if (!seen.contains(dep))
            throw ConfigError("step '" + step.name + "' depends on '" + dep + "', which is not an earlier step");
        if (!seen.insert(step.name).second) throw ConfigError("duplicate step name '" + step.name + "'");
        mt.steps.push_back(std::move(step));
      }
      if (mt.steps.empty()) throw ConfigError("modality " + token + " has no steps");
      const auto& man = mj.at("manifest");
      mt.manifest.step_name = man.at("step").get<std::string>();
      mt.manifest.pattern = man.at("pattern").get<std::string>();
      if (!seen.contains(mt.manifest.step_name))
        throw ConfigError("manifest source step '" + mt.manifest.step_name + "' is not in modality " + token);
      validator::check_relative_pattern(mt.manifest.pattern);
      c.modalities_[*m] = std::move(mt);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed template catalog: ") + e.what());
  }
  return c;
}

TemplateCatalog TemplateCatalog::load(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse catalog " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

TemplateCatalog TemplateCatalog::load_default() { return load(default_data_dir() / "catalog.json"); }

const ToolAdapter& TemplateCatalog::tool(const std::string& tool_id) const {
  const auto it = tools_.find(tool_id);
  if (it == tools_.end()) throw NotFoundError("unknown tool '" + tool_id + "'");
  return it->second;
}

const validator::OutputSchema& TemplateCatalog::schema(const std::string& schema_id) const {
  const auto it = schemas_.find(schema_id);
  if (it == schemas_.end()) throw NotFoundError("unknown schema '" + schema_id + "'");
  return it->second;
}

const ModalityTemplate& TemplateCatalog::modality(Modality m) const {
  const auto it = modalities_.find(m);
  if (it == modalities_.end())
    throw ConfigError("template catalog has no template for modality " + std::string(to_string(m)));
  return it->second;
}

std::string TemplateCatalog::step_digest(const graph::StepNode& node) const {
  json doc{{"tool", source_.at("tools").value(node.tool_id, json::object())},
           {"schema", source_.at("schemas").value(node.output_schema_id, json::object())},
           {"params", node.params},
           {"interpreter", source_.value("interpreter", json::array({"sh"}))}};
  if (node.timeout_seconds) doc["timeout"] = *node.timeout_seconds;
  return sha256_hex(doc.dump());
}

std::vector<graph::StepNode> expand_template(Modality modality, const DatasetContext& ctx,
                                             const TemplateCatalog& catalog) {
  const auto& mt = catalog.modality(modality);
  const std::string prefix(step_prefix(modality));

  // Dropped steps forward their own (already rewritten) dependencies to their dependents.
  std::map<std::string, std::vector<std::string>> replaced;
  std::vector<graph::StepNode> nodes;
  for (const auto& st : mt.steps) {
    std::vector<std::string> deps;
    for (const auto& d : st.depends_on) {
      const auto it = replaced.find(d);
      if (it != replaced.end()) {
        for (const auto& r : it->second)
          if (std::find(deps.begin(), deps.end(), r) == deps.end()) deps.push_back(r);
      } else {
        const auto id = prefix + "." + d;
        if (std::find(deps.begin(), deps.end(), id) == deps.end()) deps.push_back(id);
      }
    }
    if (!ctx.flag(st.condition)) {
      replaced[st.name] = deps;
      continue;
    }
    graph::StepNode n;
    n.step_id = prefix + "." + st.name;
    n.modality = modality;
    n.tool_id = st.tool_id;
    n.depends_on = std::move(deps);
    n.output_schema_id = st.output_schema_id;
    n.phase = st.phase;
    n.params = st.params;
    n.cross_modality_anchor = st.cross_modality_anchor;
    n.timeout_seconds = st.timeout_seconds;
    nodes.push_back(std::move(n));
  }
  return nodes;
}

std::string terminal_step_id(Modality modality, const DatasetContext& ctx, const TemplateCatalog& catalog) {
  const auto nodes = expand_template(modality, ctx, catalog);
  std::set<std::string> has_dependent;
  for (const auto& n : nodes)
    for (const auto& d : n.depends_on) has_dependent.insert(d);
  std::vector<std::string> sinks;
  for (const auto& n : nodes)
    if (!has_dependent.contains(n.step_id)) sinks.push_back(n.step_id);
  if (sinks.size() != 1)
    throw ConfigError("modality " + std::string(to_string(modality)) + " template has " +
                      std::to_string(sinks.size()) + " terminal steps; expected exactly one");
  return sinks.front();
}

}  // namespace neuroflow::toolkit
