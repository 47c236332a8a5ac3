// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/graph/graph.hpp"

#include "neuroflow/common/error.hpp"
#include "neuroflow/common/io.hpp"

#include <algorithm>
#include <functional>

namespace neuroflow::graph {

using nlohmann::json;

DependencyTable default_dependency_table() {
  return {{Modality::SMRI, {}},
          {Modality::FMRI, {Modality::SMRI}},
          {Modality::DMRI, {Modality::SMRI}},
          {Modality::PET, {Modality::SMRI}},
          {Modality::TABULAR, {}}};
}

DependencyTable dependency_table_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("dependency table must be an object");
  DependencyTable table;
  for (const auto& [key, value] : j.items()) {
    const auto m = parse_modality(key);
    if (!m) throw ConfigError("dependency table: unknown modality " + key);
    auto& prereqs = table[*m];
    for (const auto& p : value) {
      const auto pm = parse_modality(p.get<std::string>());
      if (!pm) throw ConfigError("dependency table: unknown modality " + p.get<std::string>());
      prereqs.insert(*pm);
    }
  }
  check_dependency_table(table);
  return table;
}

json to_json(const DependencyTable& table) {
  json out = json::object();
  for (const auto& [m, prereqs] : table) {
    json arr = json::array();
    for (Modality p : prereqs) arr.push_back(to_string(p));
    out[std::string(to_string(m))] = arr;
  }
  return out;
}

DependencyTable load_dependency_table(const fs::path& path) {
  try {
    return dependency_table_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ConfigError("malformed dependency table " + path.string() + ": " + e.what());
  }
}

void check_dependency_table(const DependencyTable& table) {
  enum class Mark { NONE, ACTIVE, DONE };
  std::map<Modality, Mark> mark;
  std::function<void(Modality)> visit = [&](Modality m) {
    mark[m] = Mark::ACTIVE;
    const auto it = table.find(m);
    if (it != table.end()) {
      for (Modality p : it->second) {
        if (p == m) throw ConfigError("dependency table: " + std::string(to_string(m)) + " depends on itself");
        if (mark[p] == Mark::ACTIVE)
          throw ConfigError("dependency table is cyclic through " + std::string(to_string(p)));
        if (mark[p] == Mark::NONE) visit(p);
      }
    }
    mark[m] = Mark::DONE;
  };
  for (const auto& [m, _] : table)
    if (mark[m] == Mark::NONE) visit(m);
}

ModalitySet dependency_closure(const ModalitySet& roots, const DependencyTable& table) {
  check_dependency_table(table);
  ModalitySet out;
  std::vector<Modality> stack(roots.begin(), roots.end());
  while (!stack.empty()) {
    const Modality m = stack.back();
    stack.pop_back();
    if (!out.insert(m).second) continue;
    const auto it = table.find(m);
    if (it != table.end())
      for (Modality p : it->second) stack.push_back(p);
  }
  return out;
}

std::string task_step_id(DownstreamTask task) { return "task." + to_lower(to_string(task)); }

StepGraph::StepGraph(std::vector<StepNode> nodes) : nodes_(std::move(nodes)) {
  std::sort(nodes_.begin(), nodes_.end(), [](const auto& a, const auto& b) { return a.step_id < b.step_id; });
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (!index_.emplace(nodes_[i].step_id, i).second)
      throw ConfigError("duplicate step id '" + nodes_[i].step_id + "'");
  for (auto& n : nodes_) {
    std::sort(n.depends_on.begin(), n.depends_on.end());
    n.depends_on.erase(std::unique(n.depends_on.begin(), n.depends_on.end()), n.depends_on.end());
    for (const auto& d : n.depends_on)
      if (!index_.contains(d)) throw ConfigError("step '" + n.step_id + "' depends on unknown step '" + d + "'");
  }
}

const StepNode& StepGraph::node(const std::string& step_id) const {
  const auto it = index_.find(step_id);
  if (it == index_.end()) throw NotFoundError("no step '" + step_id + "' in graph");
  return nodes_[it->second];
}

std::vector<std::string> StepGraph::dependents(const std::string& step_id) const {
  std::vector<std::string> out;
  for (const auto& n : nodes_)
    if (std::binary_search(n.depends_on.begin(), n.depends_on.end(), step_id)) out.push_back(n.step_id);
  return out;
}

std::set<std::string> StepGraph::ancestors(const std::string& step_id) const {
  std::set<std::string> out;
  std::vector<std::string> stack = node(step_id).depends_on;
  while (!stack.empty()) {
    auto id = std::move(stack.back());
    stack.pop_back();
    if (!out.insert(id).second) continue;
    for (const auto& d : node(id).depends_on) stack.push_back(d);
  }
  return out;
}

ModalitySet StepGraph::modalities() const {
  ModalitySet out;
  for (const auto& n : nodes_)
    if (n.modality) out.insert(*n.modality);
  return out;
}

AcyclicResult validate_acyclic(const StepGraph& graph) {
  enum class Mark { NONE, ACTIVE, DONE };
  std::map<std::string, Mark> mark;
  std::map<std::string, std::vector<std::string>> succ;
  for (const auto& n : graph.nodes())
    for (const auto& d : n.depends_on) succ[d].push_back(n.step_id);
  for (auto& [_, v] : succ) std::sort(v.begin(), v.end());

  std::vector<std::string> path;
  std::vector<std::string> witness;
  std::function<bool(const std::string&)> visit = [&](const std::string& id) {
    mark[id] = Mark::ACTIVE;
    path.push_back(id);
    for (const auto& next : succ[id]) {
      if (mark[next] == Mark::ACTIVE) {
        const auto start = std::find(path.begin(), path.end(), next);
        witness.assign(start, path.end());
        return true;
      }
      if (mark[next] == Mark::NONE && visit(next)) return true;
    }
    path.pop_back();
    mark[id] = Mark::DONE;
    return false;
  };
  for (const auto& n : graph.nodes()) {
    if (mark[n.step_id] != Mark::NONE) continue;
    if (visit(n.step_id)) {
      std::rotate(witness.begin(), std::min_element(witness.begin(), witness.end()), witness.end());
      return {false, witness};
    }
  }
  return {};
}

StepGraph build_graph(const ModalitySet& modalities, const TaskSet& tasks, const DependencyTable& deps,
                      const toolkit::TemplateCatalog& catalog, const toolkit::DatasetContext& ctx) {
  if (modalities.empty()) throw ConfigError("build_graph: intent has no modalities");
  const ModalitySet closure = dependency_closure(modalities, deps);
  for (Modality m : closure)
    if (!catalog.covers(m))
      throw ConfigError("template catalog has no template for modality " + std::string(to_string(m)));

  std::vector<StepNode> nodes;
  for (Modality m : closure) {
    auto expanded = expand_template(m, ctx, catalog);
    const auto it = deps.find(m);
    if (it != deps.end() && !it->second.empty()) {
      auto anchor = std::find_if(expanded.begin(), expanded.end(), [](const auto& n) { return n.cross_modality_anchor; });
      if (anchor == expanded.end()) anchor = expanded.begin();
      for (Modality p : it->second) anchor->depends_on.push_back(toolkit::terminal_step_id(p, ctx, catalog));
    }
    for (auto& n : expanded) nodes.push_back(std::move(n));
  }

  std::set<std::string> has_dependent;
  for (const auto& n : nodes)
    for (const auto& d : n.depends_on) has_dependent.insert(d);

  StepNode integrate;
  integrate.step_id = kIntegrateStepId;
  integrate.tool_id = catalog.integrate_tool();
  integrate.output_schema_id = catalog.tool(integrate.tool_id).output_schema_id;
  integrate.phase = StepPhase::INTEGRATE;
  for (const auto& n : nodes)
    if (!has_dependent.contains(n.step_id)) integrate.depends_on.push_back(n.step_id);
  nodes.push_back(std::move(integrate));

  for (DownstreamTask t : tasks) {
    StepNode task;
    task.step_id = task_step_id(t);
    task.tool_id = catalog.task_tool();
    task.output_schema_id = catalog.tool(task.tool_id).output_schema_id;
    task.phase = StepPhase::TASK;
    task.task = t;
    task.params["task"] = std::string(to_string(t));
    task.depends_on.push_back(kIntegrateStepId);
    nodes.push_back(std::move(task));
  }

  StepGraph graph(std::move(nodes));
  const auto acyclic = validate_acyclic(graph);
  if (!acyclic.ok) {
    std::string cycle;
    for (const auto& id : acyclic.cycle) cycle += (cycle.empty() ? "" : " -> ") + id;
    throw ConfigError("step graph is cyclic: " + cycle);
  }
  return graph;
}

StepGraph build_graph(const planner::WorkflowIntent& intent, const DependencyTable& deps,
                      const toolkit::TemplateCatalog& catalog, const toolkit::DatasetContext& ctx) {
  return build_graph(intent.modalities, intent.tasks, deps, catalog, ctx);
}

std::vector<std::string> topo_schedule(const StepGraph& graph, const std::set<std::string>& completed) {
  std::vector<std::string> ready;
  for (const auto& n : graph.nodes()) {
    if (completed.contains(n.step_id)) continue;
    if (std::all_of(n.depends_on.begin(), n.depends_on.end(), [&](const auto& d) { return completed.contains(d); }))
      ready.push_back(n.step_id);
  }
  return ready;
}

json export_graph(const StepGraph& graph, const toolkit::TemplateCatalog& catalog) {
  json nodes = json::array();
  for (const auto& n : graph.nodes()) {
    nodes.push_back({{"step_id", n.step_id},
                     {"modality", n.modality ? json(std::string(to_string(*n.modality))) : json(nullptr)},
                     {"tool_id", n.tool_id},
                     {"depends_on", n.depends_on},
                     {"output_schema_id", n.output_schema_id},
                     {"phase", to_string(n.phase)},
                     {"params", n.params},
                     {"template_digest", catalog.step_digest(n)}});
  }
  return {{"schema_version", 1}, {"nodes", nodes}};
}

std::string graph_digest(const StepGraph& graph, const toolkit::TemplateCatalog& catalog) {
  return sha256_hex(export_graph(graph, catalog).dump());
}

}  // namespace neuroflow::graph
