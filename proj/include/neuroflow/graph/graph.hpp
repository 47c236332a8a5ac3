// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuroflow/graph/step.hpp"
#include "neuroflow/planner/intent.hpp"
#include "neuroflow/toolkit/catalog.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace neuroflow::graph {

inline constexpr const char* kIntegrateStepId = "integrate.manifest";

/// Modality -> prerequisite modalities.
using DependencyTable = std::map<Modality, ModalitySet>;

DependencyTable default_dependency_table();
DependencyTable dependency_table_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DependencyTable& table);
DependencyTable load_dependency_table(const std::filesystem::path& path);

/// Throws ConfigError on self-dependencies or a cyclic table.
void check_dependency_table(const DependencyTable& table);

/// Closure of `roots` under the table's prerequisite relation.
ModalitySet dependency_closure(const ModalitySet& roots, const DependencyTable& table);

/// Task node id, e.g. "task.classification".
std::string task_step_id(DownstreamTask task);

class StepGraph {
 public:
  StepGraph() = default;
  /// Throws ConfigError on duplicate ids or dangling dependencies. Cycles are allowed here;
  /// see validate_acyclic.
  explicit StepGraph(std::vector<StepNode> nodes);

  /// Sorted by step_id.
  const std::vector<StepNode>& nodes() const { return nodes_; }
  bool contains(const std::string& step_id) const { return index_.contains(step_id); }
  const StepNode& node(const std::string& step_id) const;
  std::size_t size() const { return nodes_.size(); }

  /// Direct dependents of a node, sorted.
  std::vector<std::string> dependents(const std::string& step_id) const;
  /// Every node reachable backwards through depends_on.
  std::set<std::string> ancestors(const std::string& step_id) const;
  ModalitySet modalities() const;

 private:
  std::vector<StepNode> nodes_;
  std::map<std::string, std::size_t> index_;
};

struct AcyclicResult {
  bool ok = true;
  /// Witness cycle, rotated to start at its lexicographically smallest node.
  std::vector<std::string> cycle;
};

AcyclicResult validate_acyclic(const StepGraph& graph);

StepGraph build_graph(const ModalitySet& modalities, const TaskSet& tasks, const DependencyTable& deps,
                      const toolkit::TemplateCatalog& catalog, const toolkit::DatasetContext& ctx = {});
StepGraph build_graph(const planner::WorkflowIntent& intent, const DependencyTable& deps,
                      const toolkit::TemplateCatalog& catalog, const toolkit::DatasetContext& ctx = {});

/// Steps not yet completed whose dependencies are all completed, in lexicographic order.
std::vector<std::string> topo_schedule(const StepGraph& graph, const std::set<std::string>& completed);

/// Canonical export: nodes sorted by id, each with deps, phase, and template digest.
nlohmann::json export_graph(const StepGraph& graph, const toolkit::TemplateCatalog& catalog);
std::string graph_digest(const StepGraph& graph, const toolkit::TemplateCatalog& catalog);

}  // namespace neuroflow::graph
