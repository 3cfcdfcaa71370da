#pragma once

#include <set>
#include <string>
#include <vector>

#include "ctap/dataset.hpp"
#include "ctap/forest.hpp"

namespace ctap::analysis {

struct GraphNode {
  std::string name;  // dataset column name
  Role role;
  bool prunable = false;   // state variables outside the relevant set
  bool redundant = false;  // linearly determined by earlier state variables
};

struct GraphEdge {
  std::size_t source = 0;  // node indices
  std::size_t target = 0;
  double weight = 0.0;     // share of the target's variance explained by adding this input
};

struct DependencyGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;

  std::size_t index_of(const std::string& name) const;
  std::vector<std::size_t> parents(std::size_t target) const;
  /// Variable names (layer-t spelling) of the relevant set, sorted.
  std::vector<std::string> relevant() const;
  std::vector<std::string> prunable() const;
};

struct TbnConfig {
  double epsilon = 0.05;
  ForestConfig forest;
  double redundancy_tolerance = 1e-9;  // relative residual variance below which a column is redundant

  void validate() const;
};

/// State_t columns, visited in order, that an intercept-plus-linear fit on all other state_t
/// columns not yet dropped reproduces to within the tolerance. Constant columns are never flagged.
std::vector<std::size_t> redundant_state_columns(const TransitionDataset& data, double tolerance);

struct Selection {
  std::vector<std::size_t> inputs;  // dataset columns, in selection order
  std::vector<double> gains;        // R^2 increase contributed by each input
  double r2 = 0.0;
};

/// Forward selection: rank the remaining candidates by forest importance on the current residual,
/// add the top one, refit the target on the selected set, and stop when the R^2 gain drops below
/// epsilon (the last candidate is then discarded).
Selection iterative_input_selection(const TransitionDataset& data, std::size_t target,
                                    const std::vector<std::size_t>& candidates, double epsilon,
                                    const ForestConfig& forest);

/// Relevant state variables: parents of the reward, then transitively the state parents of every
/// relevant variable's next-step node. Returns layer-t node indices (state, action and previous
/// action) that feed a relevant target.
std::set<std::size_t> relevance_closure(const DependencyGraph& graph);

/// Layer t: state, action and previous-action nodes; layer t+1: next-state nodes; then the reward.
/// Next-state targets select among non-redundant layer-t columns, the reward among non-redundant
/// next-state columns. Redundant columns get no edges. Prunable marks follow relevance_closure.
DependencyGraph build_2tbn(const TransitionDataset& data, const TbnConfig& config = {});

/// Marks prunable state nodes from relevance_closure in place.
void mark_prunable(DependencyGraph& graph);

/// Graphviz text: ranked layers, nodes sorted by name within a layer, pen width 5 * weight,
/// prunable nodes dashed.
std::string export_dot(const DependencyGraph& graph);

}  // namespace ctap::analysis
