#include "ctap/tbn.hpp"

#include <algorithm>
#include <map>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "ctap/errors.hpp"
#include "ctap/rng.hpp"

namespace ctap::analysis {

namespace {

const std::string kNext = "_next";

std::string base_name(const std::string& name) {
  if (name.size() > kNext.size() && name.compare(name.size() - kNext.size(), kNext.size(), kNext) == 0)
    return name.substr(0, name.size() - kNext.size());
  return name;
}

int layer_of(Role r) {
  switch (r) {
    case Role::state_t:
    case Role::action_t:
    case Role::prev_action_t: return 0;
    case Role::state_t1: return 1;
    case Role::reward: return 2;
  }
  return 0;
}

}  // namespace

std::size_t DependencyGraph::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].name == name) return i;
  throw ArgumentError("graph has no node '" + name + "'");
}

std::vector<std::size_t> DependencyGraph::parents(std::size_t target) const {
  std::vector<std::size_t> out;
  for (const auto& e : edges)
    if (e.target == target) out.push_back(e.source);
  return out;
}

std::vector<std::string> DependencyGraph::relevant() const {
  std::vector<std::string> out;
  for (auto i : relevance_closure(*this)) out.push_back(nodes[i].name);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> DependencyGraph::prunable() const {
  std::vector<std::string> out;
  for (const auto& n : nodes)
    if (n.prunable) out.push_back(n.name);
  std::sort(out.begin(), out.end());
  return out;
}

void TbnConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ArgumentError("2TBN: epsilon must lie in (0, 1)");
  if (!(redundancy_tolerance >= 0.0)) throw ArgumentError("2TBN: redundancy tolerance must be non-negative");
  forest.validate();
}

std::vector<std::size_t> redundant_state_columns(const TransitionDataset& data, double tolerance) {
  const auto n = static_cast<Eigen::Index>(data.n_rows());
  const auto states = data.indices_with_role(Role::state_t);
  std::vector<bool> dropped(states.size(), false);
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Eigen::Map<const Eigen::VectorXd> y(data.column(states[k]).values.data(), n);
    const double var = (y.array() - y.mean()).square().mean();
    if (var <= 0.0) continue;
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < states.size(); ++j)
      if (j != k && !dropped[j]) others.push_back(states[j]);
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(others.size()) + 1);
    x.col(0).setOnes();
    for (std::size_t j = 0; j < others.size(); ++j)
      x.col(static_cast<Eigen::Index>(j) + 1) = Eigen::Map<const Eigen::VectorXd>(data.column(others[j]).values.data(), n);
    const Eigen::VectorXd coef = x.colPivHouseholderQr().solve(y);
    const double resid = (y - x * coef).squaredNorm() / static_cast<double>(n);
    if (resid <= tolerance * var) {
      dropped[k] = true;
      out.push_back(states[k]);
    }
  }
  return out;
}

Selection iterative_input_selection(const TransitionDataset& data, std::size_t target,
                                    const std::vector<std::size_t>& candidates, double epsilon,
                                    const ForestConfig& forest) {
  Selection sel;
  const auto& y = data.column(target).values;
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); })) return sel;

  std::vector<double> residual = y;
  std::vector<std::size_t> remaining = candidates;
  for (std::uint64_t round = 0; !remaining.empty(); ++round) {
    ForestConfig rank_cfg = forest;
    rank_cfg.seed = derive_seed(forest.seed, {target, round, 1});
    std::vector<std::vector<double>> feats;
    std::vector<std::string> names;
    for (auto c : remaining) {
      feats.push_back(data.column(c).values);
      names.push_back(data.column(c).name);
    }
    const auto ranking = feature_importance(feats, names, residual, rank_cfg);
    if (ranking.degenerate_target) break;
    // ties resolve to the smaller name
    std::size_t best = 0;
    for (std::size_t j = 1; j < remaining.size(); ++j) {
      const double a = ranking.importance[j], b = ranking.importance[best];
      if (a > b || (a == b && names[j] < names[best])) best = j;
    }

    std::vector<std::size_t> trial = sel.inputs;
    trial.push_back(remaining[best]);
    feats.clear();
    names.clear();
    for (auto c : trial) {
      feats.push_back(data.column(c).values);
      names.push_back(data.column(c).name);
    }
    ForestConfig fit_cfg = forest;
    fit_cfg.seed = derive_seed(forest.seed, {target, round, 2});
    const auto fit = fit_forest(feats, names, y, fit_cfg, true);
    const double gain = fit.r2 - sel.r2;
    if (gain < epsilon) break;
    sel.inputs = std::move(trial);
    sel.gains.push_back(gain);
    sel.r2 = fit.r2;
    for (std::size_t i = 0; i < y.size(); ++i) residual[i] = y[i] - fit.fitted[i];
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return sel;
}

std::set<std::size_t> relevance_closure(const DependencyGraph& graph) {
  std::map<std::string, std::size_t> next_of;  // base name -> next-state node
  std::map<std::string, std::size_t> now_of;   // base name -> layer-t node
  std::vector<std::size_t> rewards;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& n = graph.nodes[i];
    if (n.role == Role::state_t1) next_of[base_name(n.name)] = i;
    else if (n.role == Role::reward) rewards.push_back(i);
    else now_of[n.name] = i;
  }

  std::set<std::size_t> relevant;
  std::vector<std::size_t> queue;  // next-state nodes whose parents still need visiting
  auto mark_state = [&](const std::string& base) {
    const auto it = now_of.find(base);
    if (it == now_of.end() || !relevant.insert(it->second).second) return;
    if (const auto nx = next_of.find(base); nx != next_of.end()) queue.push_back(nx->second);
  };
  for (auto r : rewards)
    for (auto p : graph.parents(r)) mark_state(base_name(graph.nodes[p].name));
  while (!queue.empty()) {
    const auto target = queue.back();
    queue.pop_back();
    for (auto p : graph.parents(target)) {
      if (graph.nodes[p].role == Role::state_t)
        mark_state(graph.nodes[p].name);
      else
        relevant.insert(p);
    }
  }
  return relevant;
}

void mark_prunable(DependencyGraph& graph) {
  const auto relevant = relevance_closure(graph);
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    auto& n = graph.nodes[i];
    if (n.role == Role::state_t) {
      n.prunable = relevant.count(i) == 0;
    } else if (n.role == Role::state_t1) {
      const auto base = base_name(n.name);
      n.prunable = std::none_of(relevant.begin(), relevant.end(), [&](std::size_t j) { return graph.nodes[j].name == base; });
    }
  }
}

DependencyGraph build_2tbn(const TransitionDataset& data, const TbnConfig& config) {
  config.validate();
  data.validate();
  if (data.n_rows() < 1000) throw ArgumentError("build_2tbn: need at least 1000 rows");
  if (data.indices_with_role(Role::reward).size() != 1) throw ArgumentError("build_2tbn: dataset needs exactly one reward column");

  DependencyGraph g;
  std::vector<std::size_t> node_of(data.n_columns());
  for (std::size_t c = 0; c < data.n_columns(); ++c) {
    node_of[c] = g.nodes.size();
    g.nodes.push_back({data.column(c).name, data.column(c).role});
  }

  std::set<std::string> redundant;
  for (auto c : redundant_state_columns(data, config.redundancy_tolerance)) {
    redundant.insert(data.column(c).name);
    g.nodes[node_of[c]].redundant = true;
  }
  for (auto c : data.indices_with_role(Role::state_t1))
    if (redundant.count(base_name(data.column(c).name))) g.nodes[node_of[c]].redundant = true;

  std::vector<std::size_t> layer_t, layer_t1;
  for (std::size_t c = 0; c < data.n_columns(); ++c) {
    if (g.nodes[node_of[c]].redundant) continue;
    const int layer = layer_of(data.column(c).role);
    if (layer == 0) layer_t.push_back(c);
    if (layer == 1) layer_t1.push_back(c);
  }

  auto add_edges = [&](std::size_t target, const std::vector<std::size_t>& candidates) {
    const auto sel = iterative_input_selection(data, target, candidates, config.epsilon, config.forest);
    for (std::size_t j = 0; j < sel.inputs.size(); ++j) g.edges.push_back({node_of[sel.inputs[j]], node_of[target], sel.gains[j]});
  };
  for (auto c : layer_t1) add_edges(c, layer_t);
  add_edges(data.indices_with_role(Role::reward).front(), layer_t1);

  mark_prunable(g);
  for (auto& n : g.nodes)
    if (n.redundant && (n.role == Role::state_t || n.role == Role::state_t1)) n.prunable = true;
  return g;
}

std::string export_dot(const DependencyGraph& graph) {
  std::string out = "digraph tbn {\n  rankdir=LR;\n  node [fontsize=10];\n";
  const char* layer_names[] = {"t", "t1", "reward"};
  for (int layer = 0; layer < 3; ++layer) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < graph.nodes.size(); ++i)
      if (layer_of(graph.nodes[i].role) == layer) members.push_back(i);
    std::sort(members.begin(), members.end(), [&](auto a, auto b) { return graph.nodes[a].name < graph.nodes[b].name; });
    out += fmt::format("  subgraph cluster_{} {{\n    rank=same;\n    style=invis;\n", layer_names[layer]);
    for (auto i : members) {
      const auto& n = graph.nodes[i];
      const char* shape = n.role == Role::reward ? "diamond"
                          : (n.role == Role::action_t || n.role == Role::prev_action_t) ? "box"
                                                                                          : "circle";
      std::string style = n.prunable ? "dashed" : "solid";
      if (n.role == Role::reward) style += ",filled";
      out += fmt::format("    \"{}\" [shape={}, style=\"{}\"{}];\n", n.name, shape, style,
                         n.role == Role::reward ? ", fillcolor=grey" : "");
    }
    out += "  }\n";
  }
  std::vector<GraphEdge> edges = graph.edges;
  std::sort(edges.begin(), edges.end(), [&](const GraphEdge& a, const GraphEdge& b) {
    const auto ka = std::make_pair(graph.nodes[a.source].name, graph.nodes[a.target].name);
    const auto kb = std::make_pair(graph.nodes[b.source].name, graph.nodes[b.target].name);
    return ka < kb;
  });
  for (const auto& e : edges)
    out += fmt::format("  \"{}\" -> \"{}\" [penwidth={:.3f}, label=\"{:.3f}\"];\n", graph.nodes[e.source].name,
                       graph.nodes[e.target].name, 5.0 * e.weight, e.weight);
  out += "}\n";
  return out;
}

}  // namespace ctap::analysis
