#include "ctap/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "ctap/errors.hpp"
#include "ctap/rng.hpp"

namespace ctap::analysis {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Role role_from_name(const std::string& name) {
  if (name == "reward") return Role::reward;
  if (ends_with(name, "_next")) return Role::state_t1;
  if (ends_with(name, "_prev")) return Role::prev_action_t;
  if (name.rfind("omega", 0) == 0) return Role::action_t;
  return Role::state_t;
}

}  // namespace

std::string to_string(Role role) {
  switch (role) {
    case Role::state_t: return "state_t";
    case Role::action_t: return "action_t";
    case Role::prev_action_t: return "prev_action_t";
    case Role::state_t1: return "state_t1";
    case Role::reward: return "reward";
  }
  return "state_t";
}

TransitionDataset::TransitionDataset(std::vector<Column> columns) : columns_(std::move(columns)) {}

TransitionDataset TransitionDataset::with_layout(int n_dots) {
  const auto states = env::state_variable_names(n_dots);
  const auto actions = env::action_names(n_dots);
  std::vector<Column> cols;
  for (const auto& s : states) cols.push_back({s, Role::state_t, {}});
  for (const auto& a : actions) cols.push_back({a, Role::action_t, {}});
  for (const auto& a : actions) cols.push_back({a + "_prev", Role::prev_action_t, {}});
  for (const auto& s : states) cols.push_back({s + "_next", Role::state_t1, {}});
  cols.push_back({"reward", Role::reward, {}});
  return TransitionDataset(std::move(cols));
}

std::size_t TransitionDataset::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name == name) return i;
  throw ArgumentError("dataset has no column '" + name + "'");
}

std::vector<std::size_t> TransitionDataset::indices_with_role(Role role) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].role == role) out.push_back(i);
  return out;
}

void TransitionDataset::append_row(const std::vector<double>& row) {
  if (row.size() != columns_.size())
    throw ArgumentError(fmt::format("append_row: {} values for {} columns", row.size(), columns_.size()));
  for (std::size_t i = 0; i < row.size(); ++i)
    if (!std::isfinite(row[i])) throw ArgumentError("append_row: non-finite value for '" + columns_[i].name + "'");
  for (std::size_t i = 0; i < row.size(); ++i) columns_[i].values.push_back(row[i]);
}

void TransitionDataset::validate() const {
  const std::size_t n = n_rows();
  for (const auto& c : columns_) {
    if (c.values.size() != n) throw ArgumentError("dataset column '" + c.name + "' has a different length");
    for (double v : c.values)
      if (!std::isfinite(v)) throw ArgumentError("dataset column '" + c.name + "' contains a non-finite value");
  }
}

void TransitionDataset::write_csv(std::ostream& out) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) out << (i ? "," : "") << columns_[i].name;
  out << '\n';
  std::string line;
  for (std::size_t r = 0; r < n_rows(); ++r) {
    line.clear();
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (i) line += ',';
      line += fmt::format("{:.17g}", columns_[i].values[r]);
    }
    line += '\n';
    out << line;
  }
}

TransitionDataset TransitionDataset::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ArgumentError("dataset CSV is empty");
  std::vector<Column> cols;
  {
    std::stringstream ss(line);
    std::string name;
    while (std::getline(ss, name, ',')) cols.push_back({name, role_from_name(name), {}});
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t i = 0;
    while (std::getline(ss, cell, ',')) {
      if (i >= cols.size()) throw ArgumentError(fmt::format("dataset CSV line {}: too many fields", line_no));
      try {
        cols[i++].values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ArgumentError(fmt::format("dataset CSV line {}: bad number '{}'", line_no, cell));
      }
    }
    if (i != cols.size()) throw ArgumentError(fmt::format("dataset CSV line {}: too few fields", line_no));
  }
  TransitionDataset d(std::move(cols));
  d.validate();
  return d;
}

TransitionDataset collect_transitions(const env::ScenarioConfig& config, const agent::GaussianPolicy* policy,
                                      const CollectOptions& options) {
  if (options.n_samples < 1000) throw ArgumentError("collect_transitions: n_samples must be at least 1000");
  if (!(options.exploration_std >= 0.0) || !std::isfinite(options.exploration_std))
    throw ArgumentError("collect_transitions: exploration_std must be non-negative");
  env::ScenarioConfig cfg = config;
  cfg.rho33_threshold.reset();
  if (policy && (policy->obs_dim() != static_cast<int>(cfg.observation_size()) || policy->action_dim() != cfg.n_actions()))
    throw ArgumentError("collect_transitions: policy does not match the scenario");

  auto data = TransitionDataset::with_layout(cfg.n_dots);
  env::CtapEnv env(cfg);
  const auto n_act = static_cast<std::size_t>(cfg.n_actions());
  std::vector<double> row;
  row.reserve(data.n_columns());
  for (std::uint64_t episode = 0; data.n_rows() < options.n_samples; ++episode) {
    Rng rng(derive_seed(options.seed, {0xda7aULL, episode}));
    env::Observation obs = env.reset();
    while (!env.done() && data.n_rows() < options.n_samples) {
      std::vector<double> action(n_act);
      if (policy) {
        const Eigen::VectorXd mean = policy->forward(obs.values).mean;
        for (std::size_t j = 0; j < n_act; ++j) action[j] = mean(static_cast<Eigen::Index>(j));
      } else {
        for (auto& a : action) a = rng.uniform(0.0, pulses::kOmegaMax);
      }
      for (auto& a : action) a += options.exploration_std * pulses::kOmegaMax * rng.normal();

      row = env::state_variables(env.model(), env.state());
      const std::vector<double> prev = env.previous_action();
      auto result = env.step(action);
      const auto& applied = env.previous_action();
      row.insert(row.end(), applied.begin(), applied.end());
      row.insert(row.end(), prev.begin(), prev.end());
      const auto next = env::state_variables(env.model(), env.state());
      row.insert(row.end(), next.begin(), next.end());
      row.push_back(result.reward);
      data.append_row(row);
      obs = std::move(result.observation);
    }
  }
  return data;
}

}  // namespace ctap::analysis
