#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ctap/env.hpp"
#include "ctap/policy.hpp"

namespace ctap::analysis {

enum class Role { state_t, action_t, prev_action_t, state_t1, reward };

std::string to_string(Role role);

/// Column-major transition table. Column names carry the role as a suffix: `rho22`, `omega12`,
/// `omega12_prev`, `rho22_next`, `reward`.
class TransitionDataset {
 public:
  struct Column {
    std::string name;
    Role role;
    std::vector<double> values;
  };

  TransitionDataset() = default;
  explicit TransitionDataset(std::vector<Column> columns);

  /// Empty table with the collect_transitions layout for the given array size.
  static TransitionDataset with_layout(int n_dots);

  std::size_t n_rows() const { return columns_.empty() ? 0 : columns_.front().values.size(); }
  std::size_t n_columns() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::size_t i) const { return columns_.at(i); }
  /// Throws ArgumentError for unknown names.
  std::size_t index_of(const std::string& name) const;
  std::vector<std::size_t> indices_with_role(Role role) const;

  void append_row(const std::vector<double>& row);

  /// Throws ArgumentError when ragged or non-finite.
  void validate() const;

  void write_csv(std::ostream& out) const;
  /// Roles are recovered from the column names.
  static TransitionDataset read_csv(std::istream& in);

 private:
  std::vector<Column> columns_;
};

struct CollectOptions {
  std::size_t n_samples = 100000;
  std::uint64_t seed = 0;
  double exploration_std = 0.1;  // in units of Omega_max
};

/// Rolls out episodes (early stop disabled) until n_samples rows exist; the last episode is
/// truncated. Without a policy the mean action is drawn uniformly in [0, Omega_max] each step.
/// Gaussian noise is added to every action before the env clips it; rows record the clipped action.
TransitionDataset collect_transitions(const env::ScenarioConfig& config, const agent::GaussianPolicy* policy,
                                      const CollectOptions& options);

}  // namespace ctap::analysis
