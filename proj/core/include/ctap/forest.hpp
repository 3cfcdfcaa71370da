#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctap/dataset.hpp"

namespace ctap::analysis {

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 8;
  int min_samples_leaf = 5;
  int n_bins = 64;      // quantile bins per feature; split thresholds lie on bin edges
  bool bootstrap = true;
  std::uint64_t seed = 0;
  int n_threads = 0;    // 0: one per tree up to the worker count

  void validate() const;
};

struct ImportanceResult {
  std::vector<std::string> names;  // candidate names, in the caller's order
  std::vector<double> importance;  // same order; non-negative, sums to 1 unless degenerate
  bool degenerate_target = false;  // constant target: all importances zero
};

/// Random-forest regression of the target on the candidates. Each split draws ceil(sqrt(p))
/// candidates and picks the variance-reduction-maximizing bin edge among them. A feature's
/// importance is its share of the total variance reduction in a tree, averaged over trees and
/// normalized. Candidates are processed in name order, so the result does not depend on the order
/// in which they are given. Throws ArgumentError when the target is among the candidates.
ImportanceResult feature_importance(const TransitionDataset& data, std::size_t target,
                                    std::span<const std::size_t> candidates, const ForestConfig& config = {});

/// Same estimator on plain columns. names.size() must equal features.size().
ImportanceResult feature_importance(const std::vector<std::vector<double>>& features,
                                    const std::vector<std::string>& names, const std::vector<double>& target,
                                    const ForestConfig& config = {});

struct ForestFit {
  ImportanceResult importance;
  std::vector<double> fitted;  // in-sample ensemble prediction per row, when requested
  double r2 = 0.0;             // in-sample coefficient of determination (1 for a constant target)
};

ForestFit fit_forest(const std::vector<std::vector<double>>& features, const std::vector<std::string>& names,
                     const std::vector<double>& target, const ForestConfig& config, bool predict);

}  // namespace ctap::analysis
