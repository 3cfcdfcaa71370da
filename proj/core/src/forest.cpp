#include "ctap/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "ctap/errors.hpp"
#include "ctap/rng.hpp"
#include "ctap/training.hpp"

namespace ctap::analysis {

namespace {

struct BinnedFeature {
  std::vector<std::uint8_t> bin;  // per row
  int n_bins = 0;
};

BinnedFeature quantile_bins(const std::vector<double>& x, int max_bins) {
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges;  // upper edges, exclusive of the maximum
  for (int b = 1; b < max_bins; ++b) {
    const double q = sorted[static_cast<std::size_t>(static_cast<double>(b) / max_bins * static_cast<double>(sorted.size() - 1))];
    if (q < sorted.back() && (edges.empty() || q > edges.back())) edges.push_back(q);
  }
  BinnedFeature f;
  f.n_bins = static_cast<int>(edges.size()) + 1;
  f.bin.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    f.bin[i] = static_cast<std::uint8_t>(std::lower_bound(edges.begin(), edges.end(), x[i]) - edges.begin());
  return f;
}

struct Node {
  std::vector<std::uint32_t> rows;     // bootstrap sample, drives the split search
  std::vector<std::uint32_t> predict;  // every row, routed along for in-sample predictions
  int depth = 0;
};

struct Stats {
  double n = 0, sum = 0, sq = 0;
  void add(double y) { n += 1; sum += y; sq += y * y; }
  double sse() const { return n > 0 ? std::max(0.0, sq - sum * sum / n) : 0.0; }
};

struct TreeOutput {
  std::vector<double> gain;       // variance reduction per feature
  std::vector<double> predicted;  // empty unless requested
};

TreeOutput grow_tree(const std::vector<BinnedFeature>& features, const std::vector<double>& y, const ForestConfig& cfg,
                     std::uint64_t seed, bool predict) {
  const std::size_t p = features.size();
  const std::size_t n = y.size();
  const auto k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));
  Rng rng(seed);
  TreeOutput out;
  out.gain.assign(p, 0.0);
  if (predict) out.predicted.assign(n, 0.0);

  Node root;
  root.rows.resize(n);
  if (cfg.bootstrap)
    for (auto& r : root.rows) r = static_cast<std::uint32_t>(rng.index(n));
  else
    std::iota(root.rows.begin(), root.rows.end(), 0u);
  if (predict) {
    root.predict.resize(n);
    std::iota(root.predict.begin(), root.predict.end(), 0u);
  }

  std::vector<Node> stack;
  stack.push_back(std::move(root));
  std::vector<std::size_t> order(p);
  std::vector<Stats> hist;
  while (!stack.empty()) {
    Node node = std::move(stack.back());
    stack.pop_back();
    Stats total;
    for (auto r : node.rows) total.add(y[r]);
    auto make_leaf = [&] {
      const double value = total.n > 0 ? total.sum / total.n : 0.0;
      for (auto r : node.predict) out.predicted[r] = value;
    };
    const double parent_sse = total.sse();
    if (node.depth >= cfg.max_depth || node.rows.size() < 2 * static_cast<std::size_t>(cfg.min_samples_leaf) ||
        parent_sse <= 0.0) {
      make_leaf();
      continue;
    }

    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) std::swap(order[i], order[i + rng.index(p - i)]);

    double best_gain = 0.0;
    std::size_t best_feature = p;
    int best_edge = -1;
    for (std::size_t c = 0; c < k; ++c) {
      const auto& f = features[order[c]];
      hist.assign(static_cast<std::size_t>(f.n_bins), Stats{});
      for (auto r : node.rows) hist[f.bin[r]].add(y[r]);
      Stats left;
      for (int e = 0; e + 1 < f.n_bins; ++e) {
        const auto& h = hist[static_cast<std::size_t>(e)];
        left.n += h.n;
        left.sum += h.sum;
        left.sq += h.sq;
        if (left.n < cfg.min_samples_leaf) continue;
        if (total.n - left.n < cfg.min_samples_leaf) break;
        Stats right{total.n - left.n, total.sum - left.sum, total.sq - left.sq};
        const double g = parent_sse - left.sse() - right.sse();
        if (g > best_gain) {
          best_gain = g;
          best_feature = order[c];
          best_edge = e;
        }
      }
    }
    if (best_feature == p) {
      make_leaf();
      continue;
    }
    out.gain[best_feature] += best_gain;
    Node l, r;
    l.depth = r.depth = node.depth + 1;
    const auto& f = features[best_feature];
    for (auto row : node.rows) (f.bin[row] <= best_edge ? l : r).rows.push_back(row);
    for (auto row : node.predict) (f.bin[row] <= best_edge ? l : r).predict.push_back(row);
    stack.push_back(std::move(r));
    stack.push_back(std::move(l));
  }
  return out;
}

}  // namespace

void ForestConfig::validate() const {
  if (n_trees < 1) throw ArgumentError("ForestConfig: n_trees must be positive");
  if (max_depth < 1) throw ArgumentError("ForestConfig: max_depth must be positive");
  if (min_samples_leaf < 1) throw ArgumentError("ForestConfig: min_samples_leaf must be positive");
  if (n_bins < 2 || n_bins > 256) throw ArgumentError("ForestConfig: n_bins must lie in [2, 256]");
}

ForestFit fit_forest(const std::vector<std::vector<double>>& features, const std::vector<std::string>& names,
                     const std::vector<double>& target, const ForestConfig& config, bool predict) {
  config.validate();
  if (features.empty()) throw ArgumentError("feature_importance: no candidates");
  if (names.size() != features.size()) throw ArgumentError("feature_importance: names and features differ in count");
  for (const auto& f : features)
    if (f.size() != target.size()) throw ArgumentError("feature_importance: feature length differs from target");
  if (target.size() < 2) throw ArgumentError("feature_importance: need at least two rows");

  ForestFit fit;
  auto& out = fit.importance;
  out.names = names;
  out.importance.assign(features.size(), 0.0);
  const double mean = std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(target.size());
  if (predict) fit.fitted.assign(target.size(), mean);
  const auto [lo, hi] = std::minmax_element(target.begin(), target.end());
  if (*lo == *hi) {
    out.degenerate_target = true;
    fit.r2 = 1.0;
    return fit;
  }

  // canonical order by name
  std::vector<std::size_t> perm(features.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return names[a] < names[b]; });
  std::vector<BinnedFeature> binned;
  binned.reserve(perm.size());
  for (auto i : perm) binned.push_back(quantile_bins(features[i], config.n_bins));

  const int threads = std::clamp(config.n_threads > 0 ? config.n_threads : agent::worker_count(), 1, config.n_trees);
  std::vector<TreeOutput> trees(static_cast<std::size_t>(config.n_trees));
  auto work = [&](int w) {
    for (int t = w; t < config.n_trees; t += threads) {
      auto tree = grow_tree(binned, target, config, derive_seed(config.seed, {0x7ee5ULL, static_cast<std::uint64_t>(t)}),
                            predict);
      const double sum = std::accumulate(tree.gain.begin(), tree.gain.end(), 0.0);
      if (sum > 0.0)
        for (auto& v : tree.gain) v /= sum;
      trees[static_cast<std::size_t>(t)] = std::move(tree);
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }

  std::vector<double> canonical(perm.size(), 0.0);
  for (const auto& tree : trees)
    for (std::size_t j = 0; j < tree.gain.size(); ++j) canonical[j] += tree.gain[j];
  const double total = std::accumulate(canonical.begin(), canonical.end(), 0.0);
  if (total <= 0.0)
    out.degenerate_target = true;
  else
    for (std::size_t j = 0; j < perm.size(); ++j) out.importance[perm[j]] = canonical[j] / total;

  if (predict) {
    std::fill(fit.fitted.begin(), fit.fitted.end(), 0.0);
    for (const auto& tree : trees)
      for (std::size_t i = 0; i < target.size(); ++i) fit.fitted[i] += tree.predicted[i];
    double sse = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
      fit.fitted[i] /= static_cast<double>(trees.size());
      sse += (target[i] - fit.fitted[i]) * (target[i] - fit.fitted[i]);
      sst += (target[i] - mean) * (target[i] - mean);
    }
    fit.r2 = 1.0 - sse / sst;
  }
  return fit;
}

ImportanceResult feature_importance(const std::vector<std::vector<double>>& features,
                                    const std::vector<std::string>& names, const std::vector<double>& target,
                                    const ForestConfig& config) {
  return fit_forest(features, names, target, config, false).importance;
}

ImportanceResult feature_importance(const TransitionDataset& data, std::size_t target,
                                    std::span<const std::size_t> candidates, const ForestConfig& config) {
  if (target >= data.n_columns()) throw ArgumentError("feature_importance: target column out of range");
  std::vector<std::vector<double>> features;
  std::vector<std::string> names;
  for (auto c : candidates) {
    if (c == target) throw ArgumentError("feature_importance: target '" + data.column(c).name + "' is also a candidate");
    features.push_back(data.column(c).values);
    names.push_back(data.column(c).name);
  }
  return feature_importance(features, names, data.column(target).values, config);
}

}  // namespace ctap::analysis
