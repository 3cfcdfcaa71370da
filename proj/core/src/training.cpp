#include "ctap/training.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "ctap/errors.hpp"

namespace ctap::agent {

void TrainingLog::write_csv(std::ostream& out) const {
  out << "epoch,mean_return,mean_final_rho33,max_rho22,kl,accepted\n";
  for (const auto& r : records)
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", r.epoch, r.mean_return, r.mean_final_rho33, r.max_rho22,
                       r.kl, r.accepted ? 1 : 0);
}

int worker_count() {
  if (const char* env = std::getenv("CTAP_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::uint64_t episode_seed(std::uint64_t seed, int epoch, int episode) {
  return derive_seed(seed, {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(episode)});
}

Episode run_episode(env::CtapEnv& env, const GaussianPolicy& policy, Rng& rng) {
  Episode ep;
  env::Observation obs = env.reset();
  const auto n = static_cast<std::size_t>(env.config().n_steps);
  ep.observations.reserve(n);
  ep.actions.reserve(n);
  ep.log_probs.reserve(n);
  ep.rewards.reserve(n);
  while (!env.done()) {
    auto sample = sample_action(policy, obs.values, rng);
    auto result = env.step(sample.action);
    ep.observations.push_back(std::move(obs.values));
    ep.actions.push_back(std::move(sample.action));
    ep.log_probs.push_back(sample.log_prob);
    ep.rewards.push_back(result.reward);
    if (result.info.populations.size() > 1) ep.max_rho22 = std::max(ep.max_rho22, result.info.populations[1]);
    ep.final_fidelity = result.info.populations.back();
    obs = std::move(result.observation);
  }
  return ep;
}

std::vector<Episode> collect_episodes(const env::ScenarioConfig& config, const GaussianPolicy& policy,
                                      std::uint64_t seed, int epoch, int n_episodes, int n_threads) {
  std::vector<Episode> episodes(static_cast<std::size_t>(n_episodes));
  const int workers = std::clamp(n_threads, 1, std::max(1, n_episodes));
  auto work = [&](int w) {
    env::CtapEnv env(config);
    for (int i = w; i < n_episodes; i += workers) {
      Rng rng(episode_seed(seed, epoch, i));
      episodes[static_cast<std::size_t>(i)] = run_episode(env, policy, rng);
    }
  };
  if (workers == 1) {
    work(0);
    return episodes;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        work(w);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return episodes;
}

TrainResult train(const env::ScenarioConfig& config, const TrpoConfig& trpo, const PolicyShape& shape,
                  const TrainOptions& options) {
  config.validate();
  trpo.validate();
  const auto start = std::chrono::steady_clock::now();
  const int obs_dim = static_cast<int>(config.observation_size());
  const int act_dim = config.n_actions();

  Rng init_rng(derive_seed(trpo.seed, {0x1417ULL}));
  GaussianPolicy policy;
  if (options.warm_start) {
    policy = *options.warm_start;
    if (policy.obs_dim() != obs_dim || policy.action_dim() != act_dim)
      throw ArgumentError("train: warm-start policy does not match the scenario");
  } else {
    policy = GaussianPolicy::initialized(obs_dim, shape.hidden, act_dim, shape.log_std_init, init_rng);
  }
  ValueFunction value;
  if (options.warm_value && options.warm_value->net.input_dim() == obs_dim) {
    value = *options.warm_value;
  } else {
    value = make_value_function(obs_dim, shape.hidden, init_rng);
  }
  Rng update_rng(derive_seed(trpo.seed, {0x7a1eULL}));
  const int threads = options.n_threads > 0 ? options.n_threads : worker_count();

  TrainResult out;
  out.policy = policy;
  // Only evaluations within the intermediate-population cap compete for "best".
  double best_score = -1.0;
  auto consider = [&](const EvaluationMetrics& m, int epoch) {
    if (m.max_intermediate() > options.max_intermediate || m.final_fidelity <= best_score) return;
    best_score = m.final_fidelity;
    out.best_metrics = m;
    out.policy = policy;
    out.best_epoch = epoch;
    if (options.target_fidelity && best_score >= *options.target_fidelity) out.reached_target = true;
  };
  out.best_metrics = evaluate(policy, config, options.eval_smoothing).smoothed;
  consider(out.best_metrics, -1);

  for (int epoch = 0; epoch < trpo.total_epochs && !out.reached_target; ++epoch) {
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > options.max_wall_secs) {
      out.hit_wall_clock = true;
      break;
    }

    auto episodes = collect_episodes(config, policy, trpo.seed, epoch, trpo.episodes_per_batch, threads);
    EpochRecord rec;
    rec.epoch = epoch;
    for (auto& ep : episodes) {
      Eigen::MatrixXd obs(obs_dim, static_cast<Eigen::Index>(ep.observations.size()));
      for (std::size_t t = 0; t < ep.observations.size(); ++t)
        obs.col(static_cast<Eigen::Index>(t)) =
            Eigen::Map<const Eigen::VectorXd>(ep.observations[t].data(), obs_dim);
      const Eigen::VectorXd v = value.predict(obs);
      ep.values.assign(v.data(), v.data() + v.size());
      double ret = 0.0;
      for (double r : ep.rewards) ret += r;
      rec.mean_return += ret;
      rec.mean_final_rho33 += ep.final_fidelity;
      rec.max_rho22 += ep.max_rho22;
    }
    const auto n_ep = static_cast<double>(episodes.size());
    rec.mean_return /= n_ep;
    rec.mean_final_rho33 /= n_ep;
    rec.max_rho22 /= n_ep;

    const auto gae = compute_gae(episodes, trpo.discount, trpo.gae_lambda);
    const auto batch = make_batch(episodes, gae);
    UpdateStats stats;
    try {
      stats = trpo_update(policy, value, batch, trpo, update_rng);
    } catch (const NumericalError& e) {
      throw NumericalError(fmt::format("epoch {}: {}", epoch, e.what()));
    }
    if (stats.accepted && stats.kl > trpo.max_kl)
      throw NumericalError(fmt::format("epoch {}: accepted step violates the trust region (kl {})", epoch, stats.kl));
    rec.kl = stats.kl;
    rec.accepted = stats.accepted;
    out.log.records.push_back(rec);
    out.epochs_run = epoch + 1;
    if (options.on_epoch) options.on_epoch(rec);

    if (options.eval_every > 0 && (epoch + 1) % options.eval_every == 0) {
      consider(evaluate(policy, config, options.eval_smoothing).smoothed, epoch);
      out.best_so_far.push_back(std::max(best_score, 0.0));
    }
  }
  out.final_policy = policy;
  out.value = value;
  return out;
}

}  // namespace ctap::agent
