#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ctap/checkpoint.hpp"
#include "ctap/errors.hpp"
#include "ctap/evaluation.hpp"
#include "ctap/rng.hpp"
#include "ctap/training.hpp"

using namespace ctap;
using namespace ctap::agent;

namespace {

env::ScenarioConfig reduced_ideal() {
  env::ScenarioConfig c;
  c.t_max_pi_units = 12;
  c.observation_mode = env::ObservationMode::reduced;
  return c;
}

std::string log_text(const TrainingLog& log) {
  std::ostringstream out;
  log.write_csv(out);
  return out.str();
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ctap_test_" + name);
}

}  // namespace

TEST_CASE("zero epochs returns the initial policy") {
  TrpoConfig t;
  t.total_epochs = 0;
  t.seed = 5;
  const auto r = train(reduced_ideal(), t, {});
  CHECK(r.log.records.empty());
  CHECK(r.epochs_run == 0);
  CHECK(r.best_epoch == -1);
  CHECK(r.policy.flat() == r.final_policy.flat());
  const auto again = train(reduced_ideal(), t, {});
  CHECK(again.policy.flat() == r.policy.flat());
  CHECK(log_text(r.log) == "epoch,mean_return,mean_final_rho33,max_rho22,kl,accepted\n");
}

TEST_CASE("training is deterministic and independent of the thread count") {
  TrpoConfig t;
  t.total_epochs = 4;
  t.seed = 11;
  TrainOptions one;
  one.n_threads = 1;
  TrainOptions three;
  three.n_threads = 3;
  const auto a = train(reduced_ideal(), t, {}, one);
  const auto b = train(reduced_ideal(), t, {}, one);
  const auto c = train(reduced_ideal(), t, {}, three);
  CHECK(log_text(a.log) == log_text(b.log));
  CHECK(log_text(a.log) == log_text(c.log));
  CHECK(a.final_policy.flat() == c.final_policy.flat());
  CHECK(a.log.records.size() == 4);
  t.seed = 12;
  CHECK(log_text(train(reduced_ideal(), t, {}, one).log) != log_text(a.log));
}

TEST_CASE("accepted updates respect the trust region over a 50-epoch run") {
  TrpoConfig t;
  t.total_epochs = 50;
  t.seed = 3;
  int accepted = 0;
  TrainOptions o;
  o.on_epoch = [&](const EpochRecord& r) {
    if (r.accepted) {
      ++accepted;
      CHECK(r.kl <= t.max_kl);
    }
  };
  const auto r = train(reduced_ideal(), t, {}, o);
  CHECK(r.epochs_run == 50);
  CHECK(accepted > 25);
  // best-so-far tracking never goes down
  for (std::size_t i = 1; i < r.best_so_far.size(); ++i) CHECK(r.best_so_far[i] >= r.best_so_far[i - 1]);
  CHECK(r.best_so_far.size() == 50);  // one entry per evaluation
  // the returned policy is the one whose evaluation is recorded
  const auto ev = evaluate(r.policy, reduced_ideal(), Smoothing::ma4);
  CHECK(ev.smoothed.final_fidelity == r.best_metrics.final_fidelity);
}

TEST_CASE("evaluation contracts") {
  Rng rng(4);
  const auto cfg = reduced_ideal();
  const auto p = GaussianPolicy::initialized(4, {16}, 2, std::log(0.3), rng);
  const auto none = evaluate(p, cfg, Smoothing::none);
  const auto again = evaluate(p, cfg, Smoothing::none);
  CHECK(none.smoothed.final_fidelity == again.smoothed.final_fidelity);
  CHECK(none.smoothed.max_population == again.smoothed.max_population);
  CHECK(none.raw.final_fidelity == none.smoothed.final_fidelity);

  const auto raw = rollout_schedule(policy_controller(p), cfg);
  const auto ma1 = simulate_schedule(cfg, pulses::moving_average(raw, 1));
  CHECK(ma1.final_fidelity == none.smoothed.final_fidelity);
  CHECK(ma1.max_population == none.smoothed.max_population);
  CHECK(ma1.trace_drift == none.smoothed.trace_drift);

  const auto sm = evaluate(p, cfg, Smoothing::spline);
  CHECK(sm.schedule.n_steps() == 4 * raw.n_steps());
  CHECK(sm.raw.final_fidelity == none.raw.final_fidelity);

  auto full = cfg;
  full.observation_mode = env::ObservationMode::full;
  CHECK_THROWS_AS(evaluate(p, full, Smoothing::none), ArgumentError);
}

TEST_CASE("baseline schedule fed through the controller harness matches direct simulation") {
  for (double gd : {0.0, 0.01}) {
    auto cfg = reduced_ideal();
    cfg.gamma_d = gd;
    const auto base = env::baseline_schedule(cfg);
    const auto direct = simulate_schedule(cfg, base);
    const auto ev = evaluate_controller(schedule_controller(base), cfg, Smoothing::none);
    CHECK(std::abs(ev.smoothed.final_fidelity - direct.final_fidelity) <= 1e-9);
    CHECK(ev.raw_schedule.channels == base.channels);
  }
}

TEST_CASE("checkpoint round trip is bitwise") {
  Rng rng(5);
  PolicyCheckpoint ck;
  const auto cfg = reduced_ideal();
  ck.obs_layout = cfg.observation_layout();
  ck.policy = GaussianPolicy::initialized(4, {16, 8}, 2, std::log(0.3), rng);
  auto theta = ck.policy.flat();
  for (auto& v : theta) v += 1e-3 * rng.normal() + 1.0 / 3.0;
  ck.policy.set_flat(theta);
  ck.value = make_value_function(4, {16, 8}, rng);
  ck.value->offset = -37.25;
  ck.value->scale = 3.0 / 7.0;
  ck.value->calibrated = true;
  ck.env_config = env::to_config_text(cfg);
  ck.seed = 0xFFFFFFFFFFFFFFFFULL;
  ck.epoch = 17;
  ck.metrics["final_fidelity"] = 0.1 + 0.2;

  const auto path = temp_path("ckpt.json");
  save_checkpoint(path, ck);
  const auto back = load_checkpoint(path);
  std::filesystem::remove(path);
  CHECK(back.policy.flat() == ck.policy.flat());
  CHECK(back.policy.mean_net().layer_dims() == ck.policy.mean_net().layer_dims());
  REQUIRE(back.value.has_value());
  CHECK(back.value->net.flat() == ck.value->net.flat());
  CHECK(back.value->offset == ck.value->offset);
  CHECK(back.value->scale == ck.value->scale);
  CHECK(back.seed == ck.seed);
  CHECK(back.epoch == 17);
  CHECK(back.metrics.at("final_fidelity") == 0.1 + 0.2);
  CHECK(back.env_config == ck.env_config);
  CHECK(checkpoint_to_json(back) == checkpoint_to_json(ck));

  const auto a = rollout_schedule(policy_controller(ck.policy), cfg);
  const auto b = rollout_schedule(policy_controller(back.policy), cfg);
  CHECK(a.channels == b.channels);
  CHECK_NOTHROW(require_compatible(back, cfg));
}

TEST_CASE("checkpoint errors") {
  CHECK_THROWS_AS(checkpoint_from_json("{not json"), ConfigError);
  CHECK_THROWS_AS(checkpoint_from_json("{\"version\": 99}"), ConfigError);
  CHECK_THROWS_AS(load_checkpoint(temp_path("missing.json")), ConfigError);

  Rng rng(6);
  PolicyCheckpoint ck;
  ck.obs_layout = "ctap3-reduced";
  ck.policy = GaussianPolicy::initialized(4, {16}, 2, std::log(0.3), rng);
  auto full = reduced_ideal();
  full.observation_mode = env::ObservationMode::full;
  CHECK_THROWS_AS(require_compatible(ck, full), ArgumentError);

  auto text = checkpoint_to_json(ck);
  const auto pos = text.find("\"log_std\"");
  REQUIRE(pos != std::string::npos);
  text.insert(text.find('[', pos) + 1, "1.0,");
  CHECK_THROWS_AS(checkpoint_from_json(text), ConfigError);
}

TEST_CASE("training log CSV layout") {
  TrainingLog log;
  log.records.push_back({0, -75.5, 0.25, 0.125, 0.004, true});
  log.records.push_back({1, -70.0, 0.5, 0.0625, 0.0, false});
  CHECK(log_text(log) ==
        "epoch,mean_return,mean_final_rho33,max_rho22,kl,accepted\n0,-75.5,0.25,0.125,0.0040000000000000001,1\n"
        "1,-70,0.5,0.0625,0,0\n");
}
