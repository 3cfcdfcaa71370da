#include "ctap_cli/cli.hpp"

#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

#include "ctap/checkpoint.hpp"
#include "ctap/config.hpp"
#include "ctap/errors.hpp"
#include "ctap/tbn.hpp"

#ifndef CTAP_VERSION
#define CTAP_VERSION "unknown"
#endif

namespace ctap::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now())));
}

void write_atomically(const fs::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ArgumentError("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw ArgumentError("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

class Run {
 public:
  Run(std::string command, const fs::path& out, std::uint64_t seed)
      : command_(std::move(command)), out_(out), seed_(seed), started_(utc_now()) {
    fs::create_directories(out_);
  }

  void set_config(std::string text) { config_ = std::move(text); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  fs::path file(const std::string& name) {
    outputs_.push_back(name);
    return out_ / name;
  }

  void write(const std::string& name, const std::string& text) { write_atomically(file(name), text); }

  void finish(const std::string& status, const std::string& error = {}) {
    json m;
    m["command"] = command_;
    m["config"] = config_;
    m["seed"] = seed_;
    m["version"] = CTAP_VERSION;
    m["started"] = started_;
    m["finished"] = utc_now();
    m["status"] = status;
    if (!error.empty()) m["error"] = error;
    json files = json::array();
    for (const auto& o : outputs_)
      if (fs::exists(out_ / o)) files.push_back(o);
    m["outputs"] = files;
    write_atomically(out_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  std::string command_;
  fs::path out_;
  std::uint64_t seed_;
  std::string started_;
  std::string config_;
  std::vector<std::string> outputs_;
};

template <class Body>
void with_manifest(Run& run, Body&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    run.finish("failed", e.what());
    throw;
  }
  run.finish("ok");
}

json metrics_json(const agent::EvaluationMetrics& m) {
  json j;
  j["final_fidelity"] = m.final_fidelity;
  j["max_rho22"] = m.max_population.size() > 1 ? m.max_population[1] : 0.0;
  j["max_population"] = m.max_population;
  j["transfer_time_to_0.99"] = m.transfer_time ? json(*m.transfer_time) : json(nullptr);
  j["trace_drift"] = m.trace_drift;
  j["final_dot_trace"] = m.final_dot_trace;
  return j;
}

template <class Writer>
std::string to_text(Writer&& w) {
  std::ostringstream ss;
  w(ss);
  return ss.str();
}

void write_run_outputs(Run& run, const env::ScenarioConfig& config, const quantum::Trajectory& traj) {
  const auto model = config.model();
  run.write("trajectory.csv", to_text([&](std::ostream& o) { quantum::write_trajectory_csv(o, model, traj); }));
}

}  // namespace

TrainingSettings load_training_settings(const fs::path& path) {
  const auto kv = KeyValueFile::load(path);
  TrainingSettings s;
  s.trpo = agent::trpo_config_from_keys(kv);
  if (auto v = kv.get_int_list("hidden")) s.shape.hidden = *v;
  if (auto v = kv.get_double("log_std_init")) s.shape.log_std_init = *v;
  if (auto v = kv.get_string("eval_smoothing")) {
    try {
      s.options.eval_smoothing = agent::parse_smoothing(*v);
    } catch (const ArgumentError& e) {
      throw ConfigError(e.what(), 0, "eval_smoothing");
    }
  }
  if (auto v = kv.get_double("target_fidelity")) s.options.target_fidelity = *v;
  if (auto v = kv.get_double("max_intermediate")) s.options.max_intermediate = *v;
  kv.reject_unknown_keys();
  for (int h : s.shape.hidden)
    if (h < 1) throw ConfigError("hidden layer sizes must be positive", 0, "hidden");
  return s;
}

void cmd_baseline(const CommonArgs& args) {
  Run run("baseline", args.out, args.seed);
  with_manifest(run, [&] {
    const auto config = env::load_scenario(args.config);
    run.set_config(env::to_config_text(config));
    const auto schedule = env::baseline_schedule(config);
    quantum::Trajectory traj;
    const auto metrics = agent::simulate_schedule(config, schedule, &traj);
    run.write("schedule.csv", to_text([&](std::ostream& o) { pulses::write_schedule_csv(o, schedule); }));
    write_run_outputs(run, config, traj);
    run.write("metrics.json", metrics_json(metrics).dump(2) + "\n");
  });
}

void cmd_train(const TrainArgs& args) {
  Run run("train", args.common.out, args.common.seed);
  with_manifest(run, [&] {
    const auto config = env::load_scenario(args.common.config);
    TrainingSettings settings = args.trpo_config ? load_training_settings(*args.trpo_config) : TrainingSettings{};
    settings.trpo.seed = args.common.seed;
    run.set_config(env::to_config_text(config));
    if (args.max_wall_secs) settings.options.max_wall_secs = *args.max_wall_secs;
    if (args.warm_start) {
      const auto ckpt = agent::load_checkpoint(*args.warm_start);
      agent::require_compatible(ckpt, config);
      settings.options.warm_start = ckpt.policy;
      if (ckpt.value) settings.options.warm_value = *ckpt.value;
    }
    const auto result = agent::train(config, settings.trpo, settings.shape, settings.options);

    run.write("training_log.csv", to_text([&](std::ostream& o) { result.log.write_csv(o); }));
    agent::PolicyCheckpoint ckpt;
    ckpt.obs_layout = config.observation_layout();
    ckpt.policy = result.policy;
    ckpt.value = result.value;
    ckpt.env_config = env::to_config_text(config);
    ckpt.seed = settings.trpo.seed;
    ckpt.epoch = result.best_epoch;
    ckpt.metrics = {{"final_fidelity", result.best_metrics.final_fidelity},
                    {"max_intermediate", result.best_metrics.max_intermediate()}};
    agent::save_checkpoint(run.file("checkpoint.json"), ckpt);

    json m;
    m["best"] = metrics_json(result.best_metrics);
    m["best_epoch"] = result.best_epoch;
    m["epochs_run"] = result.epochs_run;
    m["reached_target"] = result.reached_target;
    m["hit_wall_clock"] = result.hit_wall_clock;
    m["eval_smoothing"] = agent::to_string(settings.options.eval_smoothing);
    run.write("metrics.json", m.dump(2) + "\n");
  });
}

void cmd_evaluate(const EvaluateArgs& args) {
  Run run("evaluate", args.common.out, args.common.seed);
  with_manifest(run, [&] {
    if (args.checkpoint.has_value() == args.schedule.has_value())
      throw ArgumentError("evaluate: give exactly one of --checkpoint or --schedule");
    const auto config = env::load_scenario(args.common.config);
    run.set_config(env::to_config_text(config));
    agent::Evaluation ev;
    if (args.checkpoint) {
      const auto ckpt = agent::load_checkpoint(*args.checkpoint);
      agent::require_compatible(ckpt, config);
      ev = agent::evaluate(ckpt.policy, config, args.smoothing);
    } else {
      std::ifstream in(*args.schedule);
      if (!in) throw ConfigError("cannot open schedule '" + args.schedule->string() + "'");
      ev = agent::evaluate_controller(agent::schedule_controller(pulses::read_schedule_csv(in)), config, args.smoothing);
    }
    run.write("schedule_raw.csv", to_text([&](std::ostream& o) { pulses::write_schedule_csv(o, ev.raw_schedule); }));
    run.write("schedule.csv", to_text([&](std::ostream& o) { pulses::write_schedule_csv(o, ev.schedule); }));
    write_run_outputs(run, config, ev.trajectory);
    json m;
    m["smoothing"] = agent::to_string(args.smoothing);
    m["raw"] = metrics_json(ev.raw);
    m["smoothed"] = metrics_json(ev.smoothed);
    run.write("metrics.json", m.dump(2) + "\n");
  });
}

void cmd_analyze(const AnalyzeArgs& args) {
  Run run("analyze", args.common.out, args.common.seed);
  with_manifest(run, [&] {
    if (args.checkpoint.has_value() == args.random_policy)
      throw ArgumentError("analyze: give exactly one of --checkpoint or --random");
    const auto config = env::load_scenario(args.common.config);
    run.set_config(env::to_config_text(config));
    std::optional<agent::PolicyCheckpoint> ckpt;
    if (args.checkpoint) {
      ckpt = agent::load_checkpoint(*args.checkpoint);
      agent::require_compatible(*ckpt, config);
    }
    analysis::CollectOptions co;
    co.n_samples = args.n_samples;
    co.seed = args.common.seed;
    co.exploration_std = args.exploration_std;
    const auto data = analysis::collect_transitions(config, ckpt ? &ckpt->policy : nullptr, co);
    run.write("dataset.csv", to_text([&](std::ostream& o) { data.write_csv(o); }));

    analysis::TbnConfig tc;
    tc.epsilon = args.epsilon;
    tc.forest.seed = args.common.seed;
    const auto graph = analysis::build_2tbn(data, tc);
    run.write("graph.dot", analysis::export_dot(graph));

    std::string edges = "source,target,weight\n";
    for (const auto& e : graph.edges)
      edges += fmt::format("{},{},{:.17g}\n", graph.nodes[e.source].name, graph.nodes[e.target].name, e.weight);
    run.write("edges.csv", edges);

    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& x : v) s += (s.empty() ? "" : " ") + x;
      return s;
    };
    std::vector<std::string> redundant;
    for (const auto& n : graph.nodes)
      if (n.redundant && n.role == analysis::Role::state_t) redundant.push_back(n.name);
    std::vector<std::string> prunable;
    for (const auto& n : graph.prunable())
      if (data.column(data.index_of(n)).role == analysis::Role::state_t) prunable.push_back(n);
    run.write("relevant.txt", "relevant: " + join(graph.relevant()) + "\nprunable: " + join(prunable) +
                                  "\nredundant: " + join(redundant) + "\n");
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"CTAP control-pulse workbench: baselines, TRPO training, evaluation and 2TBN analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(CTAP_VERSION));

  auto add_common = [](CLI::App* sub, CommonArgs& c) {
    sub->add_option("--config", c.config, "scenario config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", c.out, "output directory")->required();
    sub->add_option("--seed", c.seed, "random seed");
  };

  CommonArgs baseline;
  auto* sub_baseline = app.add_subcommand("baseline", "simulate the Gaussian reference pulses");
  add_common(sub_baseline, baseline);

  TrainArgs train;
  double wall = 0.0;
  auto* sub_train = app.add_subcommand("train", "train a TRPO agent");
  add_common(sub_train, train.common);
  sub_train->add_option("--trpo-config", train.trpo_config, "training settings file")->check(CLI::ExistingFile);
  sub_train->add_option("--warm-start", train.warm_start, "initial checkpoint")->check(CLI::ExistingFile);
  auto* wall_opt = sub_train->add_option("--max-wall-secs", wall, "wall-clock budget in seconds")->check(CLI::PositiveNumber);

  EvaluateArgs evaluate;
  std::string smoothing = "none";
  auto* sub_eval = app.add_subcommand("evaluate", "roll out a checkpoint (or replay a schedule) and re-simulate");
  add_common(sub_eval, evaluate.common);
  sub_eval->add_option("--checkpoint", evaluate.checkpoint, "policy checkpoint")->check(CLI::ExistingFile);
  sub_eval->add_option("--schedule", evaluate.schedule, "schedule CSV to replay")->check(CLI::ExistingFile);
  sub_eval->add_option("--smoothing", smoothing, "none, ma4 or spline")->check(CLI::IsMember({"none", "ma4", "spline"}));

  AnalyzeArgs analyze;
  auto* sub_analyze = app.add_subcommand("analyze", "collect transitions and estimate the 2TBN");
  add_common(sub_analyze, analyze.common);
  sub_analyze->add_option("--checkpoint", analyze.checkpoint, "policy checkpoint")->check(CLI::ExistingFile);
  sub_analyze->add_flag("--random", analyze.random_policy, "uniformly random actions instead of a policy");
  sub_analyze->add_option("--n-samples", analyze.n_samples, "transition rows")->check(CLI::Range(1000, 100000000));
  sub_analyze->add_option("--epsilon", analyze.epsilon, "selection threshold")->check(CLI::Range(0.0, 1.0));
  sub_analyze->add_option("--exploration-std", analyze.exploration_std, "action noise (units of Omega_max)")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (sub_baseline->parsed()) {
      cmd_baseline(baseline);
      out << "baseline written to " << baseline.out.string() << '\n';
    } else if (sub_train->parsed()) {
      if (wall_opt->count() > 0) train.max_wall_secs = wall;
      cmd_train(train);
      out << "training written to " << train.common.out.string() << '\n';
    } else if (sub_eval->parsed()) {
      evaluate.smoothing = agent::parse_smoothing(smoothing);
      cmd_evaluate(evaluate);
      out << "evaluation written to " << evaluate.common.out.string() << '\n';
    } else if (sub_analyze->parsed()) {
      cmd_analyze(analyze);
      out << "analysis written to " << analyze.common.out.string() << '\n';
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalError;
  }
  return kOk;
}

}  // namespace ctap::cli
