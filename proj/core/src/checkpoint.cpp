#include "ctap/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ctap/errors.hpp"

namespace ctap::agent {

namespace {

using nlohmann::json;

json mlp_to_json(const Mlp& net) {
  json layers = json::array();
  for (const auto& layer : net.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(layer.weight.size()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) w.push_back(layer.weight(r, c));
    layers.push_back({{"weight", w}, {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}});
  }
  return {{"layer_dims", net.layer_dims()}, {"layers", layers}};
}

Mlp mlp_from_json(const json& j) {
  Mlp net(j.at("layer_dims").get<std::vector<int>>());
  const auto& layers = j.at("layers");
  if (layers.size() != net.layers().size()) throw ConfigError("checkpoint: layer count does not match layer_dims");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& layer = net.layers()[i];
    const auto w = layers[i].at("weight").get<std::vector<double>>();
    const auto b = layers[i].at("bias").get<std::vector<double>>();
    if (w.size() != static_cast<std::size_t>(layer.weight.size()) || b.size() != static_cast<std::size_t>(layer.bias.size()))
      throw ConfigError("checkpoint: layer " + std::to_string(i) + " has the wrong number of parameters");
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = w[k++];
    layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  }
  if (!net.all_finite()) throw ConfigError("checkpoint: non-finite network parameters");
  return net;
}

}  // namespace

std::string checkpoint_to_json(const PolicyCheckpoint& ckpt) {
  const auto& ls = ckpt.policy.log_std();
  json j;
  j["version"] = ckpt.version;
  j["obs_layout"] = ckpt.obs_layout;
  const json net = mlp_to_json(ckpt.policy.mean_net());
  j["layer_dims"] = net["layer_dims"];
  j["layers"] = net["layers"];
  j["log_std"] = std::vector<double>(ls.data(), ls.data() + ls.size());
  if (ckpt.value) {
    j["value_net"] = mlp_to_json(ckpt.value->net);
    j["value_net"]["offset"] = ckpt.value->offset;
    j["value_net"]["scale"] = ckpt.value->scale;
    j["value_net"]["calibrated"] = ckpt.value->calibrated;
  }
  j["env_config"] = ckpt.env_config;
  j["seed"] = ckpt.seed;
  j["epoch"] = ckpt.epoch;
  j["metrics"] = ckpt.metrics;
  return j.dump(2);
}

PolicyCheckpoint checkpoint_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    PolicyCheckpoint c;
    c.version = j.at("version").get<int>();
    if (c.version != kCheckpointVersion)
      throw ConfigError("checkpoint: unsupported version " + std::to_string(c.version));
    c.obs_layout = j.at("obs_layout").get<std::string>();
    const auto ls = j.at("log_std").get<std::vector<double>>();
    c.policy = GaussianPolicy(mlp_from_json(j), Eigen::Map<const Eigen::VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size())));
    if (j.contains("value_net")) {
      const auto& v = j.at("value_net");
      ValueFunction vf;
      vf.net = mlp_from_json(v);
      vf.offset = v.at("offset").get<double>();
      vf.scale = v.at("scale").get<double>();
      vf.calibrated = v.at("calibrated").get<bool>();
      c.value = std::move(vf);
    }
    c.env_config = j.at("env_config").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.epoch = j.at("epoch").get<int>();
    c.metrics = j.at("metrics").get<std::map<std::string, double>>();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const PolicyCheckpoint& ckpt) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ArgumentError("cannot write '" + tmp.string() + "'");
    out << checkpoint_to_json(ckpt) << '\n';
    if (!out) throw ArgumentError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

PolicyCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

void require_compatible(const PolicyCheckpoint& ckpt, const env::ScenarioConfig& config) {
  const std::string dims = "checkpoint has " + std::to_string(ckpt.policy.obs_dim()) + " inputs and " +
                           std::to_string(ckpt.policy.action_dim()) + " outputs, scenario expects " +
                           std::to_string(config.observation_size()) + " and " + std::to_string(config.n_actions());
  if (ckpt.obs_layout != config.observation_layout())
    throw ArgumentError("checkpoint layout '" + ckpt.obs_layout + "' does not match scenario layout '" +
                        config.observation_layout() + "' (" + dims + ")");
  if (ckpt.policy.obs_dim() != static_cast<int>(config.observation_size()) ||
      ckpt.policy.action_dim() != config.n_actions())
    throw ArgumentError("checkpoint network does not fit the scenario: " + dims);
}

}  // namespace ctap::agent
