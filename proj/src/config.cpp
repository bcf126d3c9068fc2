#include "gstpp/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gstpp {

namespace {

using nlohmann::json;

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
T get_or(const json& obj, const std::string& key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

}  // namespace

CliConfig CliConfig::load(const std::string& path) {
  json j = parse_file(path);
  reject_unknown(j, {"data", "out_dir", "model", "train"}, "config");

  CliConfig cfg;
  if (j.contains("data")) {
    reject_unknown(j.at("data"), {"train"}, "data");
    cfg.train_data = get_or<std::string>(j.at("data"), "train", "", "data");
  }
  cfg.out_dir = get_or<std::string>(j, "out_dir", cfg.out_dir, "config");

  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m,
                   {"K", "d_model", "d_embed", "m_layers", "t_proj", "beta", "gamma_rbf_init",
                    "rle_psi_init", "h_max", "ablation", "anchor_init"},
                   "model");
    ModelConfig& mc = cfg.train.model;
    mc.K = get_or(m, "K", mc.K, "model");
    mc.d_model = get_or(m, "d_model", mc.d_model, "model");
    mc.d_embed = get_or(m, "d_embed", mc.d_embed, "model");
    mc.m_layers = get_or(m, "m_layers", mc.m_layers, "model");
    mc.t_proj = get_or(m, "t_proj", mc.t_proj, "model");
    mc.beta = get_or(m, "beta", mc.beta, "model");
    mc.gamma_rbf_init = get_or(m, "gamma_rbf_init", mc.gamma_rbf_init, "model");
    mc.rle_psi_init = get_or(m, "rle_psi_init", mc.rle_psi_init, "model");
    mc.h_max = get_or(m, "h_max", mc.h_max, "model");
    mc.ablation = ablation_from_string(get_or<std::string>(m, "ablation", "full", "model"));
    const std::string ai = get_or<std::string>(m, "anchor_init", "kmeans", "model");
    if (ai == "kmeans")
      cfg.train.anchor_init = AnchorInit::Kmeans;
    else if (ai == "random")
      cfg.train.anchor_init = AnchorInit::Random;
    else
      throw ConfigError("model.anchor_init: expected kmeans|random, got '" + ai + "'");
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown(t,
                   {"epochs", "batch_size", "patience", "threads", "base_lr", "min_lr",
                    "weight_decay", "coord_lr_mult", "grad_clip", "val_frac", "seed"},
                   "train");
    TrainConfig& tc = cfg.train;
    tc.epochs = get_or(t, "epochs", tc.epochs, "train");
    tc.batch_size = get_or(t, "batch_size", tc.batch_size, "train");
    tc.patience = get_or(t, "patience", tc.patience, "train");
    tc.threads = get_or(t, "threads", tc.threads, "train");
    tc.base_lr = get_or(t, "base_lr", tc.base_lr, "train");
    tc.min_lr = get_or(t, "min_lr", tc.min_lr, "train");
    tc.weight_decay = get_or(t, "weight_decay", tc.weight_decay, "train");
    tc.coord_lr_mult = get_or(t, "coord_lr_mult", tc.coord_lr_mult, "train");
    tc.grad_clip = get_or(t, "grad_clip", tc.grad_clip, "train");
    tc.val_frac = get_or(t, "val_frac", tc.val_frac, "train");
    tc.seed = get_or(t, "seed", tc.seed, "train");
  }
  cfg.train.model.init_seed = cfg.train.seed;
  cfg.train.validate();
  return cfg;
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
  json j = parse_file(path);
  reject_unknown(j,
                 {"kind", "mu", "alpha", "beta_h", "bandwidth", "cluster_rotate", "clusters",
                  "horizon", "n_sequences", "seed"},
                 "spec");
  SyntheticSpec s;
  const std::string kind = get_or<std::string>(j, "kind", "homogeneous_poisson", "spec");
  if (kind == "homogeneous_poisson")
    s.kind = SynthKind::HomogeneousPoisson;
  else if (kind == "st_hawkes")
    s.kind = SynthKind::StHawkes;
  else
    throw ConfigError("spec.kind: expected homogeneous_poisson|st_hawkes, got '" + kind + "'");
  s.mu = get_or(j, "mu", s.mu, "spec");
  s.alpha = get_or(j, "alpha", s.alpha, "spec");
  s.beta_h = get_or(j, "beta_h", s.beta_h, "spec");
  s.bandwidth = get_or(j, "bandwidth", s.bandwidth, "spec");
  s.cluster_rotate = get_or(j, "cluster_rotate", s.cluster_rotate, "spec");
  s.horizon = get_or(j, "horizon", s.horizon, "spec");
  s.n_sequences = get_or(j, "n_sequences", s.n_sequences, "spec");
  s.seed = get_or(j, "seed", s.seed, "spec");
  if (!j.contains("clusters")) throw ConfigError("spec.clusters: required");
  for (size_t i = 0; i < j.at("clusters").size(); ++i) {
    const json& c = j.at("clusters").at(i);
    const std::string where = "spec.clusters[" + std::to_string(i) + "]";
    reject_unknown(c, {"weight", "mean", "sigma"}, where);
    Cluster cl;
    cl.weight = get_or(c, "weight", 1.0, where);
    auto mean = c.at("mean").get<std::vector<double>>();
    auto sigma = c.at("sigma").get<std::vector<double>>();
    if (mean.size() != 2 || sigma.size() != 2)
      throw ConfigError(where + ": mean and sigma must have 2 entries");
    cl.mx = mean[0];
    cl.my = mean[1];
    cl.sx = sigma[0];
    cl.sy = sigma[1];
    s.clusters.push_back(cl);
  }
  s.validate();
  return s;
}

std::string config_hash(const std::string& path) {
  json j = parse_file(path);
  const std::string canon = j.dump();
  // FNV-1a, hex-coded
  uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace gstpp
