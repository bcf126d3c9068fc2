#include "gstpp/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace gstpp {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'G', 'S', 'T', 'P', 'P', 'C', 'K', '1'};

json config_to_json(const ModelConfig& c) {
  return json{{"K", c.K},
              {"d_model", c.d_model},
              {"d_embed", c.d_embed},
              {"m_layers", c.m_layers},
              {"t_proj", c.t_proj},
              {"beta", c.beta},
              {"gamma_rbf_init", c.gamma_rbf_init},
              {"rle_psi_init", c.rle_psi_init},
              {"h_max", c.h_max},
              {"ablation", ablation_to_string(c.ablation)},
              {"init_seed", c.init_seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.K = j.at("K").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.d_embed = j.at("d_embed").get<int>();
  c.m_layers = j.at("m_layers").get<int>();
  c.t_proj = j.at("t_proj").get<int>();
  c.beta = j.at("beta").get<real>();
  c.gamma_rbf_init = j.at("gamma_rbf_init").get<real>();
  c.rle_psi_init = j.at("rle_psi_init").get<real>();
  c.h_max = j.at("h_max").get<double>();
  c.ablation = ablation_from_string(j.at("ablation").get<std::string>());
  c.init_seed = j.at("init_seed").get<uint64_t>();
  return c;
}

json normalizer_to_json(const Normalizer& n) {
  return json{{"t_scale", n.t_scale}, {"t_offset", n.t_offset}, {"x_scale", n.x_scale},
              {"x_offset", n.x_offset}, {"y_scale", n.y_scale}, {"y_offset", n.y_offset}};
}

Normalizer normalizer_from_json(const json& j) {
  Normalizer n;
  n.t_scale = j.at("t_scale").get<double>();
  n.t_offset = j.at("t_offset").get<double>();
  n.x_scale = j.at("x_scale").get<double>();
  n.x_offset = j.at("x_offset").get<double>();
  n.y_scale = j.at("y_scale").get<double>();
  n.y_offset = j.at("y_offset").get<double>();
  return n;
}

void write_doubles(std::ofstream& out, const Tensor& t) {
  for (real v : t.data) {
    const double d = static_cast<double>(v);
    out.write(reinterpret_cast<const char*>(&d), sizeof(double));
  }
}

void read_doubles(std::ifstream& in, Tensor& t) {
  for (auto& v : t.data) {
    double d = 0;
    in.read(reinterpret_cast<char*>(&d), sizeof(double));
    v = static_cast<real>(d);
  }
}

json read_header(std::ifstream& in, const std::string& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("not a checkpoint file: " + path);
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string buf(len, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("truncated checkpoint header: " + path);
  return json::parse(buf);
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const Normalizer& nz) {
  json dir;
  dir["format"] = 1;
  dir["config"] = config_to_json(model.cfg);
  dir["normalizer"] = normalizer_to_json(nz);
  dir["step"] = model.params.step;
  json tensors = json::array();
  for (size_t i = 0; i < model.params.size(); ++i) {
    const auto& e = model.params.at(static_cast<int>(i));
    tensors.push_back(json{{"name", e.name}, {"shape", e.value.shape}});
  }
  dir["tensors"] = tensors;
  const std::string header = dir.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.write(kMagic, 8);
  const uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header.data(), static_cast<std::streamsize>(len));
  for (size_t i = 0; i < model.params.size(); ++i) {
    const auto& e = model.params.at(static_cast<int>(i));
    write_doubles(out, e.value);
    write_doubles(out, e.m);
    write_doubles(out, e.v);
  }
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

LoadedCheckpoint read_checkpoint_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  json dir = read_header(in, path);
  LoadedCheckpoint lc;
  lc.cfg = config_from_json(dir.at("config"));
  lc.normalizer = normalizer_from_json(dir.at("normalizer"));
  return lc;
}

void load_checkpoint_into(const std::string& path, Model& model, Normalizer& nz) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  json dir = read_header(in, path);
  ModelConfig cfg = config_from_json(dir.at("config"));
  if (cfg.K != model.cfg.K || cfg.d_model != model.cfg.d_model ||
      cfg.d_embed != model.cfg.d_embed || cfg.m_layers != model.cfg.m_layers ||
      cfg.t_proj != model.cfg.t_proj)
    throw ConfigError("checkpoint/model dimension mismatch: checkpoint K=" +
                      std::to_string(cfg.K) + " d_model=" + std::to_string(cfg.d_model) +
                      " vs model K=" + std::to_string(model.cfg.K) +
                      " d_model=" + std::to_string(model.cfg.d_model));
  const auto& tensors = dir.at("tensors");
  if (tensors.size() != model.params.size())
    throw ConfigError("checkpoint tensor count mismatch");
  for (size_t i = 0; i < model.params.size(); ++i) {
    auto& e = model.params.at(static_cast<int>(i));
    const auto& meta = tensors.at(i);
    if (meta.at("name").get<std::string>() != e.name)
      throw ConfigError("checkpoint tensor order mismatch at '" + e.name + "'");
    read_doubles(in, e.value);
    read_doubles(in, e.m);
    read_doubles(in, e.v);
  }
  if (!in) throw DataError("truncated checkpoint data: " + path);
  model.params.step = dir.at("step").get<int64_t>();
  nz = normalizer_from_json(dir.at("normalizer"));
}

}  // namespace gstpp
