#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gstpp/config.hpp"
#include "gstpp/exports.hpp"
#include "gstpp/sampling.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gstpp;

namespace {

void write_manifest(const std::string& out_dir, const std::string& config_path, uint64_t seed) {
  json m;
  m["version"] = "gstpp 0.1.0";
  m["seed"] = seed;
  m["config_hash"] = config_hash(config_path);
  std::ofstream out(out_dir + "/manifest.json");
  out << m.dump(2) << "\n";
}

int cmd_train(const std::string& config_path, int64_t seed_override,
              const std::string& out_override) {
  CliConfig cfg = CliConfig::load(config_path);
  if (seed_override >= 0) {
    cfg.train.seed = static_cast<uint64_t>(seed_override);
    cfg.train.model.init_seed = cfg.train.seed;
  }
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (cfg.train_data.empty()) throw ConfigError("data.train: required for training");

  Dataset raw = load_csv(cfg.train_data);
  if (raw.seqs.empty()) throw DataError(cfg.train_data + ": no sequences");
  std::cerr << "loaded " << raw.n_sequences() << " sequences, mean length " << raw.mean_length()
            << "\n";

  Dataset train_raw, val_raw;
  split_dataset(raw, cfg.train.val_frac, cfg.train.seed, train_raw, val_raw);
  Normalizer nz = Normalizer::fit(train_raw);
  Dataset train = nz.apply(train_raw);
  Dataset val = nz.apply(val_raw);

  Model model(cfg.train.model);
  place_anchors(model, train, cfg.train.anchor_init, cfg.train.seed);

  fs::create_directories(cfg.out_dir);
  const std::string ckpt = cfg.out_dir + "/model.ckpt";
  Trainer trainer(model, cfg.train);
  TrainResult res = trainer.fit(train, val, nz, ckpt, [](const EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << " [" << r.split << "] st_nll=" << r.metrics.st_nll
              << " t_nll=" << r.metrics.t_nll << " s_nll=" << r.metrics.s_nll << " lr=" << r.lr
              << "\n";
  });
  write_metrics_csv(cfg.out_dir + "/metrics.csv", res.history);
  write_manifest(cfg.out_dir, config_path, cfg.train.seed);
  if (res.aborted) {
    std::cerr << "training aborted on non-finite loss; best checkpoint retained\n";
    return 2;
  }
  std::cerr << "best epoch " << res.best_epoch << ", checkpoint " << ckpt << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data_path, bool sample, int draws,
             uint64_t seed, int threads) {
  LoadedCheckpoint head = read_checkpoint_header(ckpt);
  Model model(head.cfg);
  Normalizer nz;
  load_checkpoint_into(ckpt, model, nz);

  Dataset raw = load_csv(data_path);
  if (raw.seqs.empty()) throw DataError(data_path + ": no sequences");
  Dataset data = nz.apply(raw);

  Metrics m = evaluate(model, data, threads);
  json out{{"st_nll", m.st_nll}, {"t_nll", m.t_nll}, {"s_nll", m.s_nll}};
  if (sample) {
    RolloutConfig rc;
    rc.n_draws = draws;
    rc.threads = threads;
    SampleReport rep = rollout_eval(model, data, seed, nz, rc);
    out["t_rmse"] = rep.t_rmse;
    out["s_dist"] = rep.s_dist;
    out["n_events"] = rep.n_events;
  }
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_export(const std::string& ckpt, const std::string& what, const std::string& out_dir,
               const std::string& data_path, const std::string& seq_id, double t_raw, int grid) {
  LoadedCheckpoint head = read_checkpoint_header(ckpt);
  Model model(head.cfg);
  Normalizer nz;
  load_checkpoint_into(ckpt, model, nz);
  fs::create_directories(out_dir);

  if (what == "anchors") {
    export_anchors(out_dir + "/anchors.csv", model, nz);
    return 0;
  }

  if (what != "density-grid" && what != "trajectory")
    throw ConfigError("unknown export kind '" + what +
                      "' (expected anchors|density-grid|trajectory)");
  if (data_path.empty()) throw ConfigError("--data: required for " + what + " export");
  Dataset raw = load_csv(data_path);
  if (raw.seqs.empty()) throw DataError(data_path + ": no sequences");
  const EventSeq* seq = &raw.seqs.front();
  if (!seq_id.empty()) {
    seq = nullptr;
    for (const auto& s : raw.seqs)
      if (s.id == seq_id) seq = &s;
    if (!seq) throw DataError("sequence '" + seq_id + "' not found in " + data_path);
  }

  if (what == "density-grid") {
    GridSpec gs;
    gs.resolution = grid;
    const double t = t_raw == 0 && !seq->events.empty() ? seq->events.back().t : t_raw;
    export_density_grid(out_dir + "/density_grid.csv", model, nz, *seq, t, gs);
  } else {
    export_trajectory(out_dir + "/trajectory.csv", model, nz, *seq);
  }
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_path, int64_t seed_override) {
  SyntheticSpec spec = load_synthetic_spec(spec_path);
  if (seed_override >= 0) spec.seed = static_cast<uint64_t>(seed_override);
  Dataset data = generate(spec);
  if (const auto dir = fs::path(out_path).parent_path(); !dir.empty())
    fs::create_directories(dir);
  save_csv(out_path, data, true);
  std::cerr << "wrote " << data.n_sequences() << " sequences (" << data.n_events()
            << " events) to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph spatio-temporal point process toolkit"};
  app.require_subcommand(1);

  std::string config_path, ckpt, data_path, out_path, seq_id, what, spec_path;
  int64_t seed = -1;
  int draws = 30, grid = 64, threads = 0;
  double t_at = 0;
  bool sample = false;

  auto* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", config_path, "config JSON")->required();
  train->add_option("--seed", seed, "seed override");
  train->add_option("--out", out_path, "output directory override");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval->add_option("--checkpoint", ckpt, "checkpoint path")->required();
  eval->add_option("--data", data_path, "CSV dataset")->required();
  eval->add_flag("--sample", sample, "also report sampling metrics");
  eval->add_option("--draws", draws, "draws per event for --sample");
  eval->add_option("--seed", seed, "sampling seed");
  eval->add_option("--threads", threads, "worker threads (0 = auto)");

  auto* exp = app.add_subcommand("export", "export anchors/density-grid/trajectory CSVs");
  exp->add_option("kind", what, "anchors|density-grid|trajectory")->required();
  exp->add_option("--checkpoint", ckpt, "checkpoint path")->required();
  exp->add_option("--out", out_path, "output directory")->required();
  exp->add_option("--data", data_path, "CSV dataset (conditioning history)");
  exp->add_option("--seq", seq_id, "sequence id (default: first)");
  exp->add_option("--t", t_at, "conditioning time for density-grid");
  exp->add_option("--grid", grid, "density grid resolution");

  auto* synth = app.add_subcommand("synth", "generate synthetic data with ground truth");
  synth->add_option("--spec", spec_path, "synthetic spec JSON")->required();
  synth->add_option("--out", out_path, "output CSV path")->required();
  synth->add_option("--seed", seed, "seed override");

  try {
    app.parse(argc, argv);
    if (train->parsed()) return cmd_train(config_path, seed, out_path);
    if (eval->parsed())
      return cmd_eval(ckpt, data_path, sample, draws, seed >= 0 ? static_cast<uint64_t>(seed) : 1,
                      threads);
    if (exp->parsed()) return cmd_export(ckpt, what, out_path, data_path, seq_id, t_at, grid);
    if (synth->parsed()) return cmd_synth(spec_path, out_path, seed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
