#include "gstpp/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "gstpp/kmeans.hpp"
#include "gstpp/rng.hpp"

namespace gstpp {

void TrainConfig::validate() const {
  model.validate();
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (base_lr <= 0) throw ConfigError("train.base_lr must be positive");
  if (min_lr < 0 || min_lr > base_lr) throw ConfigError("train.min_lr must be in [0, base_lr]");
  if (weight_decay < 0) throw ConfigError("train.weight_decay must be nonnegative");
  if (coord_lr_mult <= 0) throw ConfigError("train.coord_lr_mult must be positive");
  if (grad_clip <= 0) throw ConfigError("train.grad_clip must be positive");
  if (val_frac < 0 || val_frac >= 1) throw ConfigError("train.val_frac must be in [0,1)");
  if (patience < 1) throw ConfigError("train.patience must be >= 1");
  if (threads < 0) throw ConfigError("train.threads must be >= 0");
}

namespace {

int resolve_threads(int requested, size_t work_items) {
  int n = requested > 0 ? requested
                        : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return std::max(1, std::min<int>(n, static_cast<int>(work_items)));
}

struct SeqLoss {
  double st = 0, t = 0, s = 0;
};

/// Evaluates per-sequence losses (and optionally gradients) on worker
/// threads, each with its own tape. Results land in per-sequence slots so
/// aggregation order is fixed regardless of scheduling.
void run_sequences(const Model& model, const std::vector<const EventSeq*>& seqs,
                   std::vector<GradBuffers>* worker_grads, std::vector<SeqLoss>& out,
                   int threads) {
  out.assign(seqs.size(), SeqLoss{});
  const int n_threads = resolve_threads(threads, seqs.size());
  std::vector<std::string> errors(static_cast<size_t>(n_threads));

  auto work = [&](int w) {
    try {
      ad::Tape tape;
      for (size_t i = static_cast<size_t>(w); i < seqs.size(); i += static_cast<size_t>(n_threads)) {
        tape.reset();
        Bind bind(tape, model.params,
                  worker_grads ? &(*worker_grads)[static_cast<size_t>(w)] : nullptr);
        Model::NllValues nll = model.sequence_nll(bind, *seqs[i]);
        out[i].st = tape.checked_loss(nll.st);
        out[i].t = tape.scalar(nll.t);
        out[i].s = tape.scalar(nll.s);
        if (worker_grads) tape.backward(nll.st);
      }
    } catch (const std::exception& e) {
      errors[static_cast<size_t>(w)] = e.what();
    }
  };

  if (n_threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_threads; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  for (const auto& err : errors)
    if (!err.empty()) throw NumericError(err);
}

Metrics mean_of(const std::vector<SeqLoss>& losses) {
  Metrics m;
  for (const auto& l : losses) {
    m.st_nll += l.st;
    m.t_nll += l.t;
    m.s_nll += l.s;
  }
  const double n = static_cast<double>(losses.size());
  m.st_nll /= n;
  m.t_nll /= n;
  m.s_nll /= n;
  return m;
}

}  // namespace

Metrics evaluate(const Model& model, const Dataset& data, int threads) {
  if (data.seqs.empty()) throw DataError("evaluate: empty dataset");
  std::vector<const EventSeq*> seqs;
  for (const auto& s : data.seqs) seqs.push_back(&s);
  std::vector<SeqLoss> losses;
  run_sequences(model, seqs, nullptr, losses, threads);
  return mean_of(losses);
}

Metrics batch_backward(const Model& model, const std::vector<const EventSeq*>& batch,
                       GradBuffers& grads, int threads) {
  const int n_threads = resolve_threads(threads, batch.size());
  std::vector<GradBuffers> worker_grads;
  worker_grads.reserve(static_cast<size_t>(n_threads));
  for (int w = 0; w < n_threads; ++w) worker_grads.emplace_back(model.params);
  std::vector<SeqLoss> losses;
  run_sequences(model, batch, &worker_grads, losses, n_threads);
  // Fixed reduction order keeps runs bitwise reproducible.
  for (int w = 0; w < n_threads; ++w) grads.add(worker_grads[static_cast<size_t>(w)]);
  grads.scale(real(1) / static_cast<real>(batch.size()));
  return mean_of(losses);
}

void place_anchors(Model& model, const Dataset& train, AnchorInit how, uint64_t seed) {
  model.set_anchor_coords(how == AnchorInit::Kmeans ? init_anchors(train, model.cfg.K, seed)
                                                    : random_anchors(train, model.cfg.K, seed));
}

TrainResult Trainer::fit(const Dataset& train, const Dataset& val, const Normalizer& nz,
                         const std::string& checkpoint_path,
                         const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg_.validate();
  if (train.seqs.empty()) throw DataError("train: empty training set");

  const long n_batches =
      (static_cast<long>(train.seqs.size()) + cfg_.batch_size - 1) / cfg_.batch_size;
  LrSchedule sched{cfg_.base_lr, cfg_.min_lr, std::max<long>(1, n_batches * cfg_.epochs)};
  AdamW opt(AdamW::Options{0.9, 0.999, 1e-8, cfg_.weight_decay, cfg_.coord_lr_mult});
  GradBuffers grads(model_.params);
  Rng shuffle_rng = Rng(cfg_.seed).derive(0xabcd);

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  int epochs_since_best = 0;

  std::vector<size_t> order(train.seqs.size());
  std::iota(order.begin(), order.end(), size_t(0));

  for (int epoch = 1; epoch <= cfg_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    double lr = sched.at(model_.params.step);
    try {
      for (long b = 0; b < n_batches; ++b) {
        std::vector<const EventSeq*> batch;
        for (long i = b * cfg_.batch_size;
             i < std::min<long>((b + 1) * cfg_.batch_size, static_cast<long>(order.size())); ++i)
          batch.push_back(&train.seqs[order[static_cast<size_t>(i)]]);
        grads.zero();
        batch_backward(model_, batch, grads, cfg_.threads);
        grads.clip_global_norm(cfg_.grad_clip);
        lr = sched.at(model_.params.step);
        opt.step(model_.params, grads, lr);
      }
    } catch (const NumericError&) {
      result.aborted = true;
      break;
    }

    // Recorded train metrics are a post-epoch evaluation, so a later
    // evaluate() on the train split reproduces them exactly.
    EpochRecord tr;
    tr.epoch = epoch;
    tr.split = "train";
    tr.metrics = evaluate(model_, train, cfg_.threads);
    tr.lr = lr;
    result.history.push_back(tr);
    if (on_epoch) on_epoch(tr);

    EpochRecord vr;
    vr.epoch = epoch;
    vr.split = "val";
    // with no held-out split the train metrics stand in for validation
    vr.metrics = val.seqs.empty() ? tr.metrics : evaluate(model_, val, cfg_.threads);
    vr.lr = lr;
    result.history.push_back(vr);
    if (on_epoch) on_epoch(vr);

    if (vr.metrics.st_nll < best_val) {
      best_val = vr.metrics.st_nll;
      result.best_epoch = epoch;
      result.best_val = vr.metrics;
      epochs_since_best = 0;
      if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, model_, nz);
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= cfg_.patience) break;
    }
  }

  if (result.best_epoch < 0 && !checkpoint_path.empty())
    save_checkpoint(checkpoint_path, model_, nz);
  return result;
}

void write_metrics_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.precision(17);
  out << "epoch,split,st_nll,t_nll,s_nll,lr\n";
  for (const auto& r : history)
    out << r.epoch << "," << r.split << "," << r.metrics.st_nll << "," << r.metrics.t_nll << ","
        << r.metrics.s_nll << "," << r.lr << "\n";
}

}  // namespace gstpp
