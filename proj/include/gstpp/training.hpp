#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gstpp/checkpoint.hpp"
#include "gstpp/model.hpp"
#include "gstpp/optimizer.hpp"

namespace gstpp {

enum class AnchorInit { Kmeans, Random };

struct TrainConfig {
  ModelConfig model;
  int epochs = 20;
  int batch_size = 16;
  int patience = 10;
  int threads = 0;  // 0 → hardware concurrency
  double base_lr = 1e-3;
  double min_lr = 1e-5;
  double weight_decay = 1e-4;
  double coord_lr_mult = 8.0;  // anchor coordinates move in data units
  double grad_clip = 10.0;
  double val_frac = 0.1;
  uint64_t seed = 1;
  AnchorInit anchor_init = AnchorInit::Kmeans;

  void validate() const;
};

struct Metrics {
  double st_nll = 0, t_nll = 0, s_nll = 0;
};

struct EpochRecord {
  int epoch = 0;
  std::string split;  // "train" or "val"
  Metrics metrics;
  double lr = 0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  Metrics best_val;
  bool aborted = false;  // non-finite loss encountered; best checkpoint kept
};

/// Mean per-event NLLs over a dataset (sequences weighted equally).
Metrics evaluate(const Model& model, const Dataset& data, int threads = 0);

/// Per-sequence NLL gradient accumulation; returns the batch-mean metrics.
/// Used by the trainer and the gradient acceptance tests.
Metrics batch_backward(const Model& model, const std::vector<const EventSeq*>& batch,
                       GradBuffers& grads, int threads);

class Trainer {
 public:
  Trainer(Model& model, const TrainConfig& cfg) : model_(model), cfg_(cfg) {}

  /// Runs MLE training. checkpoint_path, when non-empty, receives the
  /// best-validation checkpoint (falling back to train metrics when the
  /// validation split is empty). on_epoch, when set, observes every record.
  TrainResult fit(const Dataset& train, const Dataset& val, const Normalizer& nz,
                  const std::string& checkpoint_path,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

 private:
  Model& model_;
  TrainConfig cfg_;
};

void write_metrics_csv(const std::string& path, const std::vector<EpochRecord>& history);

/// Initializes anchors per config (k-means over training locations, or
/// uniform over their bounding box) and installs them into the model.
void place_anchors(Model& model, const Dataset& train, AnchorInit how, uint64_t seed);

}  // namespace gstpp
