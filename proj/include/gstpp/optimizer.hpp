#pragma once

#include <cmath>

#include "gstpp/param_store.hpp"

namespace gstpp {

/// Half-cosine decay from base_lr at step 0 to min_lr at total_steps.
struct LrSchedule {
  double base_lr = 1e-3;
  double min_lr = 0.0;
  long total_steps = 1;

  double at(long step) const {
    if (step <= 0) return base_lr;
    if (step >= total_steps) return min_lr;
    const double phase = M_PI * static_cast<double>(step) / static_cast<double>(total_steps);
    return min_lr + (base_lr - min_lr) * 0.5 * (1.0 + std::cos(phase));
  }
};

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double coord_lr_mult = 1.0;  // step-size scale for coordinate parameters
};

/// Adam with decoupled weight decay. Parameters flagged weight_decay=false
/// (anchor coordinates in particular) are never decayed.
class AdamW {
 public:
  using Options = AdamWOptions;

  explicit AdamW(Options opt = Options()) : opt_(opt) {}

  void step(ParamStore& params, const GradBuffers& grads, double lr) {
    if (lr <= 0) throw ConfigError("optimizer: lr must be positive, got " + std::to_string(lr));
    params.step += 1;
    const double t = static_cast<double>(params.step);
    const double bc1 = 1.0 - std::pow(opt_.beta1, t);
    const double bc2 = 1.0 - std::pow(opt_.beta2, t);
    for (size_t i = 0; i < params.size(); ++i) {
      auto& e = params.at(static_cast<int>(i));
      const Tensor& g = grads.at(static_cast<int>(i));
      const double wd = e.weight_decay ? opt_.weight_decay : 0.0;
      const double lr_e = e.coordinate ? lr * opt_.coord_lr_mult : lr;
      for (long j = 0; j < e.value.numel(); ++j) {
        const double gj = g.data[j];
        double m = opt_.beta1 * e.m.data[j] + (1 - opt_.beta1) * gj;
        double v = opt_.beta2 * e.v.data[j] + (1 - opt_.beta2) * gj * gj;
        e.m.data[j] = static_cast<real>(m);
        e.v.data[j] = static_cast<real>(v);
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        double p = e.value.data[j];
        p -= lr_e * (mhat / (std::sqrt(vhat) + opt_.eps) + wd * p);
        e.value.data[j] = static_cast<real>(p);
      }
    }
  }

  const Options& options() const { return opt_; }

 private:
  Options opt_;
};

}  // namespace gstpp
