#pragma once

#include <optional>

#include "gstpp/model.hpp"
#include "gstpp/rng.hpp"

namespace gstpp {

struct ThinningConfig {
  double window = 4.0;        // majorant lookahead, in normalized time units
  int grid_points = 32;       // λ* probes per window
  double headroom = 1.5;      // initial majorant factor over the grid max
  long max_proposals = 1000000;
  double h_max_override = 0;  // 0 → model default
};

/// Draws the next event time by thinning against a piecewise-constant
/// majorant (headroom × max of λ* on a lookahead grid, rebuilt per segment
/// and inflated on any observed violation). Advances `state` to the accepted
/// time, or to `horizon` when no event is accepted before it (returns
/// nullopt). Throws NumericError past max_proposals.
std::optional<double> sample_next_time(PlainEval& eval, PlainState& state, Rng& rng,
                                       double horizon, const ThinningConfig& cfg = {});

/// Component draw by mixture weight, then a diagonal Gaussian draw.
std::array<double, 2> sample_location(const SpatialMixture& mix, Rng& rng);

struct SampleReport {
  double t_rmse = 0;
  double s_dist = 0;
  long n_events = 0;
};

/// Metric aggregation over per-event predictions and targets.
SampleReport summarize_samples(const std::vector<double>& t_pred,
                               const std::vector<double>& t_true,
                               const std::vector<std::array<double, 2>>& s_pred,
                               const std::vector<std::array<double, 2>>& s_true);

struct RolloutConfig {
  int n_draws = 30;
  double horizon_window = 100.0;  // per-event thinning horizon past the previous event
  int threads = 0;
  ThinningConfig thinning;
};

struct RolloutRow {
  std::string seq_id;
  int index = 0;
  double t_true = 0, t_pred = 0;
  double x_true = 0, y_true = 0, x_pred = 0, y_pred = 0;
};

/// Teacher-forced per-event sampling: every event is predicted from the true
/// history, predictions are sample means over n_draws joint (time, location)
/// draws. Metrics are computed in raw data units via the normalizer.
/// `data` must already be in normalized units.
SampleReport rollout_eval(const Model& model, const Dataset& data, uint64_t seed,
                          const Normalizer& nz, const RolloutConfig& cfg = {},
                          std::vector<RolloutRow>* dump = nullptr);

}  // namespace gstpp
