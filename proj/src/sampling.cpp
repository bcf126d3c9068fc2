#include "gstpp/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace gstpp {

std::optional<double> sample_next_time(PlainEval& eval, PlainState& state, Rng& rng,
                                       double horizon, const ThinningConfig& cfg) {
  long proposals = 0;
  double headroom = cfg.headroom;

  while (state.t < horizon) {
    const double seg_end = std::min(horizon, state.t + cfg.window);

    // Majorant for this segment: probe λ* along a copy of the state.
    double lam_max = 0;
    {
      PlainState probe = state;
      const double step = (seg_end - state.t) / static_cast<double>(cfg.grid_points);
      lam_max = eval.intensity(probe);
      for (int i = 1; i <= cfg.grid_points; ++i) {
        eval.advance(probe, state.t + static_cast<double>(i) * step, cfg.h_max_override);
        lam_max = std::max(lam_max, eval.intensity(probe));
      }
    }
    double lam_bar = std::max(headroom * lam_max, 1e-12);

    bool segment_done = false;
    while (!segment_done) {
      if (++proposals > cfg.max_proposals)
        throw NumericError("thinning: proposal budget exhausted (" +
                           std::to_string(cfg.max_proposals) + ")");
      const double t_prop = state.t + rng.exponential(lam_bar);
      if (t_prop >= seg_end) {
        eval.advance(state, seg_end, cfg.h_max_override);
        segment_done = true;  // rebuild the majorant for the next segment
        break;
      }
      eval.advance(state, t_prop, cfg.h_max_override);
      const double lam = eval.intensity(state);
      if (lam > lam_bar) {
        // Majorant violated: inflate and restart the segment from here.
        headroom *= 2;
        segment_done = true;
        break;
      }
      if (rng.uniform() <= lam / lam_bar) return state.t;
    }
  }
  return std::nullopt;
}

std::array<double, 2> sample_location(const SpatialMixture& mix, Rng& rng) {
  const double u = rng.uniform();
  size_t i = 0;
  double acc = 0;
  for (; i < mix.weights.size(); ++i) {
    acc += mix.weights[i];
    if (u <= acc || i + 1 == mix.weights.size()) break;
  }
  const int k = static_cast<int>(i);
  return {mix.means(k, 0) + std::sqrt(static_cast<double>(mix.vars(k, 0))) * rng.normal(),
          mix.means(k, 1) + std::sqrt(static_cast<double>(mix.vars(k, 1))) * rng.normal()};
}

SampleReport summarize_samples(const std::vector<double>& t_pred,
                               const std::vector<double>& t_true,
                               const std::vector<std::array<double, 2>>& s_pred,
                               const std::vector<std::array<double, 2>>& s_true) {
  if (t_pred.size() != t_true.size() || s_pred.size() != s_true.size() ||
      t_pred.size() != s_pred.size())
    throw DataError("summarize_samples: prediction/target size mismatch");
  SampleReport rep;
  rep.n_events = static_cast<long>(t_pred.size());
  if (rep.n_events == 0) return rep;
  double se = 0, dist = 0;
  for (size_t i = 0; i < t_pred.size(); ++i) {
    const double dt = t_pred[i] - t_true[i];
    se += dt * dt;
    dist += std::hypot(s_pred[i][0] - s_true[i][0], s_pred[i][1] - s_true[i][1]);
  }
  rep.t_rmse = std::sqrt(se / static_cast<double>(rep.n_events));
  rep.s_dist = dist / static_cast<double>(rep.n_events);
  return rep;
}

namespace {

struct SeqRollout {
  std::vector<double> t_pred, t_true;
  std::vector<std::array<double, 2>> s_pred, s_true;
  std::vector<RolloutRow> rows;
};

SeqRollout rollout_sequence(const Model& model, const EventSeq& seq, Rng rng,
                            const Normalizer& nz, const RolloutConfig& cfg) {
  SeqRollout out;
  PlainEval eval(model);
  PlainState state = eval.initial();  // teacher-forced history state

  for (size_t i = 0; i < seq.events.size(); ++i) {
    const Event& target = seq.events[i];
    double t_acc = 0, x_acc = 0, y_acc = 0;
    for (int d = 0; d < cfg.n_draws; ++d) {
      PlainState draw_state = state;
      const double horizon = state.t + cfg.horizon_window;
      auto t_hat = sample_next_time(eval, draw_state, rng, horizon, cfg.thinning);
      const double when = t_hat.value_or(horizon);  // censored draws sit at the horizon
      auto loc = sample_location(eval.mixture(draw_state), rng);
      t_acc += when;
      x_acc += loc[0];
      y_acc += loc[1];
    }
    const double n = static_cast<double>(cfg.n_draws);
    Event pred_n{t_acc / n, x_acc / n, y_acc / n};
    Event pred = nz.invert(pred_n);
    Event truth = nz.invert(target);
    out.t_pred.push_back(pred.t);
    out.t_true.push_back(truth.t);
    out.s_pred.push_back({pred.x, pred.y});
    out.s_true.push_back({truth.x, truth.y});
    out.rows.push_back({seq.id, static_cast<int>(i), truth.t, pred.t, truth.x, truth.y, pred.x,
                        pred.y});

    // advance the true history: integrate to the observed time, then jump
    eval.advance(state, target.t, cfg.thinning.h_max_override);
    eval.apply_jump(state, target.x, target.y);
  }
  return out;
}

}  // namespace

SampleReport rollout_eval(const Model& model, const Dataset& data, uint64_t seed,
                          const Normalizer& nz, const RolloutConfig& cfg,
                          std::vector<RolloutRow>* dump) {
  const int n_threads = cfg.threads > 0
                            ? cfg.threads
                            : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<SeqRollout> per_seq(data.seqs.size());
  Rng root(seed);
  std::vector<std::string> errors(static_cast<size_t>(n_threads));

  auto work = [&](int w) {
    try {
      for (size_t i = static_cast<size_t>(w); i < data.seqs.size();
           i += static_cast<size_t>(n_threads))
        per_seq[i] = rollout_sequence(model, data.seqs[i], root.derive(i), nz, cfg);
    } catch (const std::exception& e) {
      errors[static_cast<size_t>(w)] = e.what();
    }
  };
  if (n_threads == 1 || data.seqs.size() <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_threads; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  for (const auto& err : errors)
    if (!err.empty()) throw NumericError(err);

  std::vector<double> t_pred, t_true;
  std::vector<std::array<double, 2>> s_pred, s_true;
  for (auto& sr : per_seq) {
    t_pred.insert(t_pred.end(), sr.t_pred.begin(), sr.t_pred.end());
    t_true.insert(t_true.end(), sr.t_true.begin(), sr.t_true.end());
    s_pred.insert(s_pred.end(), sr.s_pred.begin(), sr.s_pred.end());
    s_true.insert(s_true.end(), sr.s_true.begin(), sr.s_true.end());
    if (dump) dump->insert(dump->end(), sr.rows.begin(), sr.rows.end());
  }
  return summarize_samples(t_pred, t_true, s_pred, s_true);
}

}  // namespace gstpp
