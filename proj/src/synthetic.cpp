#include "gstpp/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "gstpp/rng.hpp"

namespace gstpp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double gauss2_logpdf(double x, double y, double mx, double my, double sx, double sy) {
  const double dx = (x - mx) / sx, dy = (y - my) / sy;
  return -kLog2Pi - std::log(sx) - std::log(sy) - 0.5 * (dx * dx + dy * dy);
}

struct MixSampler {
  const std::vector<Cluster>& clusters;
  std::vector<double> cumw;

  explicit MixSampler(const std::vector<Cluster>& cs) : clusters(cs) {
    double total = 0;
    for (const auto& c : cs) total += c.weight;
    double acc = 0;
    for (const auto& c : cs) {
      acc += c.weight / total;
      cumw.push_back(acc);
    }
  }

  std::pair<double, double> draw(Rng& rng) const {
    const double u = rng.uniform();
    size_t i = 0;
    while (i + 1 < cumw.size() && u > cumw[i]) ++i;
    const Cluster& c = clusters[i];
    return {c.mx + c.sx * rng.normal(), c.my + c.sy * rng.normal()};
  }

  int nearest(double x, double y) const {
    int best = 0;
    double bd = 1e300;
    for (size_t i = 0; i < clusters.size(); ++i) {
      const double d = (x - clusters[i].mx) * (x - clusters[i].mx) +
                       (y - clusters[i].my) * (y - clusters[i].my);
      if (d < bd) {
        bd = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  }
};

}  // namespace

void SyntheticSpec::validate() const {
  if (mu <= 0) throw ConfigError("synthetic: mu must be positive");
  if (horizon <= 0) throw ConfigError("synthetic: horizon must be positive");
  if (n_sequences < 1) throw ConfigError("synthetic: n_sequences must be >= 1");
  if (clusters.empty()) throw ConfigError("synthetic: at least one spatial cluster required");
  for (const auto& c : clusters)
    if (c.weight <= 0 || c.sx <= 0 || c.sy <= 0)
      throw ConfigError("synthetic: cluster weights and stds must be positive");
  if (kind == SynthKind::StHawkes) {
    if (beta_h <= 0) throw ConfigError("synthetic: beta_h must be positive");
    if (alpha < 0) throw ConfigError("synthetic: alpha must be nonnegative");
    if (alpha / beta_h >= 1)
      throw ConfigError("synthetic: explosive spec, alpha/beta_h = " +
                        std::to_string(alpha / beta_h) + " must be < 1");
    if (bandwidth <= 0) throw ConfigError("synthetic: bandwidth must be positive");
  }
}

double cluster_mixture_logpdf(const std::vector<Cluster>& clusters, double x, double y) {
  double total = 0;
  for (const auto& c : clusters) total += c.weight;
  double best = -1e300;
  std::vector<double> terms;
  terms.reserve(clusters.size());
  for (const auto& c : clusters) {
    const double t = std::log(c.weight / total) + gauss2_logpdf(x, y, c.mx, c.my, c.sx, c.sy);
    terms.push_back(t);
    best = std::max(best, t);
  }
  double acc = 0;
  for (double t : terms) acc += std::exp(t - best);
  return best + std::log(acc);
}

Dataset generate(const SyntheticSpec& spec) {
  spec.validate();
  const double alpha = spec.kind == SynthKind::StHawkes ? spec.alpha : 0.0;
  const double beta = spec.kind == SynthKind::StHawkes ? spec.beta_h : 1.0;
  const MixSampler base(spec.clusters);
  Rng root(spec.seed);

  Dataset out;
  for (int si = 0; si < spec.n_sequences; ++si) {
    Rng rng = root.derive(static_cast<uint64_t>(si));
    EventSeq seq;
    seq.id = "s" + std::to_string(si);

    struct Past {
      double t, cx, cy;  // event time and its offspring center
    };
    std::vector<Past> past;
    double t = 0;
    double excite = 0;  // Σ_j exp(−β(t−t_j)) carried at current t

    while (true) {
      const double lam_bar = spec.mu + alpha * excite;
      const double gap = rng.exponential(lam_bar);
      const double t_prop = t + gap;
      if (t_prop > spec.horizon) break;
      const double decayed = excite * std::exp(-beta * (t_prop - t));
      const double lam = spec.mu + alpha * decayed;
      t = t_prop;
      excite = decayed;
      if (lam < lam_bar && rng.uniform() > lam / lam_bar) continue;  // thinned out

      // exact temporal density under the generator: log λ(t_i) − ΔΛ_i
      const double t_prev = seq.events.empty() ? 0.0 : seq.events.back().t;
      double comp = spec.mu * (t - t_prev);
      if (alpha > 0) {
        for (const auto& p : past)
          comp += (alpha / beta) *
                  (std::exp(-beta * (t_prev - p.t)) - std::exp(-beta * (t - p.t)));
      }
      const double logpt = std::log(lam) - comp;

      // trigger attribution decides the location law; probabilities are the
      // intensity shares at t
      double x = 0, y = 0;
      const double p_bg = spec.mu / lam;
      bool background = true;
      if (alpha > 0 && p_bg < 1) {
        background = rng.uniform() < p_bg;
      }
      if (background || past.empty()) {
        std::tie(x, y) = base.draw(rng);
      } else {
        // pick parent j with weight exp(−β(t−t_j))
        double z = 0;
        for (const auto& p : past) z += std::exp(-beta * (t - p.t));
        double u = rng.uniform() * z;
        size_t j = 0;
        for (; j + 1 < past.size(); ++j) {
          u -= std::exp(-beta * (t - past[j].t));
          if (u <= 0) break;
        }
        x = past[j].cx + spec.bandwidth * rng.normal();
        y = past[j].cy + spec.bandwidth * rng.normal();
      }

      // exact conditional spatial density: intensity-weighted mixture of the
      // background law and per-parent Gaussians
      double logps;
      if (alpha > 0 && !past.empty()) {
        double best = std::log(p_bg) + cluster_mixture_logpdf(spec.clusters, x, y);
        std::vector<double> terms{best};
        for (const auto& p : past) {
          const double w = alpha * std::exp(-beta * (t - p.t)) / lam;
          if (w <= 0) continue;
          const double term =
              std::log(w) + gauss2_logpdf(x, y, p.cx, p.cy, spec.bandwidth, spec.bandwidth);
          terms.push_back(term);
          best = std::max(best, term);
        }
        double acc = 0;
        for (double v : terms) acc += std::exp(v - best);
        logps = best + std::log(acc);
      } else {
        logps = cluster_mixture_logpdf(spec.clusters, x, y);
      }

      seq.events.push_back({t, x, y});
      seq.true_logpt.push_back(logpt);
      seq.true_logps.push_back(logps);

      double cx = x, cy = y;
      if (spec.cluster_rotate) {
        const int k = base.nearest(x, y);
        const Cluster& nxt = spec.clusters[(static_cast<size_t>(k) + 1) % spec.clusters.size()];
        cx = nxt.mx;
        cy = nxt.my;
      }
      past.push_back({t, cx, cy});
      excite += 1.0;  // the new event's own kernel starts at 1
    }

    if (!seq.events.empty()) out.seqs.push_back(std::move(seq));
  }
  return out;
}

}  // namespace gstpp
