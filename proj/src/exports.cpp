#include "gstpp/exports.hpp"

#include <cmath>
#include <fstream>

#include "gstpp/anchor_graph.hpp"

namespace gstpp {

void export_anchors(const std::string& path, const Model& model, const Normalizer& nz) {
  const int k = model.cfg.K;
  Tensor coords_raw = Tensor::zeros({k, 2});
  const Tensor& c = model.anchor_coords();
  for (int i = 0; i < k; ++i) {
    Event e = nz.invert({0, static_cast<double>(c(i, 0)), static_cast<double>(c(i, 1))});
    coords_raw(i, 0) = static_cast<real>(e.x);
    coords_raw(i, 1) = static_cast<real>(e.y);
  }

  ad::Tape tape;
  Bind bind(tape, model.params, nullptr);
  ad::Value gamma = ad::softplus(bind[model.graph.gamma_raw]);
  ad::Value a_d = build_distance_adjacency(bind[model.graph.coords], gamma);
  ad::Value a_l = build_latent_adjacency(bind[model.graph.e1], bind[model.graph.e2]);
  export_anchors_csv(path, coords_raw, tape.val(a_d), tape.val(a_l));
}

namespace {

PlainState state_before(PlainEval& eval, const EventSeq& seq_norm, double t_norm) {
  PlainState s = eval.initial();
  for (const Event& e : seq_norm.events) {
    if (e.t >= t_norm) break;
    eval.advance(s, e.t);
    eval.apply_jump(s, e.x, e.y);
  }
  eval.advance(s, t_norm);
  return s;
}

}  // namespace

void export_density_grid(const std::string& path, const Model& model, const Normalizer& nz,
                         const EventSeq& seq_raw, double t_raw, const GridSpec& grid) {
  if (grid.resolution < 2) throw ConfigError("density grid: resolution must be >= 2");
  GridSpec g = grid;
  if (g.x_lo >= g.x_hi || g.y_lo >= g.y_hi) {
    g.x_lo = g.y_lo = 1e300;
    g.x_hi = g.y_hi = -1e300;
    for (const Event& e : seq_raw.events) {
      g.x_lo = std::min(g.x_lo, e.x);
      g.x_hi = std::max(g.x_hi, e.x);
      g.y_lo = std::min(g.y_lo, e.y);
      g.y_hi = std::max(g.y_hi, e.y);
    }
    const double mx = 0.1 * (g.x_hi - g.x_lo + 1e-9), my = 0.1 * (g.y_hi - g.y_lo + 1e-9);
    g.x_lo -= mx;
    g.x_hi += mx;
    g.y_lo -= my;
    g.y_hi += my;
  }

  EventSeq seq_norm = seq_raw;
  for (auto& e : seq_norm.events) e = nz.apply(e);
  const double t_norm = (t_raw - nz.t_offset) * nz.t_scale;

  PlainEval eval(model);
  PlainState s = state_before(eval, seq_norm, t_norm);
  SpatialMixture mix = eval.mixture(s);

  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.precision(17);
  out << "x,y,log_density\n";
  const double log_jac = nz.spatial_log_jacobian();  // raw-unit density
  for (int iy = 0; iy < g.resolution; ++iy)
    for (int ix = 0; ix < g.resolution; ++ix) {
      const double x = g.x_lo + (g.x_hi - g.x_lo) * ix / (g.resolution - 1);
      const double y = g.y_lo + (g.y_hi - g.y_lo) * iy / (g.resolution - 1);
      const double xn = (x - nz.x_offset) * nz.x_scale;
      const double yn = (y - nz.y_offset) * nz.y_scale;
      out << x << "," << y << "," << spatial_logpdf_plain(mix, xn, yn) + log_jac << "\n";
    }
}

void export_trajectory(const std::string& path, const Model& model, const Normalizer& nz,
                       const EventSeq& seq_raw) {
  EventSeq seq_norm = seq_raw;
  for (auto& e : seq_norm.events) e = nz.apply(e);

  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.precision(17);
  out << "i,t,d_comp,zg_norm,zl_max_norm\n";

  PlainEval eval(model);
  PlainState s = eval.initial();
  for (size_t i = 0; i < seq_norm.events.size(); ++i) {
    const Event& e = seq_norm.events[i];
    const double comp_before = s.comp;
    eval.advance(s, e.t);
    double zg = 0;
    for (real v : s.z_g.data) zg += static_cast<double>(v) * static_cast<double>(v);
    double zl_max = 0;
    for (int a = 0; a < s.z_l.shape[0]; ++a) {
      double acc = 0;
      for (int j = 0; j < s.z_l.shape[1]; ++j)
        acc += static_cast<double>(s.z_l(a, j)) * static_cast<double>(s.z_l(a, j));
      zl_max = std::max(zl_max, acc);
    }
    out << i << "," << seq_raw.events[i].t << "," << s.comp - comp_before << "," << std::sqrt(zg)
        << "," << std::sqrt(zl_max) << "\n";
    eval.apply_jump(s, e.x, e.y);
  }
}

}  // namespace gstpp
