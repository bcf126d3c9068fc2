#include "gstpp/dynamics.hpp"

#include <cmath>

#include "gstpp/rk4.hpp"

namespace gstpp {

using namespace ad;

DynamicsDef DynamicsDef::make(ParamStore& ps, int K, int d_model, int t_proj, Rng& rng) {
  DynamicsDef d;
  d.K = K;
  d.d_model = d_model;
  d.drift_g = TGruDef::make(ps, "tgru_global", 0, d_model, t_proj, rng);
  d.drift_l = TGruDef::make(ps, "tgru_local", d_model, d_model, t_proj, rng);
  d.jump_g = TGruDef::make(ps, "jump_global", d_model, d_model, t_proj, rng);
  d.jump_l = TGruDef::make(ps, "jump_local", d_model, d_model, t_proj, rng);
  d.loc_embed = LinearDef::make(ps, "jump_global", "loc", 2, d_model, rng);
  d.zg0 = ps.add("drift_global", "z0", Tensor::zeros({1, d_model}), false);
  d.zl0_shared = ps.add("drift_local", "z0_shared", Tensor::zeros({1, d_model}), false);
  d.zl0_offset =
      ps.add("drift_local", "z0_offset", init_uniform({K, d_model}, d_model, rng), false);
  return d;
}

DynamicsDef::State DynamicsDef::initial(Bind& bind) const {
  State s;
  s.z_g = bind[zg0];
  s.z_l = add(tile_rows(reshape(bind[zl0_shared], d_model), K), bind[zl0_offset]);
  s.comp = bind.tape.constant_scalar(0);
  s.t = 0;
  s.t_last = 0;
  return s;
}

std::array<real, 2> DynamicsDef::time_features(double t, double t_last) {
  // Bounded features; the trainable projection absorbs scale.
  return {static_cast<real>(std::tanh(t / 50.0)), static_cast<real>(std::tanh(t - t_last))};
}

Value DynamicsDef::global_drift(Bind& bind, Value z_g, double t, double t_last) const {
  return sub(drift_g.step(bind, z_g, std::nullopt, time_features(t, t_last)), z_g);
}

Value DynamicsDef::local_drift(Bind& bind, const AnchorGraphDef& graph,
                               const AnchorGraphDef::Cache& cache, Value z_l, double t,
                               double t_last) const {
  Value msg = graph.lgcn(bind, cache, z_l);
  return sub(drift_l.step(bind, z_l, msg, time_features(t, t_last)), z_l);
}

namespace {

struct Deriv {
  Value z_g, z_l, comp;
};

struct OdeOps {
  Bind& bind;
  const DynamicsDef& dyn;
  const AnchorGraphDef& graph;
  const AnchorGraphDef::Cache& cache;
  const MlpDef& temporal_dec;
  double t_last;

  Deriv rhs(const DynamicsDef::State& s, double t) const {
    Deriv d;
    d.z_g = dyn.global_drift(bind, s.z_g, t, t_last);
    d.z_l = dyn.local_drift(bind, graph, cache, s.z_l, t, t_last);
    d.comp = intensity_at(bind, temporal_dec, s.z_g);
    return d;
  }

  DynamicsDef::State add_scaled(
      const DynamicsDef::State& y,
      const std::vector<std::pair<double, const Deriv*>>& terms) const {
    std::vector<Value> g{y.z_g}, l{y.z_l}, c{y.comp};
    std::vector<real> coef{1};
    for (auto& [w, d] : terms) {
      g.push_back(d->z_g);
      l.push_back(d->z_l);
      c.push_back(d->comp);
      coef.push_back(static_cast<real>(w));
    }
    DynamicsDef::State out = y;
    out.z_g = lincomb(g, coef);
    out.z_l = lincomb(l, coef);
    out.comp = lincomb(c, coef);
    return out;
  }
};

}  // namespace

DynamicsDef::State DynamicsDef::integrate(Bind& bind, const AnchorGraphDef& graph,
                                          const AnchorGraphDef::Cache& cache,
                                          const MlpDef& temporal_dec, State state, double t_end,
                                          double h_max) const {
  if (t_end < state.t)
    throw DataError("integrate: t_end " + std::to_string(t_end) + " precedes state time " +
                    std::to_string(state.t));
  if (t_end == state.t) return state;
  OdeOps ops{bind, *this, graph, cache, temporal_dec, state.t_last};
  state = rk4_integrate<State, Deriv>(state, state.t, t_end, h_max, ops);
  state.t = t_end;
  return state;
}

DynamicsDef::State DynamicsDef::jump(Bind& bind, const AnchorGraphDef& graph,
                                     const AnchorGraphDef::Cache& cache, State state, real sx,
                                     real sy) const {
  const auto tf = time_features(state.t, state.t_last);
  Value loc = loc_embed.rows(bind, bind.tape.constant(Tensor::matrix(1, 2, {sx, sy})));
  State out = state;
  out.z_g = jump_g.step(bind, state.z_g, loc, tf);
  out.z_l = jump_l.step(bind, state.z_l, graph.rle(bind, cache, sx, sy), tf);
  out.t_last = state.t;
  return out;
}

}  // namespace gstpp
