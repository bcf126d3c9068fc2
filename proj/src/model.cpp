#include "gstpp/model.hpp"

#include <cmath>

namespace gstpp {

using namespace ad;

void ModelConfig::validate() const {
  if (K < 1) throw ConfigError("model.K must be >= 1");
  if (d_model < 1) throw ConfigError("model.d_model must be >= 1");
  if (d_embed < 1) throw ConfigError("model.d_embed must be >= 1");
  if (m_layers < 1) throw ConfigError("model.m_layers must be >= 1");
  if (t_proj < 1) throw ConfigError("model.t_proj must be >= 1");
  if (beta < 0 || beta > 1) throw ConfigError("model.beta must be in [0,1]");
  if (gamma_rbf_init <= 0) throw ConfigError("model.gamma_rbf_init must be positive");
  if (rle_psi_init <= 0) throw ConfigError("model.rle_psi_init must be positive");
  if (h_max <= 0) throw ConfigError("model.h_max must be positive");
}

Model::Model(const ModelConfig& c) : cfg(c) {
  cfg.validate();
  Rng rng(cfg.init_seed);
  graph = AnchorGraphDef::make(params, cfg.K, cfg.d_embed, cfg.d_model, cfg.m_layers, cfg.beta,
                               cfg.gamma_rbf_init, cfg.rle_psi_init, cfg.ablation, rng);
  dyn = DynamicsDef::make(params, cfg.K, cfg.d_model, cfg.t_proj, rng);
  temporal_dec = MlpDef::make(params, "temporal_dec", "lam", cfg.d_model, cfg.d_model, 1, rng);
  spatial_dec = SpatialDecDef::make(params, cfg.d_model, cfg.d_model, rng);
}

void Model::set_anchor_coords(const Tensor& coords) {
  if (coords.shape != std::vector<int>{cfg.K, 2})
    throw ConfigError("anchor coords must be K×2 with K=" + std::to_string(cfg.K) + ", got " +
                      coords.shape_str());
  params.value(graph.coords) = coords;
}

std::vector<Model::EventRecord> Model::run_trajectory(Bind& bind,
                                                      const AnchorGraphDef::Cache& cache,
                                                      const EventSeq& seq,
                                                      double h_max_override) const {
  const double h = h_max_override > 0 ? h_max_override : cfg.h_max;
  for (size_t i = 1; i < seq.events.size(); ++i)
    if (seq.events[i].t <= seq.events[i - 1].t)
      throw DataError("sequence '" + seq.id + "': non-increasing timestamps at event " +
                      std::to_string(i));

  std::vector<EventRecord> records;
  records.reserve(seq.events.size());
  DynamicsDef::State state = dyn.initial(bind);
  for (const Event& e : seq.events) {
    Value comp_before = state.comp;
    state = dyn.integrate(bind, graph, cache, temporal_dec, state, e.t, h);
    EventRecord rec;
    rec.lambda = intensity_at(bind, temporal_dec, state.z_g);
    rec.d_comp = sub(state.comp, comp_before);
    rec.z_g_pre = state.z_g;
    rec.z_l_pre = state.z_l;
    rec.t = e.t;
    records.push_back(rec);
    state = dyn.jump(bind, graph, cache, state, static_cast<real>(e.x), static_cast<real>(e.y));
  }
  return records;
}

Model::NllValues Model::sequence_nll(Bind& bind, const EventSeq& seq,
                                     double h_max_override) const {
  if (seq.events.empty()) throw DataError("sequence_nll: empty sequence '" + seq.id + "'");
  AnchorGraphDef::Cache cache = graph.build_cache(bind);
  auto records = run_trajectory(bind, cache, seq, h_max_override);

  std::vector<Value> logpt, logps;
  logpt.reserve(records.size());
  logps.reserve(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    const EventRecord& r = records[i];
    logpt.push_back(temporal_logpdf(r.lambda, r.d_comp));
    MixtureVals mix = spatial_mixture(bind, spatial_dec, r.z_l_pre, cache.coords);
    logps.push_back(spatial_logpdf(mix, bind.tape, static_cast<real>(seq.events[i].x),
                                   static_cast<real>(seq.events[i].y)));
  }
  const real inv_n = real(-1) / static_cast<real>(records.size());
  std::vector<real> coef(records.size(), inv_n);
  NllValues out;
  out.t = lincomb(logpt, coef);
  out.s = lincomb(logps, coef);
  out.st = add(out.t, out.s);
  out.n_events = static_cast<int>(records.size());
  return out;
}

// ---- plain evaluation ----

Bind PlainEval::fresh_bind() {
  tape_.reset();
  return Bind(tape_, m_.params, nullptr);
}

PlainState PlainEval::initial() {
  Bind bind = fresh_bind();
  DynamicsDef::State s = m_.dyn.initial(bind);
  PlainState out;
  out.z_g = tape_.val(s.z_g);
  out.z_l = tape_.val(s.z_l);
  out.comp = 0;
  out.t = 0;
  out.t_last = 0;
  return out;
}

void PlainEval::advance(PlainState& s, double t_end, double h_max_override) {
  if (t_end <= s.t) {
    if (t_end < s.t)
      throw DataError("advance: t_end precedes state time");
    return;
  }
  // Chunked so a long horizon cannot grow the scratch tape without bound.
  const double h = h_max_override > 0 ? h_max_override : m_.cfg.h_max;
  const double chunk = 64 * h;
  while (s.t < t_end) {
    const double stop = std::min(t_end, s.t + chunk);
    Bind bind = fresh_bind();
    AnchorGraphDef::Cache cache = m_.graph.build_cache(bind);
    DynamicsDef::State st;
    st.z_g = tape_.constant(s.z_g);
    st.z_l = tape_.constant(s.z_l);
    st.comp = tape_.constant_scalar(static_cast<real>(s.comp));
    st.t = s.t;
    st.t_last = s.t_last;
    st = m_.dyn.integrate(bind, m_.graph, cache, m_.temporal_dec, st, stop, h);
    s.z_g = tape_.val(st.z_g);
    s.z_l = tape_.val(st.z_l);
    s.comp = tape_.val(st.comp).item();
    s.t = stop;
  }
}

void PlainEval::apply_jump(PlainState& s, double sx, double sy) {
  Bind bind = fresh_bind();
  AnchorGraphDef::Cache cache = m_.graph.build_cache(bind);
  DynamicsDef::State st;
  st.z_g = tape_.constant(s.z_g);
  st.z_l = tape_.constant(s.z_l);
  st.comp = tape_.constant_scalar(static_cast<real>(s.comp));
  st.t = s.t;
  st.t_last = s.t_last;
  st = m_.dyn.jump(bind, m_.graph, cache, st, static_cast<real>(sx), static_cast<real>(sy));
  s.z_g = tape_.val(st.z_g);
  s.z_l = tape_.val(st.z_l);
  s.t_last = st.t_last;
}

double PlainEval::intensity(const PlainState& s) {
  Bind bind = fresh_bind();
  Value lam = intensity_at(bind, m_.temporal_dec, tape_.constant(s.z_g));
  return tape_.val(lam).item();
}

SpatialMixture PlainEval::mixture(const PlainState& s) {
  Bind bind = fresh_bind();
  MixtureVals mv = spatial_mixture(bind, m_.spatial_dec, tape_.constant(s.z_l),
                                   bind[m_.graph.coords]);
  SpatialMixture out;
  const Tensor& lw = tape_.val(mv.log_w);
  out.weights.resize(static_cast<size_t>(lw.shape[0]));
  for (int i = 0; i < lw.shape[0]; ++i)
    out.weights[static_cast<size_t>(i)] = std::exp(static_cast<double>(lw(i)));
  out.means = tape_.val(mv.mu);
  out.vars = tape_.val(mv.var);
  return out;
}

}  // namespace gstpp
