#pragma once

#include "gstpp/anchor_graph.hpp"
#include "gstpp/decoders.hpp"
#include "gstpp/nn.hpp"

namespace gstpp {

/// Global/local state evolution: drift T-GRUs with residual subtraction,
/// jump T-GRUs fed by location features, and joint fixed-step integration of
/// (z_g, Z_l, Λ) where Λ accumulates the intensity (the compensator).
struct DynamicsDef {
  TGruDef drift_g;  // state-only cell (no exogenous input)
  TGruDef drift_l;  // input = L-GCN output per anchor
  TGruDef jump_g;   // input = embedded event location
  TGruDef jump_l;   // input = RLE features per anchor
  LinearDef loc_embed;
  int zg0 = -1;        // 1×d trainable initial global state
  int zl0_shared = -1; // 1×d shared initial local state
  int zl0_offset = -1; // K×d per-anchor offset
  int K = 0, d_model = 0;

  static DynamicsDef make(ParamStore& ps, int K, int d_model, int t_proj, Rng& rng);

  /// Tape-valued system state. t_last is the time of the most recent event
  /// (sequence origin before the first one); it feeds the time features.
  struct State {
    ad::Value z_g;  // 1×d
    ad::Value z_l;  // K×d
    ad::Value comp; // scalar Λ accumulator
    double t = 0;
    double t_last = 0;
  };

  State initial(Bind& bind) const;

  static std::array<real, 2> time_features(double t, double t_last);

  ad::Value global_drift(Bind& bind, ad::Value z_g, double t, double t_last) const;
  ad::Value local_drift(Bind& bind, const AnchorGraphDef& graph,
                        const AnchorGraphDef::Cache& cache, ad::Value z_l, double t,
                        double t_last) const;

  /// Advances state to t_end under (f_G, f_L, dΛ/dt = λ*). Throws on t_end < t.
  State integrate(Bind& bind, const AnchorGraphDef& graph, const AnchorGraphDef::Cache& cache,
                  const MlpDef& temporal_dec, State state, double t_end, double h_max) const;

  /// Post-event state update at state.t == event time; Λ is untouched.
  State jump(Bind& bind, const AnchorGraphDef& graph, const AnchorGraphDef::Cache& cache,
             State state, real sx, real sy) const;
};

}  // namespace gstpp
