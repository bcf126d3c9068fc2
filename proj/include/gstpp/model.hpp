#pragma once

#include <cstdint>

#include "gstpp/anchor_graph.hpp"
#include "gstpp/data.hpp"
#include "gstpp/decoders.hpp"
#include "gstpp/dynamics.hpp"

namespace gstpp {

struct ModelConfig {
  int K = 8;
  int d_model = 16;
  int d_embed = 16;
  int m_layers = 2;
  int t_proj = 4;
  real beta = real(0.05);
  real gamma_rbf_init = 1;
  real rle_psi_init = 1;
  double h_max = 0.05;
  Ablation ablation = Ablation::Full;
  uint64_t init_seed = 1;

  void validate() const;
};

/// The assembled event model: anchor graph, dynamics, decoders, and the
/// parameter store behind them.
class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  ModelConfig cfg;
  ParamStore params;
  AnchorGraphDef graph;
  DynamicsDef dyn;
  MlpDef temporal_dec;
  SpatialDecDef spatial_dec;

  void set_anchor_coords(const Tensor& coords);
  const Tensor& anchor_coords() const { return params.value(graph.coords); }

  /// Pre-jump quantities for one event plus the post-event state handoff.
  struct EventRecord {
    ad::Value lambda;   // λ*(t_i) at the pre-jump state
    ad::Value d_comp;   // ΔΛ_i over (t_{i−1}, t_i]
    ad::Value z_g_pre;  // 1×d
    ad::Value z_l_pre;  // K×d
    double t = 0;
  };

  std::vector<EventRecord> run_trajectory(Bind& bind, const AnchorGraphDef::Cache& cache,
                                          const EventSeq& seq, double h_max_override = 0) const;

  struct NllValues {
    ad::Value st, t, s;  // per-event means; st = t + s by construction
    int n_events = 0;
  };

  /// Mean per-event negative log-likelihoods of a non-empty sequence,
  /// everything scored at pre-jump states.
  NllValues sequence_nll(Bind& bind, const EventSeq& seq, double h_max_override = 0) const;
};

/// Value-only state for sampling and export. Carries the same fields as the
/// tape state plus bookkeeping times.
struct PlainState {
  Tensor z_g;  // 1×d
  Tensor z_l;  // K×d
  double comp = 0;
  double t = 0;
  double t_last = 0;
};

/// Gradient-free evaluator around a scratch tape. One instance per thread.
class PlainEval {
 public:
  explicit PlainEval(const Model& model) : m_(model) {}

  PlainState initial();
  void advance(PlainState& s, double t_end, double h_max_override = 0);
  void apply_jump(PlainState& s, double sx, double sy);
  double intensity(const PlainState& s);
  SpatialMixture mixture(const PlainState& s);

  const Model& model() const { return m_; }

 private:
  Bind fresh_bind();
  const Model& m_;
  ad::Tape tape_;
};

}  // namespace gstpp
