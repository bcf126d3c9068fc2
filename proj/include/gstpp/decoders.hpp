#pragma once

#include "gstpp/nn.hpp"

namespace gstpp {

/// Conditional intensity λ* = softplus(MLP(z_g)) > 0. z_g enters as a 1×d row.
ad::Value intensity_at(Bind& bind, const MlpDef& temporal_dec, ad::Value z_g);

/// log p*(t_i) = log λ*(t_i) − ΔΛ_i
ad::Value temporal_logpdf(ad::Value lambda, ad::Value delta_compensator);

/// Anchor-wise Gaussian mixture decoder heads.
struct SpatialDecDef {
  MlpDef weight;  // d_model → 1 logits
  MlpDef mean;    // d_model → 2, anchor coordinate added on top
  MlpDef logvar;  // d_model → 2, exponentiated (with floor) into variances

  static SpatialDecDef make(ParamStore& ps, int d_model, int hidden, Rng& rng) {
    SpatialDecDef d;
    d.weight = MlpDef::make(ps, "spatial_dec", "w", d_model, hidden, 1, rng);
    d.mean = MlpDef::make(ps, "spatial_dec", "mu", d_model, hidden, 2, rng);
    d.logvar = MlpDef::make(ps, "spatial_dec", "var", d_model, hidden, 2, rng);
    return d;
  }
};

/// Mixture parameters as tape values. log_w is a log-simplex (log_softmax of
/// the per-anchor logits); variances carry the 1e-6 floor.
struct MixtureVals {
  ad::Value log_w;   // K
  ad::Value mu;      // K×2
  ad::Value logvar;  // K×2, floored
  ad::Value var;     // K×2 = exp(logvar)
};

MixtureVals spatial_mixture(Bind& bind, const SpatialDecDef& dec, ad::Value z_local,
                            ad::Value coords);

/// log Σ_i γ_i N(s; μ_i, diag σ²_i) via log-sum-exp.
ad::Value spatial_logpdf(const MixtureVals& mix, ad::Tape& tape, real sx, real sy);

/// Plain-value mixture for sampling and export.
struct SpatialMixture {
  std::vector<double> weights;  // K, sums to 1
  Tensor means;                 // K×2
  Tensor vars;                  // K×2
};

double spatial_logpdf_plain(const SpatialMixture& mix, double sx, double sy);

}  // namespace gstpp
