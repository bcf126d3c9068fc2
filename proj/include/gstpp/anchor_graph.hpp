#pragma once

#include <array>
#include <string>
#include <vector>

#include "gstpp/nn.hpp"

namespace gstpp {

enum class Ablation { Full, NoDist, NoLatent, NoGraph };

Ablation ablation_from_string(const std::string& s);
const char* ablation_to_string(Ablation a);

/// Self-adaptive anchor graph: trainable anchor coordinates, double-headed
/// adjacency (RBF distance head + antisymmetric latent head), a relative-
/// position edge filter, the location-aware graph convolution, and the
/// relative location encoder.
struct AnchorGraphDef {
  int K = 0;
  int d_embed = 0;
  int d_model = 0;
  int m_layers = 2;
  real beta = real(0.05);
  Ablation ablation = Ablation::Full;

  int coords = -1;      // K×2
  int e1 = -1, e2 = -1; // K×d_embed
  int gamma_raw = -1;   // scalar; gamma_rbf = softplus(gamma_raw)
  MlpDef edge_filter;   // 2 → d_model → d_model, tanh applied on top
  std::vector<int> sel_w;  // (m_layers+1)×2 selection matrices, index m*2+head
  int sel_b = -1;
  MlpDef rle_mlp;   // 2 → d_model → d_model
  int psi_raw = -1; // d_model; psi = softplus(psi_raw)

  static AnchorGraphDef make(ParamStore& ps, int K, int d_embed, int d_model, int m_layers,
                             real beta, real gamma_init, real psi_init, Ablation ablation,
                             Rng& rng);

  bool use_dist() const { return ablation == Ablation::Full || ablation == Ablation::NoLatent; }
  bool use_latent() const { return ablation == Ablation::Full || ablation == Ablation::NoDist; }
  bool no_graph() const { return ablation == Ablation::NoGraph; }

  /// Per-pass graph quantities. Coordinates, embeddings and the filter are
  /// constant within one forward pass, so these are built once and reused by
  /// every ODE step.
  struct Cache {
    std::array<ad::Value, 2> a_norm;  // normalized heads; invalid when head disabled
    ad::Value p;                      // K²×d_model edge filter, row i·K+j ↔ (i,j)
    ad::Value coords;                 // bound anchor coordinates (K×2)
  };

  Cache build_cache(Bind& bind) const;

  ad::Value lgcn(Bind& bind, const Cache& cache, ad::Value z) const;  // K×d → K×d
  ad::Value rle(Bind& bind, const Cache& cache, real sx, real sy) const;  // → K×d
};

// Stand-alone builders; these are the testable algebra behind build_cache.
ad::Value build_distance_adjacency(ad::Value coords, ad::Value gamma);        // K×2 → K×K
ad::Value build_latent_adjacency(ad::Value e1, ad::Value e2);                 // → K×K
ad::Value normalize_adjacency_head(ad::Value a);                              // in-normalize columns
ad::Value edge_position_filter(Bind& bind, const MlpDef& mlp, ad::Value coords);  // → K²×d

/// Writes `anchor_id,x,y` rows followed by both adjacency heads as dense K×K
/// CSV blocks.
void export_anchors_csv(const std::string& path, const Tensor& coords, const Tensor& a_dist,
                        const Tensor& a_latent);

}  // namespace gstpp
