#include "gstpp/anchor_graph.hpp"

#include <cmath>
#include <fstream>

namespace gstpp {

using namespace ad;

Ablation ablation_from_string(const std::string& s) {
  if (s == "full") return Ablation::Full;
  if (s == "no_dist") return Ablation::NoDist;
  if (s == "no_latent") return Ablation::NoLatent;
  if (s == "no_graph") return Ablation::NoGraph;
  throw ConfigError("unknown ablation '" + s + "' (expected full|no_dist|no_latent|no_graph)");
}

const char* ablation_to_string(Ablation a) {
  switch (a) {
    case Ablation::Full: return "full";
    case Ablation::NoDist: return "no_dist";
    case Ablation::NoLatent: return "no_latent";
    case Ablation::NoGraph: return "no_graph";
  }
  return "?";
}

namespace {
real inverse_softplus(real y) {
  // solves softplus(x) = y for y > 0
  return y > 30 ? y : static_cast<real>(std::log(std::expm1(static_cast<double>(y))));
}
}  // namespace

AnchorGraphDef AnchorGraphDef::make(ParamStore& ps, int K, int d_embed, int d_model,
                                    int m_layers, real beta, real gamma_init, real psi_init,
                                    Ablation ablation, Rng& rng) {
  if (K < 1) throw ConfigError("anchor graph: K must be >= 1");
  if (d_embed < 1) throw ConfigError("anchor graph: d_embed must be >= 1");
  if (gamma_init <= 0) throw ConfigError("anchor graph: gamma_rbf must be positive");
  if (psi_init <= 0) throw ConfigError("anchor graph: rle psi must be positive");
  if (beta < 0 || beta > 1) throw ConfigError("anchor graph: beta must be in [0,1]");
  if (m_layers < 1) throw ConfigError("anchor graph: m_layers must be >= 1");

  AnchorGraphDef d;
  d.K = K;
  d.d_embed = d_embed;
  d.d_model = d_model;
  d.m_layers = m_layers;
  d.beta = beta;
  d.ablation = ablation;

  // Coordinates are overwritten by the anchor initializer before training;
  // they are exempt from weight decay and flagged for the coordinate lr scale.
  d.coords = ps.add("anchor_coords", "c", Tensor::zeros({K, 2}), false, true);
  d.e1 = ps.add("node_embeds", "e1", init_uniform({K, d_embed}, d_embed, rng), true);
  d.e2 = ps.add("node_embeds", "e2", init_uniform({K, d_embed}, d_embed, rng), true);
  d.gamma_raw = ps.add("node_embeds", "gamma_raw", Tensor::scalar(inverse_softplus(gamma_init)),
                       false);
  d.edge_filter = MlpDef::make(ps, "lgcn", "edge", 2, d_model, d_model, rng);
  // Message-reading selection matrices (m >= 1) start at zero so untrained
  // messages cannot perturb the drift field; they grow as gradients demand.
  for (int m = 0; m <= m_layers; ++m)
    for (int h = 0; h < 2; ++h) {
      Tensor w = m == 0 ? init_uniform({d_model, d_model}, d_model, rng)
                        : Tensor::zeros({d_model, d_model});
      d.sel_w.push_back(ps.add("lgcn", "sel_w" + std::to_string(m) + "_h" + std::to_string(h),
                               std::move(w), true));
    }
  d.sel_b = ps.add("lgcn", "sel_b", Tensor::zeros({d_model}), true);
  d.rle_mlp = MlpDef::make(ps, "rle", "dir", 2, d_model, d_model, rng);
  d.psi_raw = ps.add("rle", "psi_raw", Tensor::full({d_model}, inverse_softplus(psi_init)), false);
  return d;
}

Value build_distance_adjacency(Value coords, Value gamma) {
  const int k = coords.tape->val(coords).shape[0];
  // exp(−γ‖c_i−c_j‖²) with a forced zero diagonal
  Value d2 = reshape(row_sums(square(pairwise_diff(coords))), k, k);
  Value a = ad::exp(smul(d2, neg(gamma)));
  Tensor mask = Tensor::full({k, k}, 1);
  for (int i = 0; i < k; ++i) mask(i, i) = 0;
  return mul(a, coords.tape->constant(mask));
}

Value build_latent_adjacency(Value e1, Value e2) {
  Value m = sub(matmul(e1, transpose(e2)), matmul(e2, transpose(e1)));
  return softplus(m);
}

Value normalize_adjacency_head(Value a) {
  // Incoming mass of node i is column i; scale so each column sums to ~1.
  Value sums = col_sums(a);
  return scale_cols(a, recip(add_scalar(sums, real(1e-8))));
}

Value edge_position_filter(Bind& bind, const MlpDef& mlp, Value coords) {
  return ad::tanh(mlp.rows(bind, pairwise_diff(coords)));
}

AnchorGraphDef::Cache AnchorGraphDef::build_cache(Bind& bind) const {
  Cache c;
  c.coords = bind[coords];
  if (no_graph()) return c;
  if (use_dist()) {
    Value gamma = softplus(bind[gamma_raw]);
    c.a_norm[0] = normalize_adjacency_head(build_distance_adjacency(c.coords, gamma));
  }
  if (use_latent())
    c.a_norm[1] = normalize_adjacency_head(build_latent_adjacency(bind[e1], bind[e2]));
  c.p = edge_position_filter(bind, edge_filter, c.coords);
  return c;
}

Value AnchorGraphDef::lgcn(Bind& bind, const Cache& cache, Value z) const {
  // Both heads start from the same state matrix. A disabled head has zero
  // adjacency, so its hidden states decay along the residual path only.
  const int layers = no_graph() ? 0 : m_layers;
  Value out;
  for (int h = 0; h < 2; ++h) {
    Value hm = z;
    for (int m = 0; m <= layers; ++m) {
      if (m > 0) {
        Value msg;
        if (cache.a_norm[h].valid()) {
          msg = lgcn_gather(cache.a_norm[h], cache.p, hm);
          hm = lincomb({hm, msg}, {beta, 1 - beta});
        } else {
          hm = mul_scalar(hm, beta);
        }
      }
      Value term = matmul(hm, transpose(bind[sel_w[static_cast<size_t>(m) * 2 + h]]));
      out = out.valid() ? add(out, term) : term;
    }
  }
  return add_row_broadcast(out, bind[sel_b]);
}

Value AnchorGraphDef::rle(Bind& bind, const Cache& cache, real sx, real sy) const {
  // x_i = MLP(α_i)·exp(−ψ l_i); α_i the unit direction from anchor i to the
  // event (zero when the event sits on the anchor), l_i the distance.
  Value s = bind.tape.constant(Tensor::vec({sx, sy}));
  Value diff = neg(add_row_broadcast(cache.coords, neg(s)));  // s − c_i, per row
  Value l = row_norms(diff);
  Value alpha = unit_rows(diff, real(1e-12));
  Value psi = softplus(bind[psi_raw]);
  Value decay = ad::exp(neg(outer(l, psi)));
  return mul(rle_mlp.rows(bind, alpha), decay);
}

void export_anchors_csv(const std::string& path, const Tensor& coords, const Tensor& a_dist,
                        const Tensor& a_latent) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.precision(17);
  out << "anchor_id,x,y\n";
  const int k = coords.shape[0];
  for (int i = 0; i < k; ++i) out << i << "," << coords(i, 0) << "," << coords(i, 1) << "\n";
  for (const Tensor* a : {&a_dist, &a_latent}) {
    out << "# adjacency head " << (a == &a_dist ? "distance" : "latent") << " (" << k << "x" << k
        << ")\n";
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) out << (j ? "," : "") << (*a)(i, j);
      out << "\n";
    }
  }
}

}  // namespace gstpp
