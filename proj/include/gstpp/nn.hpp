#pragma once

#include <array>
#include <optional>
#include <string>

#include "gstpp/param_store.hpp"
#include "gstpp/tape.hpp"

namespace gstpp {

/// Binds ParamStore entries onto one tape, once per entry per pass.
/// With grads == nullptr parameters enter as constants (sampling, export).
class Bind {
 public:
  Bind(ad::Tape& tape, const ParamStore& params, GradBuffers* grads)
      : tape(tape), params(params), grads_(grads), cache_(params.size(), ad::Value{}) {}

  ad::Value operator[](int id) {
    ad::Value& v = cache_[static_cast<size_t>(id)];
    if (!v.valid())
      v = tape.leaf(params.value(id), grads_ ? &grads_->at(id) : nullptr);
    return v;
  }

  ad::Tape& tape;
  const ParamStore& params;

 private:
  GradBuffers* grads_;
  std::vector<ad::Value> cache_;
};

/// Row-wise affine map: (n×in) → (n×out).
struct LinearDef {
  int w = -1, b = -1;
  int in = 0, out = 0;

  static LinearDef make(ParamStore& ps, const std::string& group, const std::string& name,
                        int in, int out, Rng& rng) {
    LinearDef d;
    d.in = in;
    d.out = out;
    d.w = ps.add(group, name + "_w", init_uniform({out, in}, in, rng), true);
    d.b = ps.add(group, name + "_b", Tensor::zeros({out}), true);
    return d;
  }

  ad::Value rows(Bind& bind, ad::Value x) const {  // x: n×in
    return ad::add_row_broadcast(ad::matmul(x, ad::transpose(bind[w])), bind[b]);
  }
  ad::Value vec(Bind& bind, ad::Value x) const {  // x: in
    return ad::add(ad::matvec(bind[w], x), bind[b]);
  }
};

/// Two-layer perceptron with SiLU hidden activation, applied row-wise.
struct MlpDef {
  LinearDef l1, l2;

  static MlpDef make(ParamStore& ps, const std::string& group, const std::string& name, int in,
                     int hidden, int out, Rng& rng) {
    MlpDef d;
    d.l1 = LinearDef::make(ps, group, name + "1", in, hidden, rng);
    d.l2 = LinearDef::make(ps, group, name + "2", hidden, out, rng);
    return d;
  }

  ad::Value rows(Bind& bind, ad::Value x) const {
    return l2.rows(bind, ad::silu(l1.rows(bind, x)));
  }
};

/// Gated recurrent cell whose input is augmented with projected time
/// features; operates on n state rows sharing one parameter set.
///   x̂ = [x ; proj(t_feats)]
///   r = σ(W_r[x̂;h]+b_r), u = σ(W_u[x̂;h]+b_u)
///   h̃ = tanh(W_h[x̂; r⊙h]+b_h),  h' = u⊙h + (1−u)⊙h̃
struct TGruDef {
  int wr = -1, br = -1, wu = -1, bu = -1, wh = -1, bh = -1;
  int wt = -1, bt = -1;  // 2 → t_dim time-feature projection
  int in = 0, dim = 0, t_dim = 0;

  static TGruDef make(ParamStore& ps, const std::string& group, int in, int dim, int t_dim,
                      Rng& rng) {
    TGruDef d;
    d.in = in;
    d.dim = dim;
    d.t_dim = t_dim;
    const int xin = in + t_dim + dim;
    d.wr = ps.add(group, "gru_wr", init_uniform({dim, xin}, xin, rng), true);
    d.br = ps.add(group, "gru_br", Tensor::zeros({dim}), true);
    d.wu = ps.add(group, "gru_wu", init_uniform({dim, xin}, xin, rng), true);
    d.bu = ps.add(group, "gru_bu", Tensor::zeros({dim}), true);
    d.wh = ps.add(group, "gru_wh", init_uniform({dim, xin}, xin, rng), true);
    d.bh = ps.add(group, "gru_bh", Tensor::zeros({dim}), true);
    d.wt = ps.add(group, "tproj_w", init_uniform({t_dim, 2}, 2, rng), true);
    d.bt = ps.add(group, "tproj_b", Tensor::zeros({t_dim}), true);
    return d;
  }

  /// h: n×dim, x: n×in (ignored when in == 0), t_feats: length-2 constant.
  ad::Value step(Bind& bind, ad::Value h, std::optional<ad::Value> x,
                 const std::array<real, 2>& t_feats) const {
    using namespace ad;
    const int n = bind.tape.val(h).shape[0];
    Value tf = bind.tape.constant(Tensor::vec({t_feats[0], t_feats[1]}));
    Value tp = tile_rows(add(matvec(bind[wt], tf), bind[bt]), n);
    Value xh = in > 0 ? concat_cols(concat_cols(*x, tp), h) : concat_cols(tp, h);
    Value r = sigmoid(add_row_broadcast(matmul(xh, transpose(bind[wr])), bind[br]));
    Value u = sigmoid(add_row_broadcast(matmul(xh, transpose(bind[wu])), bind[bu]));
    Value xrh = in > 0 ? concat_cols(concat_cols(*x, tp), mul(r, h))
                       : concat_cols(tp, mul(r, h));
    Value cand = tanh(add_row_broadcast(matmul(xrh, transpose(bind[wh])), bind[bh]));
    // h' = u⊙h + (1−u)⊙h̃ = u⊙(h−h̃) + h̃
    return add(mul(u, sub(h, cand)), cand);
  }
};

}  // namespace gstpp
