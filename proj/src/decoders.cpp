#include "gstpp/decoders.hpp"

#include <cmath>

namespace gstpp {

using namespace ad;

namespace {
constexpr real kLog2Pi = real(1.8378770664093454836);
constexpr real kLogVarFloor = real(-13.815510557964274);  // log(1e-6)
}  // namespace

Value intensity_at(Bind& bind, const MlpDef& temporal_dec, Value z_g) {
  return softplus(reshape(temporal_dec.rows(bind, z_g), 1));
}

Value temporal_logpdf(Value lambda, Value delta_compensator) {
  return sub(ad::log(lambda), delta_compensator);
}

MixtureVals spatial_mixture(Bind& bind, const SpatialDecDef& dec, Value z_local, Value coords) {
  const int k = bind.tape.val(z_local).shape[0];
  MixtureVals m;
  m.log_w = log_softmax_vec(reshape(dec.weight.rows(bind, z_local), k));
  m.mu = add(dec.mean.rows(bind, z_local), coords);
  m.logvar = clamp_min(dec.logvar.rows(bind, z_local), kLogVarFloor);
  m.var = ad::exp(m.logvar);
  return m;
}

Value spatial_logpdf(const MixtureVals& mix, Tape& tape, real sx, real sy) {
  Value s = tape.constant(Tensor::vec({sx, sy}));
  Value diff = add_row_broadcast(mix.mu, neg(s));
  Value mahal = row_sums(vdiv(square(diff), mix.var));
  Value logdet = row_sums(mix.logvar);
  Value comp = add_scalar(lincomb({mahal, logdet}, {real(-0.5), real(-0.5)}), -kLog2Pi);
  return logsumexp_vec(add(mix.log_w, comp));
}

double spatial_logpdf_plain(const SpatialMixture& mix, double sx, double sy) {
  const int k = static_cast<int>(mix.weights.size());
  double best = -1e300;
  std::vector<double> terms(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    const double vx = mix.vars(i, 0), vy = mix.vars(i, 1);
    const double dx = sx - mix.means(i, 0), dy = sy - mix.means(i, 1);
    double t = std::log(mix.weights[static_cast<size_t>(i)]) - kLog2Pi -
               0.5 * (std::log(vx) + std::log(vy) + dx * dx / vx + dy * dy / vy);
    terms[static_cast<size_t>(i)] = t;
    best = std::max(best, t);
  }
  double acc = 0;
  for (double t : terms) acc += std::exp(t - best);
  return best + std::log(acc);
}

}  // namespace gstpp
