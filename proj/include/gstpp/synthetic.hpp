#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gstpp/data.hpp"

namespace gstpp {

/// Ground-truth spatial component for the generators.
struct Cluster {
  double weight = 1;
  double mx = 0, my = 0;
  double sx = 1, sy = 1;  // standard deviations
};

enum class SynthKind { HomogeneousPoisson, StHawkes };

struct SyntheticSpec {
  SynthKind kind = SynthKind::HomogeneousPoisson;
  double mu = 1.0;          // base rate
  double alpha = 0;         // excitation jump (st_hawkes)
  double beta_h = 1;        // excitation decay (st_hawkes)
  double bandwidth = 0.1;   // offspring location std (st_hawkes)
  bool cluster_rotate = false;  // offspring centered on the next cluster, cyclically
  std::vector<Cluster> clusters;
  double horizon = 50;
  int n_sequences = 1;
  uint64_t seed = 1;

  void validate() const;
};

/// Generates sequences with exact per-event log-densities under the
/// generating process (true_logpt, true_logps filled in). st_hawkes uses
/// Ogata thinning with an exponential kernel; with alpha == 0 it consumes the
/// identical random stream as the homogeneous generator.
Dataset generate(const SyntheticSpec& spec);

/// Density of the ground-truth spatial mixture (used as the background
/// location distribution).
double cluster_mixture_logpdf(const std::vector<Cluster>& clusters, double x, double y);

}  // namespace gstpp
