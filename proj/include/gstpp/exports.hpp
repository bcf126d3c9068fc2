#pragma once

#include <string>

#include "gstpp/data.hpp"
#include "gstpp/model.hpp"

namespace gstpp {

/// Anchor positions plus both adjacency heads (pre-normalization), raw units
/// for coordinates.
void export_anchors(const std::string& path, const Model& model, const Normalizer& nz);

struct GridSpec {
  int resolution = 64;
  // bounds in raw data units; when lo >= hi they are derived from the data
  double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;
};

/// Conditional spatial density map p*(s|t) given the history of `seq` before
/// time t (raw units in, raw units out). Writes resolution² rows of
/// `x,y,log_density`.
void export_density_grid(const std::string& path, const Model& model, const Normalizer& nz,
                         const EventSeq& seq_raw, double t_raw, const GridSpec& grid);

/// Per-event trajectory dump `i,t,d_comp,zg_norm,zl_max_norm` (t raw units).
void export_trajectory(const std::string& path, const Model& model, const Normalizer& nz,
                       const EventSeq& seq_raw);

}  // namespace gstpp
