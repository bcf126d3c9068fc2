#pragma once

#include <string>
#include <vector>

#include "gstpp/tensor.hpp"

namespace gstpp {

struct Event {
  double t = 0;
  double x = 0, y = 0;
};

struct EventSeq {
  std::string id;
  std::vector<Event> events;
  // Filled by the synthetic generators: exact per-event log-densities under
  // the generating process. Empty for real data.
  std::vector<double> true_logpt;
  std::vector<double> true_logps;

  size_t size() const { return events.size(); }
};

struct Dataset {
  std::vector<EventSeq> seqs;

  size_t n_sequences() const { return seqs.size(); }
  long n_events() const {
    long n = 0;
    for (const auto& s : seqs) n += static_cast<long>(s.size());
    return n;
  }
  double mean_length() const {
    return seqs.empty() ? 0.0 : static_cast<double>(n_events()) / static_cast<double>(seqs.size());
  }
};

/// Loads `seq_id,t,x,y[,true_logpt,true_logps]` CSV. Rows of one sequence must
/// be contiguous and strictly increasing in t; violations are rejected with
/// the offending row number.
Dataset load_csv(const std::string& path);

void save_csv(const std::string& path, const Dataset& data, bool with_truth);

/// Affine map fitted on the training split: time scaled so the mean
/// inter-event gap is 1, locations standardized per axis.
struct Normalizer {
  double t_scale = 1, t_offset = 0;
  double x_scale = 1, x_offset = 0;
  double y_scale = 1, y_offset = 0;

  static Normalizer fit(const Dataset& train);

  Event apply(const Event& e) const {
    return {(e.t - t_offset) * t_scale, (e.x - x_offset) * x_scale, (e.y - y_offset) * y_scale};
  }
  Event invert(const Event& e) const {
    return {e.t / t_scale + t_offset, e.x / x_scale + x_offset, e.y / y_scale + y_offset};
  }
  Dataset apply(const Dataset& d) const;

  /// log-Jacobian corrections: nll_normalized = nll_raw + log_jac.
  double temporal_log_jacobian() const { return std::log(t_scale); }
  double spatial_log_jacobian() const { return std::log(x_scale) + std::log(y_scale); }
};

/// Deterministic seeded train/validation split by sequence.
void split_dataset(const Dataset& all, double val_frac, uint64_t seed, Dataset& train,
                   Dataset& val);

}  // namespace gstpp
