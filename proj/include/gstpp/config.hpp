#pragma once

#include <string>

#include "gstpp/synthetic.hpp"
#include "gstpp/training.hpp"

namespace gstpp {

/// On-disk run configuration. Unknown keys anywhere in the file are rejected
/// with the offending path.
struct CliConfig {
  TrainConfig train;
  std::string train_data;  // CSV path
  std::string out_dir = "runs/out";

  static CliConfig load(const std::string& path);
};

SyntheticSpec load_synthetic_spec(const std::string& path);

/// Stable hash of the canonicalized config file content, for run manifests.
std::string config_hash(const std::string& path);

}  // namespace gstpp
