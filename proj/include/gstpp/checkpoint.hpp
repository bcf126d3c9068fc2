#pragma once

#include <string>

#include "gstpp/data.hpp"
#include "gstpp/model.hpp"

namespace gstpp {

/// Self-describing binary container: magic, JSON directory (model config,
/// normalizer, tensor index, optimizer step), then raw little-endian doubles
/// for every parameter and its optimizer moments. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const Model& model, const Normalizer& nz);

struct LoadedCheckpoint {
  ModelConfig cfg;
  Normalizer normalizer;
};

/// Reads the directory only (to construct a Model with the right shape).
LoadedCheckpoint read_checkpoint_header(const std::string& path);

/// Loads tensors and moments into an already-constructed, shape-compatible
/// model. Throws ConfigError on any mismatch.
void load_checkpoint_into(const std::string& path, Model& model, Normalizer& nz);

}  // namespace gstpp
