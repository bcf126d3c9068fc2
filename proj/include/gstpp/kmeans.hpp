#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gstpp/data.hpp"
#include "gstpp/tensor.hpp"

namespace gstpp {

/// Lloyd's k-means with seeded k-means++ initialization. Throws DataError
/// when fewer than K distinct points exist.
Tensor kmeans_centroids(const std::vector<std::array<double, 2>>& points, int K, uint64_t seed,
                        int max_iters = 100);

/// Anchor initialization over all training event locations.
Tensor init_anchors(const Dataset& train, int K, uint64_t seed);

/// Uniform anchor placement over the bounding box of training locations
/// (used when anchors should start away from the data structure).
Tensor random_anchors(const Dataset& train, int K, uint64_t seed);

}  // namespace gstpp
