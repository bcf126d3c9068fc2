#include "gstpp/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gstpp/rng.hpp"

namespace gstpp {

namespace {
double sqdist(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  return (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]);
}
}  // namespace

Tensor kmeans_centroids(const std::vector<std::array<double, 2>>& points, int K, uint64_t seed,
                        int max_iters) {
  if (K < 1) throw ConfigError("kmeans: K must be >= 1");
  std::set<std::pair<double, double>> distinct;
  for (const auto& p : points) distinct.insert({p[0], p[1]});
  if (static_cast<int>(distinct.size()) < K)
    throw DataError("kmeans: need at least K=" + std::to_string(K) + " distinct points, have " +
                    std::to_string(distinct.size()));

  const size_t n = points.size();
  Rng rng(seed);
  std::vector<std::array<double, 2>> centers;
  centers.reserve(static_cast<size_t>(K));

  // k-means++ seeding
  centers.push_back(points[rng.integer(n)]);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < K) {
    double total = 0;
    for (size_t i = 0; i < n; ++i) {
      double best = 1e300;
      for (const auto& c : centers) best = std::min(best, sqdist(points[i], c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0) {
      // remaining mass is zero (duplicates); pick any unused distinct point
      for (const auto& p : points) {
        bool used = false;
        for (const auto& c : centers) used = used || sqdist(p, c) == 0;
        if (!used) {
          centers.push_back(p);
          break;
        }
      }
      continue;
    }
    double u = rng.uniform() * total;
    size_t pick = n - 1;
    for (size_t i = 0; i < n; ++i) {
      u -= d2[i];
      if (u <= 0) {
        pick = i;
        break;
      }
    }
    centers.push_back(points[pick]);
  }

  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = 1e300;
      for (int k = 0; k < K; ++k) {
        const double d = sqdist(points[i], centers[static_cast<size_t>(k)]);
        if (d < bd) {
          bd = d;
          best = k;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    std::vector<std::array<double, 2>> sums(static_cast<size_t>(K), {0, 0});
    std::vector<long> counts(static_cast<size_t>(K), 0);
    for (size_t i = 0; i < n; ++i) {
      sums[static_cast<size_t>(assign[i])][0] += points[i][0];
      sums[static_cast<size_t>(assign[i])][1] += points[i][1];
      counts[static_cast<size_t>(assign[i])] += 1;
    }
    for (int k = 0; k < K; ++k) {
      if (counts[static_cast<size_t>(k)] == 0) {
        // reseed an empty cluster at the point farthest from its center
        size_t far = 0;
        double fd = -1;
        for (size_t i = 0; i < n; ++i) {
          const double d = sqdist(points[i], centers[static_cast<size_t>(assign[i])]);
          if (d > fd) {
            fd = d;
            far = i;
          }
        }
        centers[static_cast<size_t>(k)] = points[far];
      } else {
        centers[static_cast<size_t>(k)] = {
            sums[static_cast<size_t>(k)][0] / static_cast<double>(counts[static_cast<size_t>(k)]),
            sums[static_cast<size_t>(k)][1] / static_cast<double>(counts[static_cast<size_t>(k)])};
      }
    }
  }

  Tensor out = Tensor::zeros({K, 2});
  for (int k = 0; k < K; ++k) {
    out(k, 0) = static_cast<real>(centers[static_cast<size_t>(k)][0]);
    out(k, 1) = static_cast<real>(centers[static_cast<size_t>(k)][1]);
  }
  return out;
}

namespace {
std::vector<std::array<double, 2>> all_locations(const Dataset& train) {
  std::vector<std::array<double, 2>> pts;
  for (const auto& seq : train.seqs)
    for (const auto& e : seq.events) pts.push_back({e.x, e.y});
  return pts;
}
}  // namespace

Tensor init_anchors(const Dataset& train, int K, uint64_t seed) {
  return kmeans_centroids(all_locations(train), K, seed);
}

Tensor random_anchors(const Dataset& train, int K, uint64_t seed) {
  auto pts = all_locations(train);
  if (pts.empty()) throw DataError("random_anchors: no training locations");
  double lox = 1e300, hix = -1e300, loy = 1e300, hiy = -1e300;
  for (const auto& p : pts) {
    lox = std::min(lox, p[0]);
    hix = std::max(hix, p[0]);
    loy = std::min(loy, p[1]);
    hiy = std::max(hiy, p[1]);
  }
  Rng rng(seed);
  Tensor out = Tensor::zeros({K, 2});
  for (int k = 0; k < K; ++k) {
    out(k, 0) = static_cast<real>(rng.uniform(lox, hix));
    out(k, 1) = static_cast<real>(rng.uniform(loy, hiy));
  }
  return out;
}

}  // namespace gstpp
