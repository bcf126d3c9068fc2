#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace gstpp {

#ifdef GSTPP_SINGLE_PRECISION
using real = float;
#else
using real = double;
#endif

/// Dense row-major tensor. Rank 0 is not used; scalars are 1-element vectors.
class Tensor {
 public:
  std::vector<int> shape;
  std::vector<real> data;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<real> d) : shape(std::move(s)), data(std::move(d)) {
    assert(static_cast<long>(data.size()) == numel_of(shape));
  }

  static Tensor zeros(std::vector<int> s) {
    Tensor t;
    t.shape = std::move(s);
    t.data.assign(numel_of(t.shape), real(0));
    return t;
  }
  static Tensor full(std::vector<int> s, real v) {
    Tensor t = zeros(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor scalar(real v) { return Tensor({1}, {v}); }
  static Tensor vec(std::vector<real> d) {
    int n = static_cast<int>(d.size());
    return Tensor({n}, std::move(d));
  }
  static Tensor matrix(int r, int c, std::vector<real> d) { return Tensor({r, c}, std::move(d)); }

  long numel() const { return static_cast<long>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int rows() const { return rank() == 2 ? shape[0] : (rank() == 1 ? shape[0] : 0); }
  int cols() const { return rank() == 2 ? shape[1] : (rank() == 1 ? 1 : 0); }
  bool is_scalar() const { return numel() == 1; }

  real item() const {
    assert(is_scalar());
    return data[0];
  }
  real& operator()(int i) { return data[static_cast<size_t>(i)]; }
  real operator()(int i) const { return data[static_cast<size_t>(i)]; }
  real& operator()(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
  real operator()(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  /// Reuses existing capacity; contents are zeroed.
  void reset_zeros(const std::vector<int>& s) {
    shape = s;
    data.assign(static_cast<size_t>(numel_of(s)), real(0));
  }

  bool all_finite() const {
    for (real v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string out = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) out += ",";
      out += std::to_string(shape[i]);
    }
    return out + "]";
  }

  static long numel_of(const std::vector<int>& s) {
    long n = 1;
    for (int d : s) n *= d;
    return n;
  }
};

/// Error taxonomy: configuration, input data, numerical failure.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gstpp
