#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "gstpp/tensor.hpp"

namespace gstpp::ad {

enum class Op : uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  AddS,   // x + s0
  MulS,   // x * s0
  SMul,   // x * s, s a 1-element value
  Recip,
  ClampMin,  // max(x, s0)
  Tanh,
  Sigmoid,
  Softplus,
  Silu,
  Exp,
  Log,
  Sqrt,
  Square,
  MatMul,     // (m×k)·(k×n)
  MatVec,     // (m×k)·(k)
  Transpose,
  Reshape,    // same numel, new dims i0×i1 (i1==0 → rank-1 of i0)
  ConcatVec,
  ConcatCols,  // (r×a)|(r×b) → r×(a+b)
  SliceVec,    // x[i0 .. i0+i1)
  RowOf,       // row i0 of matrix → vector
  StackRows,   // n vectors of len d → n×d
  TileRows,    // vector of len d → i0×d
  ColSums,     // out[j] = Σ_i M[i,j]
  RowSums,     // out[i] = Σ_j M[i,j]
  ScaleRows,   // out[i,j] = M[i,j]·v[i]
  ScaleCols,   // out[i,j] = M[i,j]·v[j]
  AddRowB,     // out[i,:] = M[i,:] + v
  Lincomb,     // Σ c_k·x_k, same shapes
  SumAll,
  MeanAll,
  SumSq,
  SoftmaxVec,
  LogSoftmaxVec,
  LogSumExpVec,
  PairwiseDiff,  // C (K×2) → K²×2, row i·K+j = c_i − c_j
  Outer,         // u (m), v (n) → m×n
  RowNorms,      // ‖row‖₂ per row
  UnitRows,      // row/‖row‖₂, zero row when norm < s0
  LgcnGather,    // A (K×K), P (K²×d), H (K×d) → out[i,c] = Σ_j A[j,i]·P[jK+i? see impl]·H[j,c]
};

const char* op_name(Op op);

/// Handle to a node on a Tape. Cheap to copy; valid until the tape is reset.
struct Value {
  class Tape* tape = nullptr;
  int32_t id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

/// Record-and-replay reverse-mode tape. Nodes are stored in evaluation order;
/// reset() keeps slot capacity so repeated passes do not reallocate.
class Tape {
 public:
  struct Node {
    Op op = Op::Leaf;
    int32_t a = -1, b = -1, c = -1;
    std::vector<int32_t> extra;
    std::vector<real> coef;
    real s0 = 0;
    int i0 = 0, i1 = 0;
    Tensor val;
    Tensor grad;
    bool needs_grad = false;
    Tensor* sink = nullptr;  // leaf-only: gradient accumulation target
  };

  Value leaf(const Tensor& v, Tensor* grad_sink = nullptr);
  Value constant(const Tensor& v) { return leaf(v, nullptr); }
  Value constant_scalar(real v) { return leaf(Tensor::scalar(v), nullptr); }

  const Tensor& val(Value v) const { return nodes_[static_cast<size_t>(v.id)].val; }
  real scalar(Value v) const { return val(v).item(); }
  size_t size() const { return size_; }

  /// Accumulates d(loss)/d(leaf) into every leaf's grad sink. loss must be scalar.
  void backward(Value loss);

  /// Returns the loss value; throws NumericError naming the first non-finite
  /// node if anything on the tape is non-finite.
  real checked_loss(Value loss) const;

  void reset() { size_ = 0; }

  // -- op constructors (also exposed as free functions below) --
  Value emit1(Op op, Value a);
  Value emit2(Op op, Value a, Value b);
  Value emit3(Op op, Value a, Value b, Value c);
  Value emit_scalar_attr(Op op, Value a, real s0);
  Value emit_int_attr(Op op, Value a, int i0, int i1 = 0);
  Value emit_many(Op op, const std::vector<Value>& xs, const std::vector<real>& coef = {});

 private:
  Node& push();
  void forward_node(Node& n);
  void backward_node(size_t idx);
  Tensor& grad_of(int32_t id) { return nodes_[static_cast<size_t>(id)].grad; }

  std::vector<Node> nodes_;
  size_t size_ = 0;
};

// ---- free-function op surface ----

Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value vdiv(Value a, Value b);
Value neg(Value a);
Value add_scalar(Value a, real c);
Value mul_scalar(Value a, real c);
Value smul(Value a, Value s);  // s: 1-element
Value recip(Value a);
Value clamp_min(Value a, real c);
Value tanh(Value a);
Value sigmoid(Value a);
Value softplus(Value a);
Value silu(Value a);
Value exp(Value a);
Value log(Value a);
Value sqrt(Value a);
Value square(Value a);
Value matmul(Value a, Value b);
Value matvec(Value a, Value x);
Value transpose(Value a);
Value reshape(Value a, int r, int c = 0);
Value concat_vec(Value a, Value b);
Value concat_cols(Value a, Value b);
Value slice_vec(Value a, int off, int len);
Value row_of(Value m, int i);
Value stack_rows(const std::vector<Value>& rows);
Value tile_rows(Value v, int n);
Value col_sums(Value m);
Value row_sums(Value m);
Value scale_rows(Value m, Value v);
Value scale_cols(Value m, Value v);
Value add_row_broadcast(Value m, Value v);
Value lincomb(const std::vector<Value>& xs, const std::vector<real>& coef);
Value sum_all(Value a);
Value mean_all(Value a);
Value sum_sq(Value a);
Value softmax_vec(Value a);
Value log_softmax_vec(Value a);
Value logsumexp_vec(Value a);
Value pairwise_diff(Value coords);
Value outer(Value u, Value v);
Value row_norms(Value m);
Value unit_rows(Value m, real eps);
Value lgcn_gather(Value a_norm, Value p, Value h);

inline Value operator+(Value a, Value b) { return add(a, b); }
inline Value operator-(Value a, Value b) { return sub(a, b); }
inline Value operator-(Value a) { return neg(a); }
inline Value operator*(Value a, Value b) { return mul(a, b); }

}  // namespace gstpp::ad
