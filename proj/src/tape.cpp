#include "gstpp/tape.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace gstpp::ad {

namespace {

real stable_sigmoid(real x) {
  if (x >= 0) {
    real e = std::exp(-x);
    return 1 / (1 + e);
  }
  real e = std::exp(x);
  return e / (1 + e);
}

real stable_softplus(real x) {
  if (x > 30) return x + std::log1p(std::exp(-x));
  if (x < -30) return std::exp(x);
  return std::log1p(std::exp(x));
}

[[noreturn]] void shape_fail(Op op, const std::string& what) {
  throw std::logic_error(std::string("tape: bad shapes for ") + op_name(op) + ": " + what);
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Neg: return "neg";
    case Op::AddS: return "add_scalar";
    case Op::MulS: return "mul_scalar";
    case Op::SMul: return "smul";
    case Op::Recip: return "recip";
    case Op::ClampMin: return "clamp_min";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Softplus: return "softplus";
    case Op::Silu: return "silu";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    case Op::Square: return "square";
    case Op::MatMul: return "matmul";
    case Op::MatVec: return "matvec";
    case Op::Transpose: return "transpose";
    case Op::Reshape: return "reshape";
    case Op::ConcatVec: return "concat_vec";
    case Op::ConcatCols: return "concat_cols";
    case Op::SliceVec: return "slice_vec";
    case Op::RowOf: return "row_of";
    case Op::StackRows: return "stack_rows";
    case Op::TileRows: return "tile_rows";
    case Op::ColSums: return "col_sums";
    case Op::RowSums: return "row_sums";
    case Op::ScaleRows: return "scale_rows";
    case Op::ScaleCols: return "scale_cols";
    case Op::AddRowB: return "add_row_broadcast";
    case Op::Lincomb: return "lincomb";
    case Op::SumAll: return "sum_all";
    case Op::MeanAll: return "mean_all";
    case Op::SumSq: return "sum_sq";
    case Op::SoftmaxVec: return "softmax";
    case Op::LogSoftmaxVec: return "log_softmax";
    case Op::LogSumExpVec: return "logsumexp";
    case Op::PairwiseDiff: return "pairwise_diff";
    case Op::Outer: return "outer";
    case Op::RowNorms: return "row_norms";
    case Op::UnitRows: return "unit_rows";
    case Op::LgcnGather: return "lgcn_gather";
  }
  return "?";
}

Tape::Node& Tape::push() {
  if (size_ == nodes_.size()) nodes_.emplace_back();
  Node& n = nodes_[size_++];
  n.op = Op::Leaf;
  n.a = n.b = n.c = -1;
  n.extra.clear();
  n.coef.clear();
  n.s0 = 0;
  n.i0 = n.i1 = 0;
  n.needs_grad = false;
  n.sink = nullptr;
  return n;
}

Value Tape::leaf(const Tensor& v, Tensor* grad_sink) {
  Node& n = push();
  n.op = Op::Leaf;
  n.val = v;
  n.sink = grad_sink;
  n.needs_grad = grad_sink != nullptr;
  return {this, static_cast<int32_t>(size_ - 1)};
}

Value Tape::emit1(Op op, Value a) {
  Node& n = push();
  n.op = op;
  n.a = a.id;
  n.needs_grad = nodes_[a.id].needs_grad;
  forward_node(n);
  return {this, static_cast<int32_t>(size_ - 1)};
}

Value Tape::emit2(Op op, Value a, Value b) {
  Node& n = push();
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  forward_node(n);
  return {this, static_cast<int32_t>(size_ - 1)};
}

Value Tape::emit3(Op op, Value a, Value b, Value c) {
  Node& n = push();
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.c = c.id;
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad || nodes_[c.id].needs_grad;
  forward_node(n);
  return {this, static_cast<int32_t>(size_ - 1)};
}

Value Tape::emit_scalar_attr(Op op, Value a, real s0) {
  Node& n = push();
  n.op = op;
  n.a = a.id;
  n.s0 = s0;
  n.needs_grad = nodes_[a.id].needs_grad;
  forward_node(n);
  return {this, static_cast<int32_t>(size_ - 1)};
}

Value Tape::emit_int_attr(Op op, Value a, int i0, int i1) {
  Node& n = push();
  n.op = op;
  n.a = a.id;
  n.i0 = i0;
  n.i1 = i1;
  n.needs_grad = nodes_[a.id].needs_grad;
  forward_node(n);
  return {this, static_cast<int32_t>(size_ - 1)};
}

Value Tape::emit_many(Op op, const std::vector<Value>& xs, const std::vector<real>& coef) {
  Node& n = push();
  n.op = op;
  for (Value v : xs) {
    n.extra.push_back(v.id);
    n.needs_grad = n.needs_grad || nodes_[v.id].needs_grad;
  }
  n.coef = coef;
  forward_node(n);
  return {this, static_cast<int32_t>(size_ - 1)};
}

void Tape::forward_node(Node& n) {
  auto& A = nodes_[static_cast<size_t>(n.a >= 0 ? n.a : 0)].val;
  switch (n.op) {
    case Op::Leaf:
      break;

    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      const Tensor& B = nodes_[n.b].val;
      if (!A.same_shape(B)) shape_fail(n.op, A.shape_str() + " vs " + B.shape_str());
      n.val.reset_zeros(A.shape);
      const long m = A.numel();
      for (long i = 0; i < m; ++i) {
        switch (n.op) {
          case Op::Add: n.val.data[i] = A.data[i] + B.data[i]; break;
          case Op::Sub: n.val.data[i] = A.data[i] - B.data[i]; break;
          case Op::Mul: n.val.data[i] = A.data[i] * B.data[i]; break;
          default: n.val.data[i] = A.data[i] / B.data[i]; break;
        }
      }
      break;
    }

    case Op::Neg:
    case Op::AddS:
    case Op::MulS:
    case Op::Recip:
    case Op::ClampMin:
    case Op::Tanh:
    case Op::Sigmoid:
    case Op::Softplus:
    case Op::Silu:
    case Op::Exp:
    case Op::Log:
    case Op::Sqrt:
    case Op::Square: {
      n.val.reset_zeros(A.shape);
      const long m = A.numel();
      for (long i = 0; i < m; ++i) {
        real x = A.data[i];
        real y = 0;
        switch (n.op) {
          case Op::Neg: y = -x; break;
          case Op::AddS: y = x + n.s0; break;
          case Op::MulS: y = x * n.s0; break;
          case Op::Recip: y = 1 / x; break;
          case Op::ClampMin: y = x > n.s0 ? x : n.s0; break;
          case Op::Tanh: y = std::tanh(x); break;
          case Op::Sigmoid: y = stable_sigmoid(x); break;
          case Op::Softplus: y = stable_softplus(x); break;
          case Op::Silu: y = x * stable_sigmoid(x); break;
          case Op::Exp: y = std::exp(x); break;
          case Op::Log: y = std::log(x); break;
          case Op::Sqrt: y = std::sqrt(x); break;
          default: y = x * x; break;
        }
        n.val.data[i] = y;
      }
      break;
    }

    case Op::SMul: {
      const Tensor& S = nodes_[n.b].val;
      if (!S.is_scalar()) shape_fail(n.op, "scale must be scalar, got " + S.shape_str());
      n.val.reset_zeros(A.shape);
      const real s = S.item();
      for (long i = 0; i < A.numel(); ++i) n.val.data[i] = A.data[i] * s;
      break;
    }

    case Op::MatMul: {
      const Tensor& B = nodes_[n.b].val;
      if (A.rank() != 2 || B.rank() != 2 || A.shape[1] != B.shape[0])
        shape_fail(n.op, A.shape_str() + " x " + B.shape_str());
      const int m = A.shape[0], k = A.shape[1], p = B.shape[1];
      n.val.reset_zeros({m, p});
      for (int i = 0; i < m; ++i)
        for (int l = 0; l < k; ++l) {
          const real a = A(i, l);
          if (a == 0) continue;
          for (int j = 0; j < p; ++j) n.val(i, j) += a * B(l, j);
        }
      break;
    }

    case Op::MatVec: {
      const Tensor& X = nodes_[n.b].val;
      if (A.rank() != 2 || X.rank() != 1 || A.shape[1] != X.shape[0])
        shape_fail(n.op, A.shape_str() + " x " + X.shape_str());
      const int m = A.shape[0], k = A.shape[1];
      n.val.reset_zeros({m});
      for (int i = 0; i < m; ++i) {
        real acc = 0;
        for (int l = 0; l < k; ++l) acc += A(i, l) * X(l);
        n.val(i) = acc;
      }
      break;
    }

    case Op::Transpose: {
      if (A.rank() != 2) shape_fail(n.op, A.shape_str());
      const int r = A.shape[0], c = A.shape[1];
      n.val.reset_zeros({c, r});
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) n.val(j, i) = A(i, j);
      break;
    }

    case Op::Reshape: {
      std::vector<int> s = n.i1 > 0 ? std::vector<int>{n.i0, n.i1} : std::vector<int>{n.i0};
      if (Tensor::numel_of(s) != A.numel()) shape_fail(n.op, A.shape_str());
      n.val.shape = s;
      n.val.data = A.data;
      break;
    }

    case Op::ConcatVec: {
      const Tensor& B = nodes_[n.b].val;
      if (A.rank() != 1 || B.rank() != 1) shape_fail(n.op, A.shape_str() + " | " + B.shape_str());
      n.val.reset_zeros({A.shape[0] + B.shape[0]});
      std::copy(A.data.begin(), A.data.end(), n.val.data.begin());
      std::copy(B.data.begin(), B.data.end(), n.val.data.begin() + A.shape[0]);
      break;
    }

    case Op::ConcatCols: {
      const Tensor& B = nodes_[n.b].val;
      if (A.rank() != 2 || B.rank() != 2 || A.shape[0] != B.shape[0])
        shape_fail(n.op, A.shape_str() + " | " + B.shape_str());
      const int r = A.shape[0], ca = A.shape[1], cb = B.shape[1];
      n.val.reset_zeros({r, ca + cb});
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < ca; ++j) n.val(i, j) = A(i, j);
        for (int j = 0; j < cb; ++j) n.val(i, ca + j) = B(i, j);
      }
      break;
    }

    case Op::SliceVec: {
      if (A.rank() != 1 || n.i0 < 0 || n.i0 + n.i1 > A.shape[0]) shape_fail(n.op, A.shape_str());
      n.val.reset_zeros({n.i1});
      std::copy(A.data.begin() + n.i0, A.data.begin() + n.i0 + n.i1, n.val.data.begin());
      break;
    }

    case Op::RowOf: {
      if (A.rank() != 2 || n.i0 < 0 || n.i0 >= A.shape[0]) shape_fail(n.op, A.shape_str());
      const int c = A.shape[1];
      n.val.reset_zeros({c});
      for (int j = 0; j < c; ++j) n.val(j) = A(n.i0, j);
      break;
    }

    case Op::StackRows: {
      if (n.extra.empty()) shape_fail(n.op, "empty");
      const Tensor& first = nodes_[n.extra[0]].val;
      const int d = first.shape[0];
      const int k = static_cast<int>(n.extra.size());
      n.val.reset_zeros({k, d});
      for (int i = 0; i < k; ++i) {
        const Tensor& r = nodes_[n.extra[i]].val;
        if (r.rank() != 1 || r.shape[0] != d) shape_fail(n.op, r.shape_str());
        for (int j = 0; j < d; ++j) n.val(i, j) = r(j);
      }
      break;
    }

    case Op::TileRows: {
      if (A.rank() != 1) shape_fail(n.op, A.shape_str());
      const int d = A.shape[0];
      n.val.reset_zeros({n.i0, d});
      for (int i = 0; i < n.i0; ++i)
        for (int j = 0; j < d; ++j) n.val(i, j) = A(j);
      break;
    }

    case Op::ColSums: {
      if (A.rank() != 2) shape_fail(n.op, A.shape_str());
      n.val.reset_zeros({A.shape[1]});
      for (int i = 0; i < A.shape[0]; ++i)
        for (int j = 0; j < A.shape[1]; ++j) n.val(j) += A(i, j);
      break;
    }

    case Op::RowSums: {
      if (A.rank() != 2) shape_fail(n.op, A.shape_str());
      n.val.reset_zeros({A.shape[0]});
      for (int i = 0; i < A.shape[0]; ++i)
        for (int j = 0; j < A.shape[1]; ++j) n.val(i) += A(i, j);
      break;
    }

    case Op::ScaleRows:
    case Op::ScaleCols: {
      const Tensor& V = nodes_[n.b].val;
      const bool rows = n.op == Op::ScaleRows;
      if (A.rank() != 2 || V.rank() != 1 || V.shape[0] != (rows ? A.shape[0] : A.shape[1]))
        shape_fail(n.op, A.shape_str() + " . " + V.shape_str());
      n.val.reset_zeros(A.shape);
      for (int i = 0; i < A.shape[0]; ++i)
        for (int j = 0; j < A.shape[1]; ++j) n.val(i, j) = A(i, j) * V(rows ? i : j);
      break;
    }

    case Op::AddRowB: {
      const Tensor& V = nodes_[n.b].val;
      if (A.rank() != 2 || V.rank() != 1 || V.shape[0] != A.shape[1])
        shape_fail(n.op, A.shape_str() + " + " + V.shape_str());
      n.val.reset_zeros(A.shape);
      for (int i = 0; i < A.shape[0]; ++i)
        for (int j = 0; j < A.shape[1]; ++j) n.val(i, j) = A(i, j) + V(j);
      break;
    }

    case Op::Lincomb: {
      if (n.extra.empty() || n.extra.size() != n.coef.size()) shape_fail(n.op, "arity/coef mismatch");
      const Tensor& first = nodes_[n.extra[0]].val;
      n.val.reset_zeros(first.shape);
      for (size_t k = 0; k < n.extra.size(); ++k) {
        const Tensor& X = nodes_[n.extra[k]].val;
        if (!X.same_shape(first)) shape_fail(n.op, X.shape_str());
        const real c = n.coef[k];
        for (long i = 0; i < X.numel(); ++i) n.val.data[i] += c * X.data[i];
      }
      break;
    }

    case Op::SumAll:
    case Op::MeanAll:
    case Op::SumSq: {
      real acc = 0;
      for (real x : A.data) acc += n.op == Op::SumSq ? x * x : x;
      if (n.op == Op::MeanAll) acc /= static_cast<real>(A.numel());
      n.val.reset_zeros({1});
      n.val(0) = acc;
      break;
    }

    case Op::SoftmaxVec:
    case Op::LogSoftmaxVec: {
      if (A.rank() != 1) shape_fail(n.op, A.shape_str());
      n.val.reset_zeros(A.shape);
      real mx = A.data[0];
      for (real x : A.data) mx = std::max(mx, x);
      real z = 0;
      for (real x : A.data) z += std::exp(x - mx);
      const real lz = std::log(z) + mx;
      for (int i = 0; i < A.shape[0]; ++i)
        n.val(i) = n.op == Op::SoftmaxVec ? std::exp(A(i) - lz) : A(i) - lz;
      break;
    }

    case Op::LogSumExpVec: {
      if (A.rank() != 1) shape_fail(n.op, A.shape_str());
      real mx = A.data[0];
      for (real x : A.data) mx = std::max(mx, x);
      real z = 0;
      for (real x : A.data) z += std::exp(x - mx);
      n.val.reset_zeros({1});
      n.val(0) = std::log(z) + mx;
      break;
    }

    case Op::PairwiseDiff: {
      if (A.rank() != 2) shape_fail(n.op, A.shape_str());
      const int k = A.shape[0], d = A.shape[1];
      n.val.reset_zeros({k * k, d});
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
          for (int c = 0; c < d; ++c) n.val(i * k + j, c) = A(i, c) - A(j, c);
      break;
    }

    case Op::Outer: {
      const Tensor& V = nodes_[n.b].val;
      if (A.rank() != 1 || V.rank() != 1) shape_fail(n.op, A.shape_str() + " x " + V.shape_str());
      n.val.reset_zeros({A.shape[0], V.shape[0]});
      for (int i = 0; i < A.shape[0]; ++i)
        for (int j = 0; j < V.shape[0]; ++j) n.val(i, j) = A(i) * V(j);
      break;
    }

    case Op::RowNorms: {
      if (A.rank() != 2) shape_fail(n.op, A.shape_str());
      n.val.reset_zeros({A.shape[0]});
      for (int i = 0; i < A.shape[0]; ++i) {
        real acc = 0;
        for (int j = 0; j < A.shape[1]; ++j) acc += A(i, j) * A(i, j);
        n.val(i) = std::sqrt(acc);
      }
      break;
    }

    case Op::UnitRows: {
      if (A.rank() != 2) shape_fail(n.op, A.shape_str());
      n.val.reset_zeros(A.shape);
      for (int i = 0; i < A.shape[0]; ++i) {
        real acc = 0;
        for (int j = 0; j < A.shape[1]; ++j) acc += A(i, j) * A(i, j);
        const real l = std::sqrt(acc);
        if (l >= n.s0)
          for (int j = 0; j < A.shape[1]; ++j) n.val(i, j) = A(i, j) / l;
      }
      break;
    }

    case Op::LgcnGather: {
      // out[i,c] = Σ_j A[j,i] · P[j·K+i, c] · H[j,c]
      const Tensor& P = nodes_[n.b].val;
      const Tensor& H = nodes_[n.c].val;
      const int k = H.shape[0], d = H.shape[1];
      if (A.rank() != 2 || A.shape[0] != k || A.shape[1] != k || P.rank() != 2 ||
          P.shape[0] != k * k || P.shape[1] != d)
        shape_fail(n.op, A.shape_str() + " " + P.shape_str() + " " + H.shape_str());
      n.val.reset_zeros({k, d});
      for (int j = 0; j < k; ++j)
        for (int i = 0; i < k; ++i) {
          const real a = A(j, i);
          if (a == 0) continue;
          for (int c = 0; c < d; ++c) n.val(i, c) += a * P(j * k + i, c) * H(j, c);
        }
      break;
    }
  }
}

void Tape::backward(Value loss) {
  if (!loss.valid() || loss.tape != this) throw std::logic_error("tape: backward on foreign value");
  const size_t top = static_cast<size_t>(loss.id);
  if (!nodes_[top].val.is_scalar()) throw std::logic_error("tape: backward needs a scalar loss");
  for (size_t i = 0; i <= top; ++i)
    if (nodes_[i].needs_grad) nodes_[i].grad.reset_zeros(nodes_[i].val.shape);
  if (!nodes_[top].needs_grad) return;
  nodes_[top].grad.data[0] = 1;
  for (size_t i = top + 1; i-- > 0;) {
    if (nodes_[i].needs_grad) backward_node(i);
  }
}

void Tape::backward_node(size_t idx) {
  Node& n = nodes_[idx];
  const Tensor& g = n.grad;
  auto ng = [&](int32_t id) { return id >= 0 && nodes_[id].needs_grad; };

  switch (n.op) {
    case Op::Leaf: {
      if (n.sink) {
        if (!n.sink->same_shape(n.val)) n.sink->reset_zeros(n.val.shape);
        for (long i = 0; i < g.numel(); ++i) n.sink->data[i] += g.data[i];
      }
      return;
    }

    case Op::Add:
    case Op::Sub: {
      if (ng(n.a))
        for (long i = 0; i < g.numel(); ++i) grad_of(n.a).data[i] += g.data[i];
      if (ng(n.b)) {
        const real s = n.op == Op::Add ? 1 : -1;
        for (long i = 0; i < g.numel(); ++i) grad_of(n.b).data[i] += s * g.data[i];
      }
      return;
    }

    case Op::Mul: {
      const Tensor& A = nodes_[n.a].val;
      const Tensor& B = nodes_[n.b].val;
      if (ng(n.a))
        for (long i = 0; i < g.numel(); ++i) grad_of(n.a).data[i] += g.data[i] * B.data[i];
      if (ng(n.b))
        for (long i = 0; i < g.numel(); ++i) grad_of(n.b).data[i] += g.data[i] * A.data[i];
      return;
    }

    case Op::Div: {
      const Tensor& A = nodes_[n.a].val;
      const Tensor& B = nodes_[n.b].val;
      if (ng(n.a))
        for (long i = 0; i < g.numel(); ++i) grad_of(n.a).data[i] += g.data[i] / B.data[i];
      if (ng(n.b))
        for (long i = 0; i < g.numel(); ++i)
          grad_of(n.b).data[i] -= g.data[i] * A.data[i] / (B.data[i] * B.data[i]);
      return;
    }

    case Op::SMul: {
      const Tensor& A = nodes_[n.a].val;
      const real s = nodes_[n.b].val.item();
      if (ng(n.a))
        for (long i = 0; i < g.numel(); ++i) grad_of(n.a).data[i] += g.data[i] * s;
      if (ng(n.b)) {
        real acc = 0;
        for (long i = 0; i < g.numel(); ++i) acc += g.data[i] * A.data[i];
        grad_of(n.b).data[0] += acc;
      }
      return;
    }

    case Op::Neg:
    case Op::AddS:
    case Op::MulS:
    case Op::Recip:
    case Op::ClampMin:
    case Op::Tanh:
    case Op::Sigmoid:
    case Op::Softplus:
    case Op::Silu:
    case Op::Exp:
    case Op::Log:
    case Op::Sqrt:
    case Op::Square: {
      if (!ng(n.a)) return;
      const Tensor& A = nodes_[n.a].val;
      Tensor& da = grad_of(n.a);
      for (long i = 0; i < g.numel(); ++i) {
        const real x = A.data[i];
        const real y = n.val.data[i];
        real d = 0;
        switch (n.op) {
          case Op::Neg: d = -1; break;
          case Op::AddS: d = 1; break;
          case Op::MulS: d = n.s0; break;
          case Op::Recip: d = -y * y; break;
          case Op::ClampMin: d = x > n.s0 ? 1 : 0; break;
          case Op::Tanh: d = 1 - y * y; break;
          case Op::Sigmoid: d = y * (1 - y); break;
          case Op::Softplus: d = stable_sigmoid(x); break;
          case Op::Silu: {
            const real s = stable_sigmoid(x);
            d = s * (1 + x * (1 - s));
            break;
          }
          case Op::Exp: d = y; break;
          case Op::Log: d = 1 / x; break;
          case Op::Sqrt: d = real(0.5) / y; break;
          default: d = 2 * x; break;
        }
        da.data[i] += g.data[i] * d;
      }
      return;
    }

    case Op::MatMul: {
      const Tensor& A = nodes_[n.a].val;
      const Tensor& B = nodes_[n.b].val;
      const int m = A.shape[0], k = A.shape[1], p = B.shape[1];
      if (ng(n.a)) {
        Tensor& da = grad_of(n.a);
        for (int i = 0; i < m; ++i)
          for (int l = 0; l < k; ++l) {
            real acc = 0;
            for (int j = 0; j < p; ++j) acc += g(i, j) * B(l, j);
            da(i, l) += acc;
          }
      }
      if (ng(n.b)) {
        Tensor& db = grad_of(n.b);
        for (int l = 0; l < k; ++l)
          for (int i = 0; i < m; ++i) {
            const real a = A(i, l);
            if (a == 0) continue;
            for (int j = 0; j < p; ++j) db(l, j) += a * g(i, j);
          }
      }
      return;
    }

    case Op::MatVec: {
      const Tensor& A = nodes_[n.a].val;
      const Tensor& X = nodes_[n.b].val;
      const int m = A.shape[0], k = A.shape[1];
      if (ng(n.a)) {
        Tensor& da = grad_of(n.a);
        for (int i = 0; i < m; ++i)
          for (int l = 0; l < k; ++l) da(i, l) += g(i) * X(l);
      }
      if (ng(n.b)) {
        Tensor& dx = grad_of(n.b);
        for (int i = 0; i < m; ++i)
          for (int l = 0; l < k; ++l) dx(l) += A(i, l) * g(i);
      }
      return;
    }

    case Op::Transpose: {
      if (!ng(n.a)) return;
      Tensor& da = grad_of(n.a);
      const int r = da.shape[0], c = da.shape[1];
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) da(i, j) += g(j, i);
      return;
    }

    case Op::Reshape: {
      if (!ng(n.a)) return;
      Tensor& da = grad_of(n.a);
      for (long i = 0; i < g.numel(); ++i) da.data[i] += g.data[i];
      return;
    }

    case Op::ConcatVec: {
      const int la = nodes_[n.a].val.shape[0];
      if (ng(n.a))
        for (int i = 0; i < la; ++i) grad_of(n.a)(i) += g(i);
      if (ng(n.b))
        for (int i = la; i < g.shape[0]; ++i) grad_of(n.b)(i - la) += g(i);
      return;
    }

    case Op::ConcatCols: {
      const int r = g.shape[0];
      const int ca = nodes_[n.a].val.shape[1];
      const int cb = nodes_[n.b].val.shape[1];
      if (ng(n.a))
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < ca; ++j) grad_of(n.a)(i, j) += g(i, j);
      if (ng(n.b))
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < cb; ++j) grad_of(n.b)(i, j) += g(i, ca + j);
      return;
    }

    case Op::SliceVec: {
      if (!ng(n.a)) return;
      for (int i = 0; i < n.i1; ++i) grad_of(n.a)(n.i0 + i) += g(i);
      return;
    }

    case Op::RowOf: {
      if (!ng(n.a)) return;
      Tensor& da = grad_of(n.a);
      for (int j = 0; j < g.shape[0]; ++j) da(n.i0, j) += g(j);
      return;
    }

    case Op::StackRows: {
      const int d = g.shape[1];
      for (size_t i = 0; i < n.extra.size(); ++i) {
        if (!ng(n.extra[i])) continue;
        Tensor& dr = grad_of(n.extra[i]);
        for (int j = 0; j < d; ++j) dr(j) += g(static_cast<int>(i), j);
      }
      return;
    }

    case Op::TileRows: {
      if (!ng(n.a)) return;
      Tensor& da = grad_of(n.a);
      for (int i = 0; i < g.shape[0]; ++i)
        for (int j = 0; j < g.shape[1]; ++j) da(j) += g(i, j);
      return;
    }

    case Op::ColSums: {
      if (!ng(n.a)) return;
      Tensor& da = grad_of(n.a);
      for (int i = 0; i < da.shape[0]; ++i)
        for (int j = 0; j < da.shape[1]; ++j) da(i, j) += g(j);
      return;
    }

    case Op::RowSums: {
      if (!ng(n.a)) return;
      Tensor& da = grad_of(n.a);
      for (int i = 0; i < da.shape[0]; ++i)
        for (int j = 0; j < da.shape[1]; ++j) da(i, j) += g(i);
      return;
    }

    case Op::ScaleRows:
    case Op::ScaleCols: {
      const Tensor& A = nodes_[n.a].val;
      const Tensor& V = nodes_[n.b].val;
      const bool rows = n.op == Op::ScaleRows;
      if (ng(n.a)) {
        Tensor& da = grad_of(n.a);
        for (int i = 0; i < A.shape[0]; ++i)
          for (int j = 0; j < A.shape[1]; ++j) da(i, j) += g(i, j) * V(rows ? i : j);
      }
      if (ng(n.b)) {
        Tensor& dv = grad_of(n.b);
        for (int i = 0; i < A.shape[0]; ++i)
          for (int j = 0; j < A.shape[1]; ++j) dv(rows ? i : j) += g(i, j) * A(i, j);
      }
      return;
    }

    case Op::AddRowB: {
      if (ng(n.a)) {
        Tensor& da = grad_of(n.a);
        for (long i = 0; i < g.numel(); ++i) da.data[i] += g.data[i];
      }
      if (ng(n.b)) {
        Tensor& dv = grad_of(n.b);
        for (int i = 0; i < g.shape[0]; ++i)
          for (int j = 0; j < g.shape[1]; ++j) dv(j) += g(i, j);
      }
      return;
    }

    case Op::Lincomb: {
      for (size_t k = 0; k < n.extra.size(); ++k) {
        if (!ng(n.extra[k])) continue;
        Tensor& dx = grad_of(n.extra[k]);
        const real c = n.coef[k];
        for (long i = 0; i < g.numel(); ++i) dx.data[i] += c * g.data[i];
      }
      return;
    }

    case Op::SumAll:
    case Op::MeanAll:
    case Op::SumSq: {
      if (!ng(n.a)) return;
      const Tensor& A = nodes_[n.a].val;
      Tensor& da = grad_of(n.a);
      const real gs = g.item();
      const real inv = n.op == Op::MeanAll ? gs / static_cast<real>(A.numel()) : gs;
      for (long i = 0; i < A.numel(); ++i)
        da.data[i] += n.op == Op::SumSq ? gs * 2 * A.data[i] : inv;
      return;
    }

    case Op::SoftmaxVec: {
      if (!ng(n.a)) return;
      Tensor& da = grad_of(n.a);
      real dot = 0;
      for (int i = 0; i < g.shape[0]; ++i) dot += g(i) * n.val(i);
      for (int i = 0; i < g.shape[0]; ++i) da(i) += n.val(i) * (g(i) - dot);
      return;
    }

    case Op::LogSoftmaxVec: {
      if (!ng(n.a)) return;
      Tensor& da = grad_of(n.a);
      real gsum = 0;
      for (int i = 0; i < g.shape[0]; ++i) gsum += g(i);
      for (int i = 0; i < g.shape[0]; ++i) da(i) += g(i) - std::exp(n.val(i)) * gsum;
      return;
    }

    case Op::LogSumExpVec: {
      if (!ng(n.a)) return;
      const Tensor& A = nodes_[n.a].val;
      Tensor& da = grad_of(n.a);
      const real gs = g.item();
      const real lse = n.val.item();
      for (int i = 0; i < A.shape[0]; ++i) da(i) += gs * std::exp(A(i) - lse);
      return;
    }

    case Op::PairwiseDiff: {
      if (!ng(n.a)) return;
      Tensor& da = grad_of(n.a);
      const int k = da.shape[0], d = da.shape[1];
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
          for (int c = 0; c < d; ++c) {
            const real gv = g(i * k + j, c);
            da(i, c) += gv;
            da(j, c) -= gv;
          }
      return;
    }

    case Op::Outer: {
      const Tensor& U = nodes_[n.a].val;
      const Tensor& V = nodes_[n.b].val;
      if (ng(n.a)) {
        Tensor& du = grad_of(n.a);
        for (int i = 0; i < U.shape[0]; ++i)
          for (int j = 0; j < V.shape[0]; ++j) du(i) += g(i, j) * V(j);
      }
      if (ng(n.b)) {
        Tensor& dv = grad_of(n.b);
        for (int i = 0; i < U.shape[0]; ++i)
          for (int j = 0; j < V.shape[0]; ++j) dv(j) += g(i, j) * U(i);
      }
      return;
    }

    case Op::RowNorms: {
      if (!ng(n.a)) return;
      const Tensor& A = nodes_[n.a].val;
      Tensor& da = grad_of(n.a);
      for (int i = 0; i < A.shape[0]; ++i) {
        const real l = n.val(i);
        if (l <= 0) continue;
        for (int j = 0; j < A.shape[1]; ++j) da(i, j) += g(i) * A(i, j) / l;
      }
      return;
    }

    case Op::UnitRows: {
      if (!ng(n.a)) return;
      const Tensor& A = nodes_[n.a].val;
      Tensor& da = grad_of(n.a);
      for (int i = 0; i < A.shape[0]; ++i) {
        real acc = 0;
        for (int j = 0; j < A.shape[1]; ++j) acc += A(i, j) * A(i, j);
        const real l = std::sqrt(acc);
        if (l < n.s0) continue;
        real gu = 0;
        for (int j = 0; j < A.shape[1]; ++j) gu += g(i, j) * n.val(i, j);
        for (int j = 0; j < A.shape[1]; ++j) da(i, j) += (g(i, j) - gu * n.val(i, j)) / l;
      }
      return;
    }

    case Op::LgcnGather: {
      const Tensor& A = nodes_[n.a].val;
      const Tensor& P = nodes_[n.b].val;
      const Tensor& H = nodes_[n.c].val;
      const int k = H.shape[0], d = H.shape[1];
      for (int j = 0; j < k; ++j)
        for (int i = 0; i < k; ++i) {
          const real a = A(j, i);
          const int pr = j * k + i;
          if (ng(n.a)) {
            real acc = 0;
            for (int c = 0; c < d; ++c) acc += g(i, c) * P(pr, c) * H(j, c);
            grad_of(n.a)(j, i) += acc;
          }
          if (a == 0) continue;
          for (int c = 0; c < d; ++c) {
            const real gv = g(i, c);
            if (ng(n.b)) grad_of(n.b)(pr, c) += gv * a * H(j, c);
            if (ng(n.c)) grad_of(n.c)(j, c) += gv * a * P(pr, c);
          }
        }
      return;
    }
  }
}

real Tape::checked_loss(Value loss) const {
  const real v = scalar(loss);
  if (std::isfinite(v)) return v;
  for (size_t i = 0; i < size_; ++i) {
    if (!nodes_[i].val.all_finite())
      throw NumericError("non-finite loss: first non-finite node is #" + std::to_string(i) +
                         " (" + op_name(nodes_[i].op) + ", shape " + nodes_[i].val.shape_str() +
                         ")");
  }
  throw NumericError("non-finite loss (no non-finite intermediate found)");
}

// ---- free functions ----

Value add(Value a, Value b) { return a.tape->emit2(Op::Add, a, b); }
Value sub(Value a, Value b) { return a.tape->emit2(Op::Sub, a, b); }
Value mul(Value a, Value b) { return a.tape->emit2(Op::Mul, a, b); }
Value vdiv(Value a, Value b) { return a.tape->emit2(Op::Div, a, b); }
Value neg(Value a) { return a.tape->emit1(Op::Neg, a); }
Value add_scalar(Value a, real c) { return a.tape->emit_scalar_attr(Op::AddS, a, c); }
Value mul_scalar(Value a, real c) { return a.tape->emit_scalar_attr(Op::MulS, a, c); }
Value smul(Value a, Value s) { return a.tape->emit2(Op::SMul, a, s); }
Value recip(Value a) { return a.tape->emit1(Op::Recip, a); }
Value clamp_min(Value a, real c) { return a.tape->emit_scalar_attr(Op::ClampMin, a, c); }
Value tanh(Value a) { return a.tape->emit1(Op::Tanh, a); }
Value sigmoid(Value a) { return a.tape->emit1(Op::Sigmoid, a); }
Value softplus(Value a) { return a.tape->emit1(Op::Softplus, a); }
Value silu(Value a) { return a.tape->emit1(Op::Silu, a); }
Value exp(Value a) { return a.tape->emit1(Op::Exp, a); }
Value log(Value a) { return a.tape->emit1(Op::Log, a); }
Value sqrt(Value a) { return a.tape->emit1(Op::Sqrt, a); }
Value square(Value a) { return a.tape->emit1(Op::Square, a); }
Value matmul(Value a, Value b) { return a.tape->emit2(Op::MatMul, a, b); }
Value matvec(Value a, Value x) { return a.tape->emit2(Op::MatVec, a, x); }
Value transpose(Value a) { return a.tape->emit1(Op::Transpose, a); }
Value reshape(Value a, int r, int c) { return a.tape->emit_int_attr(Op::Reshape, a, r, c); }
Value concat_vec(Value a, Value b) { return a.tape->emit2(Op::ConcatVec, a, b); }
Value concat_cols(Value a, Value b) { return a.tape->emit2(Op::ConcatCols, a, b); }
Value slice_vec(Value a, int off, int len) {
  return a.tape->emit_int_attr(Op::SliceVec, a, off, len);
}
Value row_of(Value m, int i) { return m.tape->emit_int_attr(Op::RowOf, m, i); }
Value stack_rows(const std::vector<Value>& rows) {
  return rows.front().tape->emit_many(Op::StackRows, rows);
}
Value tile_rows(Value v, int n) { return v.tape->emit_int_attr(Op::TileRows, v, n); }
Value col_sums(Value m) { return m.tape->emit1(Op::ColSums, m); }
Value row_sums(Value m) { return m.tape->emit1(Op::RowSums, m); }
Value scale_rows(Value m, Value v) { return m.tape->emit2(Op::ScaleRows, m, v); }
Value scale_cols(Value m, Value v) { return m.tape->emit2(Op::ScaleCols, m, v); }
Value add_row_broadcast(Value m, Value v) { return m.tape->emit2(Op::AddRowB, m, v); }
Value lincomb(const std::vector<Value>& xs, const std::vector<real>& coef) {
  return xs.front().tape->emit_many(Op::Lincomb, xs, coef);
}
Value sum_all(Value a) { return a.tape->emit1(Op::SumAll, a); }
Value mean_all(Value a) { return a.tape->emit1(Op::MeanAll, a); }
Value sum_sq(Value a) { return a.tape->emit1(Op::SumSq, a); }
Value softmax_vec(Value a) { return a.tape->emit1(Op::SoftmaxVec, a); }
Value log_softmax_vec(Value a) { return a.tape->emit1(Op::LogSoftmaxVec, a); }
Value logsumexp_vec(Value a) { return a.tape->emit1(Op::LogSumExpVec, a); }
Value pairwise_diff(Value coords) { return coords.tape->emit1(Op::PairwiseDiff, coords); }
Value outer(Value u, Value v) { return u.tape->emit2(Op::Outer, u, v); }
Value row_norms(Value m) { return m.tape->emit1(Op::RowNorms, m); }
Value unit_rows(Value m, real eps) { return m.tape->emit_scalar_attr(Op::UnitRows, m, eps); }
Value lgcn_gather(Value a_norm, Value p, Value h) {
  return a_norm.tape->emit3(Op::LgcnGather, a_norm, p, h);
}

}  // namespace gstpp::ad
