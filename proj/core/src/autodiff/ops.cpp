#include "evuq/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

namespace evuq::ad {
namespace {

using MatrixR =
    Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatrixR>;
using ConstMapR = Eigen::Map<const MatrixR>;

constexpr Real kNormEpsilon = Real(1e-12);

ConstMapR view(const Tensor& t) {
  return ConstMapR(t.raw(), static_cast<Eigen::Index>(t.rows()),
                   static_cast<Eigen::Index>(t.cols()));
}

Tape& same_tape(Var a, Var b) {
  Tape& t = a.tape();
  if (&b.tape() != &t) throw ContractError("operands belong to different tapes");
  return t;
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) +
                   " and " + to_string(b));
}

void require_matrix(const char* op, const Tensor& t) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " +
                     to_string(t.shape()));
  }
}

// True when b is a [1 x m] row broadcast over the rows of a.
bool check_binary(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return false;
  if (a.rank() == 2 && b.rank() == 2 && b.rows() == 1 && b.cols() == a.cols()) {
    return true;
  }
  shape_error(op, a.shape(), b.shape());
}

template <typename F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  const Real* src = a.raw();
  Real* dst = out.raw();
  for (std::size_t i = 0, n = a.size(); i < n; ++i) dst[i] = f(src[i]);
  return out;
}

template <typename F>
Tensor map_binary(const Tensor& a, const Tensor& b, bool broadcast, F f) {
  Tensor out(a.shape());
  const std::size_t cols = a.cols();
  const Real* pa = a.raw();
  const Real* pb = b.raw();
  Real* dst = out.raw();
  if (!broadcast) {
    for (std::size_t i = 0, n = a.size(); i < n; ++i) dst[i] = f(pa[i], pb[i]);
  } else {
    for (std::size_t r = 0, rows = a.rows(); r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        dst[r * cols + c] = f(pa[r * cols + c], pb[c]);
      }
    }
  }
  return out;
}

Var unary(OpKind op, Var a, Tensor value, NodeAttr attr = {},
          bool differentiable = true) {
  return a.tape().record(op, std::move(value), {a}, attr, differentiable);
}

// Sum of a full-shape gradient back down to the operand's shape.
Var reduce_to(Var g, bool broadcast) { return broadcast ? col_sum(g) : g; }

Var zeros_like_rows(Tape& tape, std::size_t rows, std::size_t cols) {
  return tape.constant(Tensor::zeros(rows, cols));
}

}  // namespace

Var matmul(Var a, Var b, bool trans_a, bool trans_b) {
  Tape& tape = same_tape(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  require_matrix("matmul", ta);
  require_matrix("matmul", tb);
  const std::size_t m = trans_a ? ta.cols() : ta.rows();
  const std::size_t k = trans_a ? ta.rows() : ta.cols();
  const std::size_t k2 = trans_b ? tb.cols() : tb.rows();
  const std::size_t n = trans_b ? tb.rows() : tb.cols();
  if (k != k2) shape_error("matmul", ta.shape(), tb.shape());
  Tensor out(Shape{m, n});
  MapR dst(out.raw(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  const auto va = view(ta);
  const auto vb = view(tb);
  if (!trans_a && !trans_b) {
    dst.noalias() = va * vb;
  } else if (trans_a && !trans_b) {
    dst.noalias() = va.transpose() * vb;
  } else if (!trans_a && trans_b) {
    dst.noalias() = va * vb.transpose();
  } else {
    dst.noalias() = va.transpose() * vb.transpose();
  }
  NodeAttr attr;
  attr.trans_a = trans_a;
  attr.trans_b = trans_b;
  return tape.record(OpKind::kMatMul, std::move(out), {a, b}, attr);
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const bool bc = check_binary("add", a.value(), b.value());
  return tape.record(OpKind::kAdd,
                     map_binary(a.value(), b.value(), bc,
                                [](Real x, Real y) { return x + y; }),
                     {a, b});
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const bool bc = check_binary("sub", a.value(), b.value());
  return tape.record(OpKind::kSub,
                     map_binary(a.value(), b.value(), bc,
                                [](Real x, Real y) { return x - y; }),
                     {a, b});
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const bool bc = check_binary("mul", a.value(), b.value());
  return tape.record(OpKind::kMul,
                     map_binary(a.value(), b.value(), bc,
                                [](Real x, Real y) { return x * y; }),
                     {a, b});
}

Var div(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const bool bc = check_binary("div", a.value(), b.value());
  return tape.record(OpKind::kDiv,
                     map_binary(a.value(), b.value(), bc,
                                [](Real x, Real y) { return x / y; }),
                     {a, b});
}

Var neg(Var a) {
  return unary(OpKind::kNeg, a, map_unary(a.value(), [](Real x) { return -x; }));
}

Var scale(Var a, double c) {
  const Real rc = static_cast<Real>(c);
  NodeAttr attr;
  attr.scalar = c;
  return unary(OpKind::kScale, a,
               map_unary(a.value(), [rc](Real x) { return x * rc; }), attr);
}

Var add_scalar(Var a, double c) {
  const Real rc = static_cast<Real>(c);
  NodeAttr attr;
  attr.scalar = c;
  return unary(OpKind::kAddScalar, a,
               map_unary(a.value(), [rc](Real x) { return x + rc; }), attr);
}

Var relu(Var a) {
  return unary(OpKind::kRelu, a, map_unary(a.value(), [](Real x) {
                 return x > Real{0} ? x : Real{0};
               }));
}

Var relu_mask(Var a) {
  return unary(OpKind::kReluMask, a,
               map_unary(a.value(),
                         [](Real x) { return x > Real{0} ? Real{1} : Real{0}; }),
               {}, /*differentiable=*/false);
}

Var sign(Var a) {
  return unary(OpKind::kSign, a,
               map_unary(a.value(),
                         [](Real x) {
                           return x > Real{0} ? Real{1}
                                              : (x < Real{0} ? Real{-1} : Real{0});
                         }),
               {}, /*differentiable=*/false);
}

Var sigmoid(Var a) {
  return unary(OpKind::kSigmoid, a, map_unary(a.value(), [](Real x) {
                 if (x >= Real{0}) return Real{1} / (Real{1} + std::exp(-x));
                 const Real e = std::exp(x);
                 return e / (Real{1} + e);
               }));
}

Var softplus(Var a) {
  return unary(OpKind::kSoftplus, a, map_unary(a.value(), [](Real x) {
                 // log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
                 return std::max(x, Real{0}) + std::log1p(std::exp(-std::abs(x)));
               }));
}

Var exp(Var a) {
  return unary(OpKind::kExp, a,
               map_unary(a.value(), [](Real x) { return std::exp(x); }));
}

Var log(Var a) {
  return unary(OpKind::kLog, a,
               map_unary(a.value(), [](Real x) { return std::log(x); }));
}

Var square(Var a) {
  return unary(OpKind::kSquare, a,
               map_unary(a.value(), [](Real x) { return x * x; }));
}

Var sqrt(Var a) {
  return unary(OpKind::kSqrt, a,
               map_unary(a.value(), [](Real x) { return std::sqrt(x); }));
}

Var sum(Var a) {
  Real total = 0;
  for (Real v : a.value().data()) total += v;
  return unary(OpKind::kSum, a, Tensor::scalar(total));
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of an empty tensor");
  Real total = 0;
  for (Real v : a.value().data()) total += v;
  return unary(OpKind::kMean, a, Tensor::scalar(total / static_cast<Real>(n)));
}

Var row_sum(Var a) {
  const Tensor& t = a.value();
  require_matrix("row_sum", t);
  Tensor out(Shape{t.rows(), 1});
  for (std::size_t r = 0; r < t.rows(); ++r) {
    Real s = 0;
    for (std::size_t c = 0; c < t.cols(); ++c) s += t.at(r, c);
    out[r] = s;
  }
  return unary(OpKind::kRowSum, a, std::move(out));
}

Var col_sum(Var a) {
  const Tensor& t = a.value();
  require_matrix("col_sum", t);
  Tensor out(Shape{1, t.cols()});
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) out[c] += t.at(r, c);
  }
  return unary(OpKind::kColSum, a, std::move(out));
}

Var expand_scalar(Var a, std::size_t rows, std::size_t cols) {
  if (a.value().size() != 1) {
    throw ShapeError("expand_scalar: operand of shape " + to_string(a.shape()));
  }
  NodeAttr attr;
  attr.begin = rows;
  attr.end = cols;
  return unary(OpKind::kExpandScalar, a,
               Tensor::full(rows, cols, a.value().item()), attr);
}

Var expand_rows(Var a, std::size_t n) {
  const Tensor& t = a.value();
  require_matrix("expand_rows", t);
  if (t.rows() != 1) throw ShapeError("expand_rows: operand must be [1 x m]");
  Tensor out(Shape{n, t.cols()});
  for (std::size_t r = 0; r < n; ++r) {
    std::copy(t.raw(), t.raw() + t.cols(), out.raw() + r * t.cols());
  }
  NodeAttr attr;
  attr.begin = n;
  return unary(OpKind::kExpandRows, a, std::move(out), attr);
}

Var expand_cols(Var a, std::size_t m) {
  const Tensor& t = a.value();
  require_matrix("expand_cols", t);
  if (t.cols() != 1) throw ShapeError("expand_cols: operand must be [n x 1]");
  Tensor out(Shape{t.rows(), m});
  for (std::size_t r = 0; r < t.rows(); ++r) {
    std::fill(out.raw() + r * m, out.raw() + (r + 1) * m, t[r]);
  }
  NodeAttr attr;
  attr.begin = m;
  return unary(OpKind::kExpandCols, a, std::move(out), attr);
}

Var concat_rows(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  require_matrix("concat_rows", ta);
  require_matrix("concat_rows", tb);
  if (ta.cols() != tb.cols()) shape_error("concat_rows", ta.shape(), tb.shape());
  std::vector<Real> data(ta.data().begin(), ta.data().end());
  data.insert(data.end(), tb.data().begin(), tb.data().end());
  return tape.record(OpKind::kConcatRows,
                     Tensor(Shape{ta.rows() + tb.rows(), ta.cols()}, std::move(data)),
                     {a, b});
}

Var concat_cols(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  require_matrix("concat_cols", ta);
  require_matrix("concat_cols", tb);
  if (ta.rows() != tb.rows()) shape_error("concat_cols", ta.shape(), tb.shape());
  const std::size_t cols = ta.cols() + tb.cols();
  Tensor out(Shape{ta.rows(), cols});
  for (std::size_t r = 0; r < ta.rows(); ++r) {
    std::copy(ta.raw() + r * ta.cols(), ta.raw() + (r + 1) * ta.cols(),
              out.raw() + r * cols);
    std::copy(tb.raw() + r * tb.cols(), tb.raw() + (r + 1) * tb.cols(),
              out.raw() + r * cols + ta.cols());
  }
  return tape.record(OpKind::kConcatCols, std::move(out), {a, b});
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& t = a.value();
  require_matrix("slice_rows", t);
  if (begin >= end || end > t.rows()) throw ShapeError("slice_rows: bad range");
  NodeAttr attr;
  attr.begin = begin;
  attr.end = end;
  return unary(OpKind::kSliceRows, a, t.rows_slice(begin, end), attr);
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& t = a.value();
  require_matrix("slice_cols", t);
  if (begin >= end || end > t.cols()) throw ShapeError("slice_cols: bad range");
  const std::size_t w = end - begin;
  Tensor out(Shape{t.rows(), w});
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < w; ++c) out.at(r, c) = t.at(r, begin + c);
  }
  NodeAttr attr;
  attr.begin = begin;
  attr.end = end;
  return unary(OpKind::kSliceCols, a, std::move(out), attr);
}

Var transpose(Var a) {
  const Tensor& t = a.value();
  require_matrix("transpose", t);
  Tensor out(Shape{t.cols(), t.rows()});
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) out.at(c, r) = t.at(r, c);
  }
  return unary(OpKind::kTranspose, a, std::move(out));
}

Var l2_norm_rows(Var a) {
  const Tensor& t = a.value();
  require_matrix("l2_norm_rows", t);
  Tensor out(Shape{t.rows(), 1});
  for (std::size_t r = 0; r < t.rows(); ++r) {
    Real s = kNormEpsilon;
    for (std::size_t c = 0; c < t.cols(); ++c) s += t.at(r, c) * t.at(r, c);
    out[r] = std::sqrt(s);
  }
  return unary(OpKind::kL2NormRows, a, std::move(out));
}

Var logsumexp_rows(Var a) {
  const Tensor& t = a.value();
  require_matrix("logsumexp_rows", t);
  Tensor out(Shape{t.rows(), 1});
  for (std::size_t r = 0; r < t.rows(); ++r) {
    Real hi = t.at(r, 0);
    for (std::size_t c = 1; c < t.cols(); ++c) hi = std::max(hi, t.at(r, c));
    Real s = 0;
    for (std::size_t c = 0; c < t.cols(); ++c) s += std::exp(t.at(r, c) - hi);
    out[r] = hi + std::log(s);
  }
  return unary(OpKind::kLogSumExpRows, a, std::move(out));
}

std::array<std::optional<Var>, 2> adjoint(Tape& tape, std::size_t node_id,
                                          Var g, std::array<bool, 2> need) {
  const Node& node = tape.node(node_id);
  const OpKind op = node.op;
  const NodeAttr attr = node.attr;
  const auto in0 = node.inputs[0];
  const auto in1 = node.inputs[1];
  Var out = tape.handle(node_id);
  Var a = in0 ? tape.handle(*in0) : Var{};
  Var b = in1 ? tape.handle(*in1) : Var{};
  std::array<std::optional<Var>, 2> r;

  switch (op) {
    case OpKind::kLeaf:
      return r;
    case OpKind::kMatMul: {
      const bool ta = attr.trans_a;
      const bool tb = attr.trans_b;
      if (need[0]) {
        r[0] = ta ? matmul(b, g, tb, true) : matmul(g, b, false, !tb);
      }
      if (need[1]) {
        r[1] = tb ? matmul(g, a, true, ta) : matmul(a, g, !ta, false);
      }
      return r;
    }
    case OpKind::kAdd:
    case OpKind::kSub: {
      const bool bc = !a.value().same_shape(b.value());
      if (need[0]) r[0] = g;
      if (need[1]) {
        Var gb = reduce_to(g, bc);
        r[1] = op == OpKind::kAdd ? gb : neg(gb);
      }
      return r;
    }
    case OpKind::kMul: {
      const bool bc = !a.value().same_shape(b.value());
      if (need[0]) r[0] = mul(g, b);
      if (need[1]) r[1] = reduce_to(mul(g, a), bc);
      return r;
    }
    case OpKind::kDiv: {
      const bool bc = !a.value().same_shape(b.value());
      if (need[0]) r[0] = div(g, b);
      if (need[1]) {
        r[1] = reduce_to(neg(div(mul(g, a), square(b))), bc);
      }
      return r;
    }
    case OpKind::kNeg:
      r[0] = neg(g);
      return r;
    case OpKind::kScale:
      r[0] = scale(g, attr.scalar);
      return r;
    case OpKind::kAddScalar:
      r[0] = g;
      return r;
    case OpKind::kRelu:
      r[0] = mul(g, relu_mask(a));
      return r;
    case OpKind::kSigmoid:
      r[0] = mul(g, mul(out, add_scalar(neg(out), 1.0)));
      return r;
    case OpKind::kSoftplus:
      r[0] = mul(g, sigmoid(a));
      return r;
    case OpKind::kExp:
      r[0] = mul(g, out);
      return r;
    case OpKind::kLog:
      r[0] = div(g, a);
      return r;
    case OpKind::kSquare:
      r[0] = mul(g, scale(a, 2.0));
      return r;
    case OpKind::kSqrt:
      r[0] = div(g, scale(out, 2.0));
      return r;
    case OpKind::kSum:
    case OpKind::kMean: {
      const Tensor& t = a.value();
      Var gs = op == OpKind::kMean
                   ? scale(g, 1.0 / static_cast<double>(t.size()))
                   : g;
      if (t.rank() == 0) {
        r[0] = gs;
        return r;
      }
      if (t.rank() != 2) break;
      r[0] = expand_scalar(gs, t.rows(), t.cols());
      return r;
    }
    case OpKind::kRowSum:
      r[0] = expand_cols(g, a.value().cols());
      return r;
    case OpKind::kColSum:
      r[0] = expand_rows(g, a.value().rows());
      return r;
    case OpKind::kExpandScalar:
      r[0] = sum(g);
      return r;
    case OpKind::kExpandRows:
      r[0] = col_sum(g);
      return r;
    case OpKind::kExpandCols:
      r[0] = row_sum(g);
      return r;
    case OpKind::kConcatRows: {
      const std::size_t na = a.value().rows();
      const std::size_t nb = b.value().rows();
      if (need[0]) r[0] = slice_rows(g, 0, na);
      if (need[1]) r[1] = slice_rows(g, na, na + nb);
      return r;
    }
    case OpKind::kConcatCols: {
      const std::size_t na = a.value().cols();
      const std::size_t nb = b.value().cols();
      if (need[0]) r[0] = slice_cols(g, 0, na);
      if (need[1]) r[1] = slice_cols(g, na, na + nb);
      return r;
    }
    case OpKind::kSliceRows: {
      const std::size_t rows = a.value().rows();
      const std::size_t cols = a.value().cols();
      Var padded = g;
      if (attr.begin > 0) {
        padded = concat_rows(zeros_like_rows(tape, attr.begin, cols), padded);
      }
      if (attr.end < rows) {
        padded = concat_rows(padded, zeros_like_rows(tape, rows - attr.end, cols));
      }
      r[0] = padded;
      return r;
    }
    case OpKind::kSliceCols: {
      const std::size_t rows = a.value().rows();
      const std::size_t cols = a.value().cols();
      Var padded = g;
      if (attr.begin > 0) {
        padded = concat_cols(zeros_like_rows(tape, rows, attr.begin), padded);
      }
      if (attr.end < cols) {
        padded = concat_cols(padded, zeros_like_rows(tape, rows, cols - attr.end));
      }
      r[0] = padded;
      return r;
    }
    case OpKind::kTranspose:
      r[0] = transpose(g);
      return r;
    case OpKind::kL2NormRows:
      r[0] = mul(a, expand_cols(div(g, out), a.value().cols()));
      return r;
    case OpKind::kLogSumExpRows: {
      const std::size_t m = a.value().cols();
      r[0] = mul(expand_cols(g, m), exp(sub(a, expand_cols(out, m))));
      return r;
    }
    case OpKind::kReluMask:
    case OpKind::kSign:
      // Piecewise-constant outputs never require grad, so reaching here
      // means the graph was built inconsistently.
      break;
  }
  throw ContractError(std::string("no adjoint rule for ") + op_name(op) +
                      " with operand shape " +
                      (a.valid() ? to_string(a.shape()) : std::string("?")));
}

}  // namespace evuq::ad
