// Differentiable primitives. Shapes are checked before any arithmetic and
// mismatches raise ShapeError. The only implicit broadcast is a [1 x m]
// right operand expanded over the rows (batch) of a [n x m] left operand.
#pragma once

#include <array>
#include <optional>

#include "evuq/autodiff/tape.hpp"

namespace evuq::ad {

/// op(a) * op(b) where op transposes when the flag is set.
Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);

Var relu(Var a);
/// 1 where a > 0 else 0. Carries no gradient.
Var relu_mask(Var a);
/// Elementwise sign in {-1, 0, 1}. Carries no gradient.
Var sign(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var sqrt(Var a);

/// Sum / mean of every element, as a rank-0 scalar.
Var sum(Var a);
Var mean(Var a);
/// [n x m] -> [n x 1].
Var row_sum(Var a);
/// [n x m] -> [1 x m].
Var col_sum(Var a);
/// Scalar -> [rows x cols].
Var expand_scalar(Var a, std::size_t rows, std::size_t cols);
/// [1 x m] -> [n x m].
Var expand_rows(Var a, std::size_t n);
/// [n x 1] -> [n x m].
Var expand_cols(Var a, std::size_t m);

Var concat_rows(Var a, Var b);
Var concat_cols(Var a, Var b);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var transpose(Var a);

/// Per-row Euclidean norm sqrt(sum x^2 + 1e-12), [n x m] -> [n x 1].
Var l2_norm_rows(Var a);
/// Per-row log-sum-exp, [n x m] -> [n x 1].
Var logsumexp_rows(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }

/// Adjoint rule for one node: gradients for each input given the output
/// gradient. Entries are empty where `need` is false.
std::array<std::optional<Var>, 2> adjoint(Tape& tape, std::size_t node_id,
                                          Var grad,
                                          std::array<bool, 2> need);

}  // namespace evuq::ad
