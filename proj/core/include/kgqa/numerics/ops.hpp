#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kgqa/numerics/tape.hpp"

// Differentiable primitives. Every function records one node on the tape of
// its first operand and throws DimensionError on non-conforming shapes and
// NumericError if the forward value is not finite.
namespace kgqa::nn {

inline constexpr double kLeakySlope = 0.01;

// Elementwise, same shape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
/// Elementwise max; on ties the gradient goes to `a`.
Var maximum(Var a, Var b);

Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var one_minus(Var a);

// Row broadcast: a is n x d, row is 1 x d.
Var add_row(Var a, Var row);
Var sub_row(Var a, Var row);
/// a is n x d, w is n x 1: out(i, j) = a(i, j) * w(i).
Var scale_rows(Var a, Var w);

/// a (n x k) * b (k x m).
Var matmul(Var a, Var b);
/// x (n x in) * w^T where w is (out x in); the usual dense layer product.
Var linear(Var x, Var w);

Var tanh(Var a);
Var sigmoid(Var a);
Var leaky_relu(Var a, double slope = kLeakySlope);
Var exp(Var a);
/// max(a, 0), the hinge used by the ranking and triplet losses.
Var relu(Var a);

Var concat_cols(Var a, Var b);
Var concat_rows(Var a, Var b);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var gather_rows(Var a, std::span<const std::uint32_t> rows);
/// Row i of the result is a's row i where mask[i] is set, else b's row i.
Var where_rows(const std::vector<bool>& mask, Var a, Var b);

Var sum(Var a);
Var mean(Var a);
/// Largest element; gradient flows to the first maximiser.
Var max_all(Var a);

/// Euclidean norm of each row, n x 1. The subgradient at a zero row is zero.
Var row_norm(Var a);
/// Euclidean norm of a whole 1 x d vector.
Var norm(Var a);
/// Inner product of two 1 x d rows, 1 x 1.
Var dot(Var a, Var b);
/// Cosine similarity of two 1 x d rows.
Var cosine(Var a, Var b);
/// Cosine similarity of every row of a (n x d) with b (1 x d), n x 1.
Var cosine_rows(Var a, Var b);

/// Softmax of an M x 1 score column within each segment, with the segment
/// maximum subtracted before exponentiation.
Var segment_softmax(Var scores, std::span<const std::uint32_t> segment, std::size_t segments);
/// out(s, :) = sum of rows i with segment[i] == s.
Var segment_sum(Var a, std::span<const std::uint32_t> segment, std::size_t segments);

}  // namespace kgqa::nn
