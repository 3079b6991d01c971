// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gdistill/random.hpp"
#include "gdistill/tape.hpp"

#include <vector>

namespace gdistill {

// Primitive tensor ops. Each records itself on the owning tape when a
// gradient path exists, with an analytic backward closure.

Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b); // elementwise; a == b gives d(x^2) = 2x
Value square(Value a);
Value scale(Value a, real c);
Value add_rowvec(Value x, Value bias); // x: [n x c], bias: [1 x c]

Value matmul(Value a, Value b);
Value relu(Value x);

/// Inverted dropout: training zeroes entries with probability p and scales
/// survivors by 1/(1-p); inference is the identity. Requires 0 <= p < 1.
Value dropout(Value x, real p, bool training, RandomStream& rng);

/// Scaled dropout mask (entries 0 or 1/(1-p)) for an explicit-mask pass.
Tensor make_dropout_mask(const std::vector<int64_t>& shape, real p, RandomStream& rng);
/// Dropout with an externally supplied scaled mask.
Value dropout_with_mask(Value x, Tensor scaled_mask);

/// Rows copied in the given order; backward scatter-adds to source rows.
Value gather_rows(Value x, const std::vector<int>& idx);

/// Per-row column pick: out[r] = x[r, idx[r]], shape [n x 1].
Value gather_cols(Value x, const std::vector<int>& idx);

/// Row-wise softmax of x / temperature, max-subtracted for stability.
Value row_softmax(Value x, real temperature);
Value log_row_softmax(Value x, real temperature);

Value row_sum(Value x); // [n x c] -> [n x 1]
Value sum_all(Value x); // -> [1]
Value mean_all(Value x); // -> [1]

/// a*x + b*y for scalars or same-shape tensors (loss combination helper).
Value axpby(real a, Value x, real b, Value y);

// Tape-free kernels shared by forward, backward, and inference paths.
// C (m x n) += or = A (m x k) * B (k x n), row-major.
void mm_nn(const real* a, const real* b, real* c, int64_t m, int64_t k, int64_t n,
           bool accumulate);
// C (k x n) += A^T (k x m view of m x k) * B (m x n)
void mm_tn(const real* a, const real* b, real* c, int64_t m, int64_t k, int64_t n);
// C (m x k) += A (m x n) * B^T (n x k view of k x n)
void mm_nt(const real* a, const real* b, real* c, int64_t m, int64_t n, int64_t k);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor row_softmax(const Tensor& x, real temperature);
Tensor add_rowvec(const Tensor& x, const Tensor& bias);

/// argmax per row; ties resolved to the lowest class index.
std::vector<int> row_argmax(const Tensor& x);

} // namespace gdistill
