// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gdistill/error.hpp"

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace gdistill {

// Numeric width. 64-bit by default; -DGDISTILL_REAL32 switches the whole
// library to 32-bit as a speed mode (gradient checks require the default).
#ifdef GDISTILL_REAL32
using real = float;
#else
using real = double;
#endif

/// Dense row-major tensor. Rank 1 or 2 in practice; shape is general.
/// Immutable by convention once handed to the tape.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> shape);
    Tensor(std::vector<int64_t> shape, std::vector<real> values);

    static Tensor scalar(real v) { return Tensor({1}, {v}); }
    static Tensor zeros(int64_t rows, int64_t cols) { return Tensor({rows, cols}); }
    static Tensor full(std::vector<int64_t> shape, real v);
    /// Rank-2 tensor from nested braces, e.g. {{1,2},{3,4}}.
    static Tensor from_rows(std::initializer_list<std::initializer_list<real>> rows);

    const std::vector<int64_t>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }

    bool is_scalar() const { return size() == 1; }
    /// Rank-2 accessors; throw on other ranks.
    int64_t rows() const;
    int64_t cols() const;

    real& at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * cols() + c)]; }
    real at(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * cols() + c)]; }
    real& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    real operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    real* data() { return data_.data(); }
    const real* data() const { return data_.data(); }
    std::vector<real>& values() { return data_; }
    const std::vector<real>& values() const { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    /// Scalar value of a size-1 tensor.
    real item() const;

private:
    std::vector<int64_t> shape_;
    std::vector<real> data_;
};

int64_t shape_product(const std::vector<int64_t>& shape);

} // namespace gdistill
