// SPDX-License-Identifier: Apache-2.0

#include "gdistill/tensor.hpp"

#include <cmath>
#include <string>

namespace gdistill {

int64_t shape_product(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) throw DimensionError("negative dimension in shape");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<int64_t> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_product(shape_)), real(0)) {}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<real> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (shape_product(shape_) != static_cast<int64_t>(data_.size())) {
        throw DimensionError("tensor value count does not match shape product");
    }
}

Tensor Tensor::full(std::vector<int64_t> shape, real v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<real>> rows) {
    int64_t r = static_cast<int64_t>(rows.size());
    int64_t c = r > 0 ? static_cast<int64_t>(rows.begin()->size()) : 0;
    std::vector<real> values;
    values.reserve(static_cast<size_t>(r * c));
    for (const auto& row : rows) {
        if (static_cast<int64_t>(row.size()) != c) {
            throw DimensionError("ragged rows in tensor literal");
        }
        values.insert(values.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(values));
}

int64_t Tensor::rows() const {
    if (rank() != 2) throw DimensionError("rows(): tensor rank is " + std::to_string(rank()));
    return shape_[0];
}

int64_t Tensor::cols() const {
    if (rank() != 2) throw DimensionError("cols(): tensor rank is " + std::to_string(rank()));
    return shape_[1];
}

bool Tensor::all_finite() const {
    for (real v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

real Tensor::item() const {
    if (size() != 1) throw DimensionError("item(): tensor is not a scalar");
    return data_[0];
}

} // namespace gdistill
