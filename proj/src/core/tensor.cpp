// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "mepg/core/error.hpp"

namespace mepg {

std::size_t shape_product(const Shape& shape) noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : m_shape(std::move(shape)), m_data(shape_product(m_shape), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : m_shape(std::move(shape)), m_data(std::move(data)) {
    if (m_data.size() != shape_product(m_shape)) {
        raise(ErrorCode::ShapeMismatch, "data length " + std::to_string(m_data.size()) +
                                            " does not match shape " + shape_to_string(m_shape));
    }
}

void Tensor::fill(double value) noexcept { std::fill(m_data.begin(), m_data.end(), value); }

void Tensor::check_finite(std::string_view where) const {
    for (double v : m_data) {
        if (!std::isfinite(v)) raise(ErrorCode::NonFiniteActivation, std::string(where));
    }
}

void Tensor::require_shape(const Shape& expected, std::string_view where) const {
    if (m_shape != expected) {
        raise(ErrorCode::ShapeMismatch, std::string(where) + ": expected " + shape_to_string(expected) +
                                            ", got " + shape_to_string(m_shape));
    }
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    a.require_shape(b.shape(), "max_abs_diff");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

bool bit_equal(const Tensor& a, const Tensor& b) noexcept {
    return a.shape() == b.shape() &&
           std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace mepg
