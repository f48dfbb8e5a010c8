// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mepg {

using Shape = std::vector<std::size_t>;

std::size_t shape_product(const Shape& shape) noexcept;
std::string shape_to_string(const Shape& shape);

/// Dense row-major tensor of doubles with value semantics.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    const Shape& shape() const noexcept { return m_shape; }
    std::size_t rank() const noexcept { return m_shape.size(); }
    std::size_t dim(std::size_t i) const { return m_shape.at(i); }
    std::size_t size() const noexcept { return m_data.size(); }
    bool empty() const noexcept { return m_data.empty(); }

    std::span<double> data() noexcept { return m_data; }
    std::span<const double> data() const noexcept { return m_data; }
    const std::vector<double>& values() const noexcept { return m_data; }

    double& operator[](std::size_t i) noexcept { return m_data[i]; }
    double operator[](std::size_t i) const noexcept { return m_data[i]; }

    // [C,H,W] accessors
    double& at(std::size_t c, std::size_t y, std::size_t x) noexcept {
        return m_data[(c * m_shape[1] + y) * m_shape[2] + x];
    }
    double at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return m_data[(c * m_shape[1] + y) * m_shape[2] + x];
    }

    void fill(double value) noexcept;

    /// Throws NonFiniteActivation naming `where` if any element is NaN or Inf.
    void check_finite(std::string_view where) const;

    /// Throws ShapeMismatch unless shapes are identical.
    void require_shape(const Shape& expected, std::string_view where) const;

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    Shape m_shape;
    std::vector<double> m_data;
};

/// Largest absolute elementwise difference; shapes must agree.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Bytewise equality of the double payloads (distinguishes -0.0 from 0.0).
bool bit_equal(const Tensor& a, const Tensor& b) noexcept;

}  // namespace mepg
