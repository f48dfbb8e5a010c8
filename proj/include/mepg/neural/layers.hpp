// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mepg/core/tensor.hpp"

namespace mepg::neural {

// All feature maps are [C,H,W]. Convolutions are 3x3, stride 1, zero padding 1.

Tensor conv3x3(const Tensor& in, const Tensor& weight, const Tensor& bias);
/// Accumulates into d_weight/d_bias; returns d_in unless `want_input_grad` is false.
Tensor conv3x3_backward(const Tensor& in, const Tensor& weight, const Tensor& d_out, Tensor& d_weight,
                        Tensor& d_bias, bool want_input_grad = true);

/// Per-pixel linear map over channels: weight [O,I], bias [O].
Tensor pointwise(const Tensor& in, const Tensor& weight, const Tensor& bias);
Tensor pointwise_backward(const Tensor& in, const Tensor& weight, const Tensor& d_out, Tensor& d_weight,
                          Tensor& d_bias);

double silu(double v) noexcept;
double silu_grad(double v) noexcept;
double sigmoid(double v) noexcept;

Tensor silu(const Tensor& in);
/// d_in = d_out * silu'(pre).
Tensor silu_backward(const Tensor& pre, const Tensor& d_out);

}  // namespace mepg::neural
