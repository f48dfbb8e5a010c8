// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Reference computations written independently of the library code they
// check: plain loops, no shared helpers.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mepg/core/tensor.hpp"
#include "mepg/geometry/geometry.hpp"

namespace oracle {

/// Number of steps t in [1, N] with t <= p1 * N.
std::size_t local_step_count(std::size_t steps, double p1);

/// Cell (r,c) is set iff its centre lies in [x1,x2) x [y1,y2).
std::vector<std::uint8_t> rasterize(const mepg::geometry::BoundingBox& box, int grid_h, int grid_w);

struct Route {
    std::vector<double> weights;
    std::vector<std::size_t> active;  // ascending
    std::vector<double> normalized;   // aligned with active
};

/// Sigmoid weights; k passes each taking the first unchosen maximum.
Route route(const std::vector<double>& logits, std::size_t k);

/// sum_i alphas[i] * proposals[i], element by element.
mepg::Tensor weighted_sum(const std::vector<mepg::Tensor>& proposals, const std::vector<double>& alphas);

/// True iff every element lies within [min, max] of the proposals with
/// non-zero weight at that element.
bool within_hull(const mepg::Tensor& fused, const std::vector<mepg::Tensor>& proposals,
                 const std::vector<double>& alphas);

}  // namespace oracle
