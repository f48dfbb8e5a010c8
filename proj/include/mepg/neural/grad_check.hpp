// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "mepg/core/tensor.hpp"

namespace mepg::neural {

struct GradProbe {
    std::size_t tensor = 0;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::vector<GradProbe> probes;
};

/// Relative error |a - n| / max(|a|, |n|, floor). Central differences with
/// h = 1e-5 carry about 1e-11 of rounding noise for O(1) losses; the floor
/// keeps coordinates whose true gradient is zero from dividing that noise
/// by zero.
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Compares `analytic` (same layout as `params`) against central differences
/// of `loss` with step `h` on `n_probes` coordinates drawn uniformly over all
/// parameters. `params` are perturbed in place and restored exactly.
GradCheckResult grad_check(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& analytic,
                           const std::function<double()>& loss, std::size_t n_probes, std::uint64_t seed,
                           double h = 1e-5);

}  // namespace mepg::neural
