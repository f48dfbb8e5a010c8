// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/neural/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "mepg/core/error.hpp"
#include "mepg/core/rng.hpp"

namespace mepg::neural {

double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& analytic,
                           const std::function<double()>& loss, std::size_t n_probes, std::uint64_t seed,
                           double h) {
    if (params.size() != analytic.size()) raise(ErrorCode::ShapeMismatch, "grad_check: params/gradients differ");
    std::vector<std::size_t> offsets{0};
    for (std::size_t i = 0; i < params.size(); ++i) {
        analytic[i]->require_shape(params[i]->shape(), "grad_check gradient");
        offsets.push_back(offsets.back() + params[i]->size());
    }
    const std::size_t total = offsets.back();
    if (total == 0) return {};
    Rng rng(seed, 0x6C4C);
    GradCheckResult result;
    for (std::size_t p = 0; p < n_probes; ++p) {
        const std::size_t flat = rng.below(total);
        const std::size_t t =
            static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin()) - 1;
        const std::size_t idx = flat - offsets[t];
        double& w = (*params[t])[idx];
        const double saved = w;
        w = saved + h;
        const double up = loss();
        w = saved - h;
        const double down = loss();
        w = saved;
        GradProbe probe{t, idx, (*analytic[t])[idx], (up - down) / (2.0 * h), 0.0};
        probe.rel_error = relative_error(probe.analytic, probe.numeric);
        result.max_rel_error = std::max(result.max_rel_error, probe.rel_error);
        result.probes.push_back(probe);
    }
    return result;
}

}  // namespace mepg::neural
