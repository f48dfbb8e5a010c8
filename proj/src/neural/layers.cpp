// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/neural/layers.hpp"

#include <algorithm>
#include <cmath>

#include "mepg/core/error.hpp"

namespace mepg::neural {

namespace {

struct ConvDims {
    std::size_t cin, cout, h, w;
};

ConvDims check_conv(const Tensor& in, const Tensor& weight, const Tensor& bias) {
    if (in.rank() != 3 || weight.rank() != 4 || weight.dim(2) != 3 || weight.dim(3) != 3 ||
        weight.dim(1) != in.dim(0) || bias.size() != weight.dim(0)) {
        raise(ErrorCode::ShapeMismatch, "conv3x3: input " + shape_to_string(in.shape()) + " weight " +
                                            shape_to_string(weight.shape()));
    }
    return {in.dim(0), weight.dim(0), in.dim(1), in.dim(2)};
}

// Valid output range [lo, hi) along one axis for tap offset d in {-1,0,1}.
inline void tap_range(long d, std::size_t n, std::size_t& lo, std::size_t& hi) {
    lo = d < 0 ? 1 : 0;
    hi = d > 0 ? n - 1 : n;
}

}  // namespace

Tensor conv3x3(const Tensor& in, const Tensor& weight, const Tensor& bias) {
    const ConvDims d = check_conv(in, weight, bias);
    Tensor out({d.cout, d.h, d.w});
    const std::size_t plane = d.h * d.w;
    const double* src = in.data().data();
    const double* wt = weight.data().data();
    double* dst = out.data().data();
    for (std::size_t co = 0; co < d.cout; ++co) {
        double* o = dst + co * plane;
        std::fill(o, o + plane, bias[co]);
        for (std::size_t ci = 0; ci < d.cin; ++ci) {
            const double* s = src + ci * plane;
            for (long ky = -1; ky <= 1; ++ky) {
                std::size_t y0, y1;
                tap_range(ky, d.h, y0, y1);
                for (long kx = -1; kx <= 1; ++kx) {
                    const double k = wt[((co * d.cin + ci) * 3 + (ky + 1)) * 3 + (kx + 1)];
                    std::size_t x0, x1;
                    tap_range(kx, d.w, x0, x1);
                    const std::size_t n = x1 - x0;
                    for (std::size_t y = y0; y < y1; ++y) {
                        double* orow = o + y * d.w + x0;
                        const double* srow = s + (y + ky) * d.w + (x0 + kx);
                        for (std::size_t x = 0; x < n; ++x) orow[x] += k * srow[x];
                    }
                }
            }
        }
    }
    return out;
}

Tensor conv3x3_backward(const Tensor& in, const Tensor& weight, const Tensor& d_out, Tensor& d_weight,
                        Tensor& d_bias, bool want_input_grad) {
    const ConvDims d = check_conv(in, weight, d_bias);
    d_out.require_shape({d.cout, d.h, d.w}, "conv3x3_backward d_out");
    d_weight.require_shape(weight.shape(), "conv3x3_backward d_weight");
    Tensor d_in;
    if (want_input_grad) d_in = Tensor({d.cin, d.h, d.w});
    const std::size_t plane = d.h * d.w;
    const double* src = in.data().data();
    const double* g = d_out.data().data();
    const double* wt = weight.data().data();
    double* dw = d_weight.data().data();
    for (std::size_t co = 0; co < d.cout; ++co) {
        const double* go = g + co * plane;
        double bsum = 0.0;
        for (std::size_t p = 0; p < plane; ++p) bsum += go[p];
        d_bias[co] += bsum;
        for (std::size_t ci = 0; ci < d.cin; ++ci) {
            const double* s = src + ci * plane;
            double* di = want_input_grad ? d_in.data().data() + ci * plane : nullptr;
            for (long ky = -1; ky <= 1; ++ky) {
                std::size_t y0, y1;
                tap_range(ky, d.h, y0, y1);
                for (long kx = -1; kx <= 1; ++kx) {
                    const std::size_t widx = ((co * d.cin + ci) * 3 + (ky + 1)) * 3 + (kx + 1);
                    const double k = wt[widx];
                    std::size_t x0, x1;
                    tap_range(kx, d.w, x0, x1);
                    const std::size_t n = x1 - x0;
                    double acc = 0.0;
                    for (std::size_t y = y0; y < y1; ++y) {
                        const double* grow = go + y * d.w + x0;
                        const double* srow = s + (y + ky) * d.w + (x0 + kx);
                        for (std::size_t x = 0; x < n; ++x) acc += grow[x] * srow[x];
                        if (di) {
                            double* drow = di + (y + ky) * d.w + (x0 + kx);
                            for (std::size_t x = 0; x < n; ++x) drow[x] += k * grow[x];
                        }
                    }
                    dw[widx] += acc;
                }
            }
        }
    }
    return d_in;
}

Tensor pointwise(const Tensor& in, const Tensor& weight, const Tensor& bias) {
    if (in.rank() != 3 || weight.rank() != 2 || weight.dim(1) != in.dim(0) || bias.size() != weight.dim(0)) {
        raise(ErrorCode::ShapeMismatch,
              "pointwise: input " + shape_to_string(in.shape()) + " weight " + shape_to_string(weight.shape()));
    }
    const std::size_t cin = in.dim(0), cout = weight.dim(0), plane = in.dim(1) * in.dim(2);
    Tensor out({cout, in.dim(1), in.dim(2)});
    const double* src = in.data().data();
    double* dst = out.data().data();
    for (std::size_t o = 0; o < cout; ++o) {
        double* orow = dst + o * plane;
        std::fill(orow, orow + plane, bias[o]);
        for (std::size_t i = 0; i < cin; ++i) {
            const double k = weight[o * cin + i];
            const double* s = src + i * plane;
            for (std::size_t p = 0; p < plane; ++p) orow[p] += k * s[p];
        }
    }
    return out;
}

Tensor pointwise_backward(const Tensor& in, const Tensor& weight, const Tensor& d_out, Tensor& d_weight,
                          Tensor& d_bias) {
    const std::size_t cin = in.dim(0), cout = weight.dim(0), plane = in.dim(1) * in.dim(2);
    d_out.require_shape({cout, in.dim(1), in.dim(2)}, "pointwise_backward d_out");
    Tensor d_in({cin, in.dim(1), in.dim(2)});
    const double* src = in.data().data();
    const double* g = d_out.data().data();
    double* di = d_in.data().data();
    for (std::size_t o = 0; o < cout; ++o) {
        const double* go = g + o * plane;
        double bsum = 0.0;
        for (std::size_t p = 0; p < plane; ++p) bsum += go[p];
        d_bias[o] += bsum;
        for (std::size_t i = 0; i < cin; ++i) {
            const double* s = src + i * plane;
            double acc = 0.0;
            for (std::size_t p = 0; p < plane; ++p) acc += go[p] * s[p];
            d_weight[o * cin + i] += acc;
            const double k = weight[o * cin + i];
            double* d = di + i * plane;
            for (std::size_t p = 0; p < plane; ++p) d[p] += k * go[p];
        }
    }
    return d_in;
}

// exp(-v) overflowing to inf for very negative v still yields exactly 0.
double sigmoid(double v) noexcept { return 1.0 / (1.0 + std::exp(-v)); }

double silu(double v) noexcept { return v * sigmoid(v); }

double silu_grad(double v) noexcept {
    const double s = sigmoid(v);
    return s * (1.0 + v * (1.0 - s));
}

Tensor silu(const Tensor& in) {
    Tensor out(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = silu(in[i]);
    return out;
}

Tensor silu_backward(const Tensor& pre, const Tensor& d_out) {
    Tensor d(pre.shape());
    for (std::size_t i = 0; i < pre.size(); ++i) d[i] = d_out[i] * silu_grad(pre[i]);
    return d;
}

}  // namespace mepg::neural
