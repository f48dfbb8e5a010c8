// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/neural/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mepg/core/error.hpp"
#include "mepg/core/hash.hpp"
#include "mepg/core/lexicon.hpp"

namespace mepg::neural {

Tensor make_blobs(Rng& rng, std::size_t size) {
    Tensor img({1, size, size}, -0.8);
    const std::size_t count = 2 + rng.below(3);
    const double n = static_cast<double>(size);
    for (std::size_t b = 0; b < count; ++b) {
        const double cx = rng.uniform(0.15 * n, 0.85 * n);
        const double cy = rng.uniform(0.15 * n, 0.85 * n);
        const double sigma = rng.uniform(3.0, 7.0);
        const double inv = 1.0 / (2.0 * sigma * sigma);
        for (std::size_t y = 0; y < size; ++y) {
            for (std::size_t x = 0; x < size; ++x) {
                const double dx = static_cast<double>(x) - cx;
                const double dy = static_cast<double>(y) - cy;
                img.at(0, y, x) += 1.6 * std::exp(-(dx * dx + dy * dy) * inv);
            }
        }
    }
    for (double& v : img.data()) v = std::clamp(v, -1.0, 1.0);
    return img;
}

Tensor make_stripes(Rng& rng, std::size_t size) {
    Tensor img({1, size, size});
    const double amplitude = rng.uniform(0.8, 1.0);
    const double phase = rng.uniform(0.0, static_cast<double>(kStripePeriod));
    const double omega = 2.0 * std::numbers::pi / static_cast<double>(kStripePeriod);
    for (std::size_t x = 0; x < size; ++x) {
        const double v = amplitude * std::sin(omega * (static_cast<double>(x) + phase));
        for (std::size_t y = 0; y < size; ++y) img.at(0, y, x) = v;
    }
    return img;
}

std::string style_prompt(std::string_view style) {
    if (style == "blobs") return "blobby pattern";
    if (style == "stripes") return "striped pattern";
    if (style == "mixed") return "pattern";
    raise(ErrorCode::InvalidConfig, "unknown toy style '" + std::string(style) + "'");
}

StyleDataset make_dataset(std::string_view style, std::size_t count, std::uint64_t seed, std::size_t size) {
    (void)style_prompt(style);
    StyleDataset ds;
    ds.name = std::string(style);
    Rng rng(seed, 0xDA7A);
    for (std::size_t i = 0; i < count; ++i) {
        const bool stripes = style == "stripes" || (style == "mixed" && i % 2 == 1);
        Sample s;
        s.style_tag = stripes ? "stripes" : "blobs";
        s.image = stripes ? make_stripes(rng, size) : make_blobs(rng, size);
        s.cond = lexicon::tokenize(style_prompt(s.style_tag));
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

std::string dataset_hash(const StyleDataset& dataset) {
    std::string bytes;
    for (const Sample& s : dataset.samples) {
        const auto d = s.image.data();
        bytes.append(reinterpret_cast<const char*>(d.data()), d.size_bytes());
        for (int id : s.cond) bytes += std::to_string(id) + ",";
        bytes += s.style_tag + ";";
    }
    return sha256_hex(bytes);
}

double frequency_statistic(const Tensor& image, std::size_t x0, std::size_t y0, std::size_t x1, std::size_t y1) {
    if (image.rank() != 3 || x1 > image.dim(2) || y1 > image.dim(1) || x0 >= x1 || y0 >= y1) {
        raise(ErrorCode::ShapeMismatch, "frequency_statistic rectangle outside image");
    }
    // Period-4 basis: cos(pi x / 2) = 1,0,-1,0 and sin(pi x / 2) = 0,1,0,-1.
    static constexpr double kCos[4] = {1.0, 0.0, -1.0, 0.0};
    static constexpr double kSin[4] = {0.0, 1.0, 0.0, -1.0};
    const double width = static_cast<double>(x1 - x0);
    double peak = 0.0;
    double energy = 0.0;
    for (std::size_t c = 0; c < image.dim(0); ++c) {
        for (std::size_t y = y0; y < y1; ++y) {
            double re = 0.0, im = 0.0;
            for (std::size_t x = x0; x < x1; ++x) {
                const double v = image.at(c, y, x);
                re += v * kCos[(x - x0) % 4];
                im += v * kSin[(x - x0) % 4];
                energy += v * v;
            }
            peak += re * re + im * im;
        }
    }
    if (energy <= 0.0) return 0.0;
    return 2.0 * peak / (width * energy);
}

double frequency_statistic(const Tensor& image) {
    return frequency_statistic(image, 0, 0, image.dim(2), image.dim(1));
}

}  // namespace mepg::neural
