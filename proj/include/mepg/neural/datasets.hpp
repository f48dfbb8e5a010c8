// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mepg/core/rng.hpp"
#include "mepg/core/tensor.hpp"

namespace mepg::neural {

inline constexpr std::size_t kToyImageSize = 32;
inline constexpr std::size_t kStripePeriod = 4;

/// Soft Gaussian blobs on a dark background, values in [-1, 1].
Tensor make_blobs(Rng& rng, std::size_t size = kToyImageSize);
/// Vertical sinusoidal stripes with a 4 px period and random phase.
Tensor make_stripes(Rng& rng, std::size_t size = kToyImageSize);

/// Region prompt used to condition a style ("blobby pattern", "striped pattern").
std::string style_prompt(std::string_view style);

struct Sample {
    Tensor image;  // [1,H,W]
    std::vector<int> cond;
    std::string style_tag;
};

struct StyleDataset {
    std::string name;
    std::vector<Sample> samples;

    bool empty() const noexcept { return samples.empty(); }
    std::size_t size() const noexcept { return samples.size(); }
};

/// `style` is "blobs", "stripes" or "mixed" (alternating the two).
StyleDataset make_dataset(std::string_view style, std::size_t count, std::uint64_t seed,
                          std::size_t size = kToyImageSize);

/// SHA-256 over every sample's pixels, condition ids and tag.
std::string dataset_hash(const StyleDataset& dataset);

/// Share of row energy at the 4 px horizontal period inside the cell
/// rectangle [x0,x1) x [y0,y1): 2|X_p|^2 / (w * sum x^2) summed over rows,
/// where X_p is the projection on the period-4 complex exponential. A pure
/// period-4 sine over a width that is a multiple of 4 scores 1; flat rows
/// score 0.
double frequency_statistic(const Tensor& image, std::size_t x0, std::size_t y0, std::size_t x1, std::size_t y1);
double frequency_statistic(const Tensor& image);

}  // namespace mepg::neural
