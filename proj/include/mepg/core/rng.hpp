// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "mepg/core/tensor.hpp"

namespace mepg {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon et al., Random123).
PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key) noexcept;

/// Counter-based Gaussian noise addressed by (seed, step, element index).
///
/// Element i of stream (seed, step) is a pure function of those three values,
/// so a sampler can replay the draw for any step without consuming the
/// streams that precede it.
class NoiseStream {
public:
    NoiseStream(std::uint64_t seed, std::uint32_t step) noexcept : m_seed(seed), m_step(step) {}

    double gaussian(std::uint64_t index) const noexcept;
    Tensor tensor(const Shape& shape) const;

private:
    std::uint64_t m_seed;
    std::uint32_t m_step;
};

/// Sequential generator on top of Philox for training and data synthesis.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint32_t stream = 0) noexcept : m_seed(seed), m_stream(stream) {}

    std::uint32_t next_u32() noexcept;
    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    double normal() noexcept;
    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n) noexcept;

private:
    void refill() noexcept;

    std::uint64_t m_seed;
    std::uint32_t m_stream;
    std::uint64_t m_counter = 0;
    PhiloxCounter m_block{};
    int m_used = 4;
    bool m_has_spare = false;
    double m_spare = 0.0;
};

}  // namespace mepg
