// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/core/rng.hpp"

#include <cmath>
#include <numbers>

namespace mepg {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

// Domain tags keep the noise streams and the sequential generator disjoint.
constexpr std::uint32_t kNoiseTag = 0x4D455047u;  // "MEPG"
constexpr std::uint32_t kRngTag = 0x524E4731u;    // "RNG1"

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

// 53-bit uniform in [0, 1) from two 32-bit words.
inline double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11);
    return static_cast<double>(bits & ((1ull << 53) - 1)) * 0x1.0p-53;
}

struct GaussianPair {
    double first;
    double second;
};

inline GaussianPair box_muller(const PhiloxCounter& words) noexcept {
    const double u1 = 1.0 - to_unit(words[0], words[1]);  // (0, 1]
    const double u2 = to_unit(words[2], words[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(theta), radius * std::sin(theta)};
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) noexcept {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kPhiloxW0;
            key[1] += kPhiloxW1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

double NoiseStream::gaussian(std::uint64_t index) const noexcept {
    const std::uint64_t pair = index / 2;
    const PhiloxCounter ctr{static_cast<std::uint32_t>(pair), static_cast<std::uint32_t>(pair >> 32), m_step,
                            kNoiseTag};
    const PhiloxKey key{static_cast<std::uint32_t>(m_seed), static_cast<std::uint32_t>(m_seed >> 32)};
    const GaussianPair g = box_muller(philox4x32_10(ctr, key));
    return (index % 2 == 0) ? g.first : g.second;
}

Tensor NoiseStream::tensor(const Shape& shape) const {
    Tensor out(shape);
    auto data = out.data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = gaussian(i);
    return out;
}

void Rng::refill() noexcept {
    const PhiloxCounter ctr{static_cast<std::uint32_t>(m_counter), static_cast<std::uint32_t>(m_counter >> 32),
                            m_stream, kRngTag};
    const PhiloxKey key{static_cast<std::uint32_t>(m_seed), static_cast<std::uint32_t>(m_seed >> 32)};
    m_block = philox4x32_10(ctr, key);
    ++m_counter;
    m_used = 0;
}

std::uint32_t Rng::next_u32() noexcept {
    if (m_used == 4) refill();
    return m_block[m_used++];
}

std::uint64_t Rng::next_u64() noexcept {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
}

double Rng::uniform() noexcept {
    const std::uint32_t hi = next_u32();
    return to_unit(hi, next_u32());
}

double Rng::normal() noexcept {
    if (m_has_spare) {
        m_has_spare = false;
        return m_spare;
    }
    PhiloxCounter words;
    for (auto& w : words) w = next_u32();
    const GaussianPair g = box_muller(words);
    m_spare = g.second;
    m_has_spare = true;
    return g.first;
}

std::size_t Rng::below(std::size_t n) noexcept {
    if (n <= 1) return 0;
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return static_cast<std::size_t>(v % n);
}

}  // namespace mepg
