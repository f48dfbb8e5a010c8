// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "mepg/core/tensor.hpp"

namespace mepg::diffusion {

/// 8-bit grayscale PNG of a [1,H,W] tensor; [-1, 1] maps linearly to [0, 255].
std::string encode_png(const Tensor& image);
void write_png(const std::filesystem::path& path, const Tensor& image);
/// Inverse mapping of a grayscale PNG back to [-1, 1].
Tensor decode_png(const std::string& bytes);

}  // namespace mepg::diffusion
