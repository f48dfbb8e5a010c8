// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mepg/core/tensor.hpp"
#include "mepg/neural/denoiser.hpp"

namespace mepg::neural {

inline constexpr std::string_view kCheckpointMagic = "MEPGCKPT";
inline constexpr std::string_view kImageMagic = "MEPGIMG1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Binary layout: 8-byte magic, u32 version, u32 tensor count, then per
/// tensor {u32 name length, name, u32 rank, u64 dims...}, then every
/// tensor's payload as little-endian f64 in table order.
std::string encode_tensors(const NamedTensors& tensors, std::string_view magic = kCheckpointMagic);
NamedTensors decode_tensors(std::string_view bytes, std::string_view magic = kCheckpointMagic);

void write_tensors(const std::filesystem::path& path, const NamedTensors& tensors,
                   std::string_view magic = kCheckpointMagic);
NamedTensors read_tensors(const std::filesystem::path& path, std::string_view magic = kCheckpointMagic);

/// Stored next to a checkpoint as `<path>.json`.
struct CheckpointMeta {
    std::string kind = "denoiser";
    std::string expert_id;
    std::string style_tag;
    std::uint64_t training_seed = 0;
    std::string dataset_hash;
};

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);
void write_meta(const std::filesystem::path& checkpoint, const CheckpointMeta& meta);
/// Missing sidecars yield default metadata.
CheckpointMeta read_meta(const std::filesystem::path& checkpoint);

NamedTensors to_named(const DenoiserParams& params);
DenoiserParams denoiser_from_named(const NamedTensors& tensors);

void save_denoiser(const std::filesystem::path& path, const DenoiserParams& params, const CheckpointMeta& meta);
DenoiserParams load_denoiser(const std::filesystem::path& path);

/// SHA-256 of the encoded parameter payload.
std::string params_hash(const DenoiserParams& params);

void write_image_dump(const std::filesystem::path& path, const Tensor& image);
Tensor read_image_dump(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace mepg::neural
