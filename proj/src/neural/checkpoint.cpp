// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/neural/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "mepg/core/error.hpp"
#include "mepg/core/hash.hpp"

namespace mepg::neural {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

template <typename T>
void put(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : m_bytes(bytes) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T value;
        std::memcpy(&value, m_bytes.data() + m_pos, sizeof(T));
        m_pos += sizeof(T);
        return value;
    }

    std::string_view take(std::size_t n) {
        need(n);
        const auto out = m_bytes.substr(m_pos, n);
        m_pos += n;
        return out;
    }

    bool done() const noexcept { return m_pos == m_bytes.size(); }

private:
    void need(std::size_t n) const {
        if (m_bytes.size() - m_pos < n) raise(ErrorCode::Format, "checkpoint truncated");
    }

    std::string_view m_bytes;
    std::size_t m_pos = 0;
};

constexpr std::uint32_t kMaxRank = 8;

}  // namespace

std::string encode_tensors(const NamedTensors& tensors, std::string_view magic) {
    std::string out(magic);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    }
    for (const auto& entry : tensors) {
        const auto data = entry.second.data();
        out.append(reinterpret_cast<const char*>(data.data()), data.size_bytes());
    }
    return out;
}

NamedTensors decode_tensors(std::string_view bytes, std::string_view magic) {
    Reader r(bytes);
    if (r.take(magic.size()) != magic) raise(ErrorCode::Format, "bad magic, expected " + std::string(magic));
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) raise(ErrorCode::Format, "unsupported version " + std::to_string(version));
    const auto count = r.get<std::uint32_t>();
    std::vector<std::pair<std::string, Shape>> table;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name(r.take(r.get<std::uint32_t>()));
        const auto rank = r.get<std::uint32_t>();
        if (rank > kMaxRank) raise(ErrorCode::Format, "rank too large for " + name);
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
        table.emplace_back(std::move(name), std::move(shape));
    }
    NamedTensors out;
    for (auto& [name, shape] : table) {
        const std::size_t n = shape_product(shape);
        const auto raw = r.take(n * sizeof(double));
        std::vector<double> values(n);
        std::memcpy(values.data(), raw.data(), raw.size());
        out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
    }
    if (!r.done()) raise(ErrorCode::Format, "trailing bytes after payload");
    return out;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) raise(ErrorCode::Io, "cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) raise(ErrorCode::Io, "short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_tensors(const fs::path& path, const NamedTensors& tensors, std::string_view magic) {
    write_file_atomic(path, encode_tensors(tensors, magic));
}

NamedTensors read_tensors(const fs::path& path, std::string_view magic) {
    return decode_tensors(read_file(path), magic);
}

fs::path sidecar_path(const fs::path& checkpoint) {
    fs::path p = checkpoint;
    p += ".json";
    return p;
}

void write_meta(const fs::path& checkpoint, const CheckpointMeta& meta) {
    const json doc = {{"kind", meta.kind},
                      {"expert_id", meta.expert_id},
                      {"style_tag", meta.style_tag},
                      {"training_seed", meta.training_seed},
                      {"dataset_hash", meta.dataset_hash}};
    write_file_atomic(sidecar_path(checkpoint), doc.dump(2) + "\n");
}

CheckpointMeta read_meta(const fs::path& checkpoint) {
    CheckpointMeta meta;
    const fs::path side = sidecar_path(checkpoint);
    if (!fs::exists(side)) return meta;
    try {
        const json doc = json::parse(read_file(side));
        meta.kind = doc.value("kind", meta.kind);
        meta.expert_id = doc.value("expert_id", "");
        meta.style_tag = doc.value("style_tag", "");
        meta.training_seed = doc.value("training_seed", std::uint64_t{0});
        meta.dataset_hash = doc.value("dataset_hash", "");
    } catch (const json::exception& e) {
        raise(ErrorCode::Format, side.string() + ": " + e.what());
    }
    return meta;
}

NamedTensors to_named(const DenoiserParams& params) {
    NamedTensors out;
    for (const auto& n : params.tensors()) out.emplace_back(n.name, *n.tensor);
    return out;
}

DenoiserParams denoiser_from_named(const NamedTensors& tensors) {
    auto find = [&](const std::string& name) -> const Tensor& {
        for (const auto& [n, t] : tensors) {
            if (n == name) return t;
        }
        raise(ErrorCode::Format, "checkpoint lacks tensor " + name);
    };
    const Tensor& conv1 = find("conv1.w");
    const Tensor& time = find("time_emb");
    const Tensor& cond = find("cond_emb");
    if (conv1.rank() != 4 || time.rank() != 2 || cond.rank() != 2) {
        raise(ErrorCode::Format, "checkpoint tensors have unexpected rank");
    }
    DenoiserConfig config;
    config.channels = conv1.dim(0);
    config.image_channels = conv1.dim(1);
    config.steps = time.dim(0);
    config.vocab = cond.dim(0);
    DenoiserParams params = DenoiserParams::zeros(config);
    for (auto& n : params.tensors()) {
        const Tensor& src = find(n.name);
        if (src.shape() != n.tensor->shape()) {
            raise(ErrorCode::Format, "tensor " + n.name + " has shape " + shape_to_string(src.shape()) +
                                         ", expected " + shape_to_string(n.tensor->shape()));
        }
        *n.tensor = src;
    }
    return params;
}

void save_denoiser(const fs::path& path, const DenoiserParams& params, const CheckpointMeta& meta) {
    write_tensors(path, to_named(params));
    write_meta(path, meta);
}

DenoiserParams load_denoiser(const fs::path& path) {
    if (!fs::exists(path)) raise(ErrorCode::MissingCheckpoint, path.string());
    return denoiser_from_named(read_tensors(path));
}

std::string params_hash(const DenoiserParams& params) {
    const std::string bytes = encode_tensors(to_named(params));
    return sha256_hex(std::span(reinterpret_cast<const std::byte*>(bytes.data()), bytes.size()));
}

void write_image_dump(const fs::path& path, const Tensor& image) {
    write_tensors(path, {{"image", image}}, kImageMagic);
}

Tensor read_image_dump(const fs::path& path) {
    auto tensors = read_tensors(path, kImageMagic);
    if (tensors.size() != 1) raise(ErrorCode::Format, "image dump must hold exactly one tensor");
    return std::move(tensors.front().second);
}

}  // namespace mepg::neural
