// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/diffusion/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cmath>
#include <cstring>
#include <vector>

#include "mepg/core/error.hpp"
#include "mepg/neural/checkpoint.hpp"

namespace mepg::diffusion {

namespace {

void on_png_warning(png_structp, png_const_charp) {}
[[noreturn]] void on_png_error(png_structp png, png_const_charp) { png_longjmp(png, 1); }

void append_bytes(png_structp png, png_bytep data, png_size_t len) {
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), len);
}

struct ReadCursor {
    const std::string* bytes;
    std::size_t pos;
};

void read_bytes(png_structp png, png_bytep data, png_size_t len) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->bytes->size() - cur->pos < len) png_error(png, "truncated stream");
    std::memcpy(data, cur->bytes->data() + cur->pos, len);
    cur->pos += len;
}

}  // namespace

std::string encode_png(const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != 1) {
        raise(ErrorCode::ShapeMismatch, "PNG export expects [1,H,W], got " + shape_to_string(image.shape()));
    }
    const auto h = static_cast<png_uint_32>(image.dim(1));
    const auto w = static_cast<png_uint_32>(image.dim(2));
    std::vector<png_byte> pixels(static_cast<std::size_t>(h) * w);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const double v = std::clamp(image[i], -1.0, 1.0);
        pixels[i] = static_cast<png_byte>(std::lround((v + 1.0) * 127.5));
    }
    std::string out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_png_error, on_png_warning);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        raise(ErrorCode::Io, "png: out of memory");
    }
    // libpng reports errors by longjmp; nothing with a destructor is created
    // between here and the writes.
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        raise(ErrorCode::Io, "png: encoding failed");
    }
    png_set_write_fn(png, &out, append_bytes, nullptr);
    png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (png_uint_32 y = 0; y < h; ++y) png_write_row(png, pixels.data() + static_cast<std::size_t>(y) * w);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

void write_png(const std::filesystem::path& path, const Tensor& image) {
    neural::write_file_atomic(path, encode_png(image));
}

Tensor decode_png(const std::string& bytes) {
    if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
        raise(ErrorCode::Format, "not a PNG stream");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, on_png_error, on_png_warning);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        raise(ErrorCode::Io, "png: out of memory");
    }
    ReadCursor cur{&bytes, 0};
    png_uint_32 w = 0, h = 0;
    png_bytep volatile pixels = nullptr;
    if (setjmp(png_jmpbuf(png))) {
        png_free(png, pixels);
        png_destroy_read_struct(&png, &info, nullptr);
        raise(ErrorCode::Format, "png: malformed stream");
    }
    png_set_read_fn(png, &cur, read_bytes);
    png_read_info(png, info);
    if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
        png_error(png, "only 8-bit grayscale is supported");
    }
    w = png_get_image_width(png, info);
    h = png_get_image_height(png, info);
    // Rows are read into a C buffer so a longjmp never skips a destructor.
    pixels = static_cast<png_bytep>(png_malloc(png, static_cast<png_alloc_size_t>(w) * h));
    for (png_uint_32 y = 0; y < h; ++y) png_read_row(png, pixels + static_cast<std::size_t>(y) * w, nullptr);
    Tensor out({1, h, w});
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = pixels[i] / 127.5 - 1.0;
    png_free(png, pixels);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

}  // namespace mepg::diffusion
