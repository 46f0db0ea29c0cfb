/******************************************************************************
 * Copyright 2026 The diffreg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *  http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * @file image_io.hpp
 *
 *****************************************************************************/

#ifndef DIFFREG_IMAGE_IO_HPP
#define DIFFREG_IMAGE_IO_HPP

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>
#include <vector>

#include "diffreg/errors.hpp"
#include "diffreg/image.hpp"
#include "diffreg/tensor.hpp"
#include "diffreg/warp.hpp"

namespace diffreg {

/// 8-bit interleaved RGB raster (flow visualizations).
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;
};

namespace detail {

struct RawRaster {
    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> values;
};

[[noreturn]] inline void io_fail(const std::string& path, const std::string& reason)
{
    throw IoError(path + ": " + reason);
}

inline std::vector<unsigned char> read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        io_fail(path, "cannot open file");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::vector<unsigned char>& bytes)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        io_fail(path, "cannot open file for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        io_fail(path, "write failed");
    }
}

// Binary PGM (P5), maxval up to 65535; 16-bit samples are big-endian.
inline RawRaster parse_pgm(const std::vector<unsigned char>& bytes, const std::string& path)
{
    std::size_t pos = 2;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') {
                    ++pos;
                }
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto number = [&](const char* what) {
        skip_space();
        long v = 0;
        std::size_t digits = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos++] - '0');
            if (v > 1 << 24) {
                io_fail(path, std::string("PGM ") + what + " is too large");
            }
            ++digits;
        }
        if (digits == 0) {
            io_fail(path, std::string("malformed PGM header (") + what + ")");
        }
        return static_cast<int>(v);
    };
    RawRaster r;
    r.width = number("width");
    r.height = number("height");
    const int maxval = number("maxval");
    if (r.width == 0 || r.height == 0) {
        io_fail(path, "zero image dimension");
    }
    if (maxval < 1 || maxval > 65535) {
        io_fail(path, "PGM maxval must be in 1..65535, got " + std::to_string(maxval));
    }
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
        io_fail(path, "malformed PGM header");
    }
    ++pos;
    const std::size_t n = static_cast<std::size_t>(r.width) * r.height;
    const std::size_t bytes_per = maxval > 255 ? 2 : 1;
    if (bytes.size() - pos < n * bytes_per) {
        io_fail(path, "truncated PGM data");
    }
    r.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        r.values[i] = bytes_per == 1 ? bytes[pos + i]
                                     : static_cast<std::uint16_t>(bytes[pos + 2 * i] << 8 | bytes[pos + 2 * i + 1]);
    }
    return r;
}

inline RawRaster parse_png(const std::vector<unsigned char>& bytes, const std::string& path)
{
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        io_fail(path, std::string("invalid PNG: ") + img.message);
    }
    RawRaster r;
    r.width = static_cast<int>(img.width);
    r.height = static_cast<int>(img.height);
    const bool wide = (img.format & PNG_FORMAT_FLAG_LINEAR) != 0;
    img.format = wide ? PNG_FORMAT_LINEAR_Y : PNG_FORMAT_GRAY;
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    bool ok;
    r.values.resize(n);
    if (wide) {
        ok = png_image_finish_read(&img, nullptr, r.values.data(), 0, nullptr) != 0;
    } else {
        std::vector<std::uint8_t> buf(n);
        ok = png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr) != 0;
        std::copy(buf.begin(), buf.end(), r.values.begin());
    }
    if (!ok) {
        const std::string msg = img.message;
        png_image_free(&img);
        io_fail(path, "cannot decode PNG: " + msg);
    }
    if (r.width == 0 || r.height == 0) {
        io_fail(path, "zero image dimension");
    }
    return r;
}

inline RawRaster read_raster(const std::string& path)
{
    const auto bytes = read_file(path);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
        return parse_pgm(bytes, path);
    }
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) {
        return parse_png(bytes, path);
    }
    io_fail(path, "unsupported format (expected binary PGM or PNG)");
}

inline std::string lower_extension(const std::string& path)
{
    std::string ext = std::filesystem::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

inline void write_png(const std::string& path, int width, int height, bool rgb, const std::uint8_t* data)
{
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(width);
    img.height = static_cast<png_uint_32>(height);
    img.format = rgb ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, data, 0, nullptr)) {
        io_fail(path, std::string("PNG encoding failed: ") + img.message);
    }
    std::vector<unsigned char> bytes(size);
    if (!png_image_write_to_memory(&img, bytes.data(), &size, 0, data, 0, nullptr)) {
        io_fail(path, std::string("PNG encoding failed: ") + img.message);
    }
    bytes.resize(size);
    write_file(path, bytes);
}

inline void write_gray8(const std::string& path, int width, int height, const std::vector<std::uint8_t>& data)
{
    const std::string ext = lower_extension(path);
    if (ext == ".png") {
        write_png(path, width, height, false, data.data());
    } else if (ext == ".pgm") {
        const std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
        std::vector<unsigned char> bytes(header.begin(), header.end());
        bytes.insert(bytes.end(), data.begin(), data.end());
        write_file(path, bytes);
    } else {
        io_fail(path, "unsupported output extension '" + ext + "' (use .pgm or .png)");
    }
}

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
}

inline std::uint32_t get_u32(const unsigned char* p)
{
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace detail

/// Min-max rescale to [0,1]; a constant input maps to all zeros.
inline std::vector<float> normalize_intensities(const std::vector<double>& values)
{
    std::vector<float> out(values.size(), 0.0f);
    if (values.empty()) {
        return out;
    }
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double range = *hi - *lo;
    if (range > 0) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            out[i] = static_cast<float>((values[i] - *lo) / range);
        }
    }
    return out;
}

/// Reads an 8/16-bit binary PGM or grayscale PNG and min-max normalizes it.
inline Image2D load_image(const std::string& path)
{
    const detail::RawRaster r = detail::read_raster(path);
    if (r.width < kMinImageSide || r.height < kMinImageSide) {
        detail::io_fail(path, "image is " + std::to_string(r.width) + "x" + std::to_string(r.height) +
                                  ", smaller than the minimum " + std::to_string(kMinImageSide) + "x" +
                                  std::to_string(kMinImageSide));
    }
    Image2D image(r.width, r.height);
    image.pixels = normalize_intensities(std::vector<double>(r.values.begin(), r.values.end()));
    return image;
}

/// Reads a label mask; sample values are taken verbatim as labels.
inline Mask2D load_mask(const std::string& path)
{
    const detail::RawRaster r = detail::read_raster(path);
    Mask2D mask(r.width, r.height);
    for (std::size_t i = 0; i < r.values.size(); ++i) {
        if (r.values[i] > 255) {
            detail::io_fail(path, "mask label " + std::to_string(r.values[i]) + " does not fit in 8 bits");
        }
        mask.labels[i] = static_cast<std::uint8_t>(r.values[i]);
    }
    return mask;
}

/// Writes a grayscale image; format follows the extension (.pgm or .png).
/// `bits` = 16 is available for PGM only.
inline void save_image(const Image2D& image, const std::string& path, int bits = 8)
{
    if (bits == 16) {
        if (detail::lower_extension(path) != ".pgm") {
            detail::io_fail(path, "16-bit output is only supported for .pgm");
        }
        const std::string header =
            "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n65535\n";
        std::vector<unsigned char> bytes(header.begin(), header.end());
        for (float p : image.pixels) {
            const auto v = static_cast<std::uint16_t>(std::lround(std::clamp(p, 0.0f, 1.0f) * 65535.0f));
            bytes.push_back(static_cast<unsigned char>(v >> 8));
            bytes.push_back(static_cast<unsigned char>(v & 0xff));
        }
        detail::write_file(path, bytes);
        return;
    }
    require(bits == 8, "save_image: bits must be 8 or 16");
    std::vector<std::uint8_t> data(image.pixels.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const float v = std::clamp(image.pixels[i], 0.0f, 1.0f);
        data[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    detail::write_gray8(path, image.width, image.height, data);
}

inline void save_mask(const Mask2D& mask, const std::string& path)
{
    detail::write_gray8(path, mask.width, mask.height, mask.labels);
}

inline void save_rgb_png(const RgbImage& image, const std::string& path)
{
    detail::write_png(path, image.width, image.height, true, image.rgb.data());
}

/// "DFLD" + u32 width + u32 height + (x, y) f32 pairs per pixel, little-endian.
inline void save_displacement(const Tensor<float>& field, const std::string& path)
{
    require(field.shape.n == 1 && field.shape.c == 2,
            "save_displacement: expected a [1,2,H,W] field, got " + field.shape.str());
    require(field.all_finite(), "save_displacement: field contains non-finite values");
    std::vector<unsigned char> bytes{'D', 'F', 'L', 'D'};
    detail::put_u32(bytes, static_cast<std::uint32_t>(field.shape.w));
    detail::put_u32(bytes, static_cast<std::uint32_t>(field.shape.h));
    const std::size_t plane = field.shape.plane();
    bytes.reserve(bytes.size() + plane * 8);
    for (std::size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < 2; ++c) {
            std::uint32_t bits;
            std::memcpy(&bits, &field.data[c * plane + i], 4);
            detail::put_u32(bytes, bits);
        }
    }
    detail::write_file(path, bytes);
}

inline Tensor<float> load_displacement(const std::string& path)
{
    const auto bytes = detail::read_file(path);
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "DFLD", 4) != 0) {
        detail::io_fail(path, "not a DFLD displacement file");
    }
    const std::uint32_t w = detail::get_u32(&bytes[4]);
    const std::uint32_t h = detail::get_u32(&bytes[8]);
    if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16)) {
        detail::io_fail(path, "invalid DFLD extents " + std::to_string(w) + "x" + std::to_string(h));
    }
    const std::size_t plane = static_cast<std::size_t>(w) * h;
    if (bytes.size() != 12 + plane * 8) {
        detail::io_fail(path, "DFLD payload size does not match " + std::to_string(w) + "x" + std::to_string(h));
    }
    Tensor<float> field(Shape{1, 2, static_cast<int>(h), static_cast<int>(w)});
    for (std::size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < 2; ++c) {
            const std::uint32_t bits = detail::get_u32(&bytes[12 + 8 * i + 4 * c]);
            std::memcpy(&field.data[c * plane + i], &bits, 4);
        }
    }
    return field;
}

/// HSV rendering of the pixel displacement: hue from direction, saturation from
/// magnitude relative to its 99th percentile, full value (zero motion is white).
inline RgbImage flow_to_color(const Tensor<float>& field)
{
    const Tensor<double> u = displacement_px(field);
    const int h = field.shape.h, w = field.shape.w;
    const std::size_t plane = field.shape.plane();
    std::vector<double> mag(plane);
    for (std::size_t i = 0; i < plane; ++i) {
        mag[i] = std::hypot(u.data[i], u.data[plane + i]);
    }
    std::vector<double> sorted = mag;
    const std::size_t k = static_cast<std::size_t>(std::ceil(0.99 * plane)) - 1;
    std::nth_element(sorted.begin(), sorted.begin() + k, sorted.end());
    double ref = sorted[k];
    if (ref <= 0.0) {
        ref = *std::max_element(mag.begin(), mag.end());
    }
    RgbImage out{w, h, std::vector<std::uint8_t>(plane * 3, 255)};
    if (ref <= 0.0) {
        return out;
    }
    for (std::size_t i = 0; i < plane; ++i) {
        const double s = std::min(1.0, mag[i] / ref);
        double hue = std::atan2(u.data[plane + i], u.data[i]) * 180.0 / std::numbers::pi;
        if (hue < 0) {
            hue += 360.0;
        }
        const double hp = hue / 60.0;
        const double c = s;
        const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
        std::array<double, 3> rgb{};
        switch (static_cast<int>(hp) % 6) {
        case 0: rgb = {c, x, 0}; break;
        case 1: rgb = {x, c, 0}; break;
        case 2: rgb = {0, c, x}; break;
        case 3: rgb = {0, x, c}; break;
        case 4: rgb = {x, 0, c}; break;
        default: rgb = {c, 0, x}; break;
        }
        const double m = 1.0 - c;
        for (int ch = 0; ch < 3; ++ch) {
            out.rgb[3 * i + ch] = static_cast<std::uint8_t>(std::lround((rgb[ch] + m) * 255.0));
        }
    }
    return out;
}

}  // namespace diffreg

#endif  // DIFFREG_IMAGE_IO_HPP
