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
 * @file image.hpp
 *
 *****************************************************************************/

#ifndef DIFFREG_IMAGE_HPP
#define DIFFREG_IMAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "diffreg/errors.hpp"
#include "diffreg/tensor.hpp"

namespace diffreg {

/// Smallest side accepted for registration inputs.
inline constexpr int kMinImageSide = 8;

/// Single-channel raster with intensities in [0,1], row-major.
struct Image2D {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;

    Image2D() = default;
    Image2D(int w, int h, float fill = 0.0f) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill)
    {
        require(w >= kMinImageSide && h >= kMinImageSide,
                "image extents must be at least " + std::to_string(kMinImageSide) + " pixels, got " +
                    std::to_string(w) + "x" + std::to_string(h));
    }

    float& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

    bool same_extents(const Image2D& o) const { return width == o.width && height == o.height; }
};

/// Label raster: 0 is background, any other value is a region label.
struct Mask2D {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> labels;

    Mask2D() = default;
    Mask2D(int w, int h, std::uint8_t fill = 0) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, fill)
    {
        require(w > 0 && h > 0, "mask extents must be positive");
    }

    std::uint8_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }

    std::size_t count(std::uint8_t label) const
    {
        std::size_t n = 0;
        for (auto l : labels) {
            n += (l == label);
        }
        return n;
    }

    bool operator==(const Mask2D&) const = default;
};

template <typename T = float>
Tensor<T> to_tensor(const Image2D& image)
{
    Tensor<T> t(Shape{1, 1, image.height, image.width});
    t.data.assign(image.pixels.begin(), image.pixels.end());
    return t;
}

/// Converts a [1,1,H,W] tensor back to an image, clamping into [0,1].
template <typename T>
Image2D to_image(const Tensor<T>& t)
{
    require(t.shape.n == 1 && t.shape.c == 1, "to_image: expected a single-channel tensor, got " + t.shape.str());
    Image2D image(t.shape.w, t.shape.h);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const float v = static_cast<float>(t.data[i]);
        image.pixels[i] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    }
    return image;
}

}  // namespace diffreg

#endif  // DIFFREG_IMAGE_HPP
