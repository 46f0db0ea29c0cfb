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
 * @file pyramid.hpp
 *
 *****************************************************************************/

#ifndef DIFFREG_PYRAMID_HPP
#define DIFFREG_PYRAMID_HPP

#include <algorithm>
#include <string>
#include <vector>

#include "diffreg/errors.hpp"
#include "diffreg/image.hpp"
#include "diffreg/ops.hpp"
#include "diffreg/tensor.hpp"

namespace diffreg {

/// Levels ordered finest (index 0, the original image) to coarsest.
struct ImagePyramid {
    std::vector<Image2D> levels;

    int depth() const { return static_cast<int>(levels.size()); }
    const Image2D& finest() const { return levels.front(); }
    const Image2D& coarsest() const { return levels.back(); }
};

/// Extent of `n` after one 2x decimation.
inline int halve(int n) { return (n + 1) / 2; }

/// Largest pyramid depth whose coarsest level keeps >= kMinImageSide pixels per side.
inline int max_pyramid_levels(int height, int width)
{
    int k = 0;
    while (std::min(height, width) >= kMinImageSide) {
        ++k;
        height = halve(height);
        width = halve(width);
    }
    return k;
}

/// Normalized pixel-center coordinates as a [1,2,H,W] tensor: channel 0 holds
/// x = -1 + 2j/(W-1), channel 1 holds y = -1 + 2i/(H-1).
template <typename T = float>
Tensor<T> coord_grid(int height, int width)
{
    require(height >= 2 && width >= 2, "coord_grid: extents must be at least 2x2");
    Tensor<T> g(Shape{1, 2, height, width});
    for (int i = 0; i < height; ++i) {
        const double y = -1.0 + 2.0 * i / (height - 1);
        for (int j = 0; j < width; ++j) {
            g(0, i, j) = static_cast<T>(-1.0 + 2.0 * j / (width - 1));
            g(1, i, j) = static_cast<T>(y);
        }
    }
    return g;
}

/// Blurs with the separable binomial [1,4,6,4,1]/16 (reflect borders) and keeps
/// every other pixel starting at index 0.
inline Image2D pyramid_down(const Image2D& image)
{
    static const std::vector<double> taps{1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
    std::vector<float> tmp(image.pixels.size()), blurred(image.pixels.size());
    detail::filter_axis(image.pixels.data(), tmp.data(), image.height, image.width, true, taps, false);
    detail::filter_axis(tmp.data(), blurred.data(), image.height, image.width, false, taps, false);
    Image2D out(halve(image.width), halve(image.height));
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            out.at(x, y) = blurred[static_cast<std::size_t>(2 * y) * image.width + 2 * x];
        }
    }
    return out;
}

/// Gaussian pyramid with `levels` entries; entry 0 is `image` itself.
inline ImagePyramid gaussian_pyramid(const Image2D& image, int levels)
{
    if (levels < 1) {
        throw ConfigError("pyramid depth must be at least 1, got " + std::to_string(levels));
    }
    const int feasible = max_pyramid_levels(image.height, image.width);
    if (levels > feasible) {
        throw ConfigError("pyramid depth " + std::to_string(levels) + " is too large for a " +
                          std::to_string(image.width) + "x" + std::to_string(image.height) +
                          " image; maximum feasible depth is " + std::to_string(feasible));
    }
    ImagePyramid pyr;
    pyr.levels.reserve(levels);
    pyr.levels.push_back(image);
    for (int t = 1; t < levels; ++t) {
        pyr.levels.push_back(pyramid_down(pyr.levels.back()));
    }
    return pyr;
}

}  // namespace diffreg

#endif  // DIFFREG_PYRAMID_HPP
