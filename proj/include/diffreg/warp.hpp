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
 * @file warp.hpp
 *
 *****************************************************************************/

#ifndef DIFFREG_WARP_HPP
#define DIFFREG_WARP_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "diffreg/errors.hpp"
#include "diffreg/image.hpp"
#include "diffreg/ops.hpp"
#include "diffreg/pyramid.hpp"
#include "diffreg/tape.hpp"
#include "diffreg/tensor.hpp"

// Deformation fields are absolute maps phi: grid -> [-1,1]^2 stored as [1,2,H,W]
// (channel 0 = x, channel 1 = y); the identity field is coord_grid(H, W).
// Velocity fields share the layout but hold increments in normalized units.

namespace diffreg {

inline constexpr int kMaxSquarings = 10;

namespace detail {

inline void require_field(const Shape& s, const char* op)
{
    if (s.n != 1 || s.c != 2) {
        throw ContractViolation(std::string(op) + ": expected a [1,2,H,W] field, got " + s.str());
    }
}

template <typename T>
void require_finite(const Tensor<T>& t, const char* op)
{
    if (!t.all_finite()) {
        throw ContractViolation(std::string(op) + ": input contains non-finite values");
    }
}

}  // namespace detail

/// Number of squarings so that the initial step v/2^N moves at most half a pixel,
/// where one pixel is 2/max(H,W) normalized units. Capped at kMaxSquarings.
template <typename T>
int squaring_steps(const Tensor<T>& v)
{
    double peak = 0.0;
    for (T x : v.data) {
        peak = std::max(peak, std::abs(static_cast<double>(x)));
    }
    const double pixel = 2.0 / std::max(v.shape.h, v.shape.w);
    const double ratio = std::max(1.0, peak / (0.5 * pixel));
    const int n = static_cast<int>(std::ceil(std::log2(ratio)));
    return std::clamp(n, 0, kMaxSquarings);
}

/// (outer o inner)(x) = outer(inner(x)).
///
/// Evaluated as inner(x) + u(inner(x)) with u = outer - id sampled bilinearly.
/// Inside [-1,1]^2 this equals sampling outer directly (bilinear interpolation
/// reproduces the identity); positions outside keep the border displacement
/// instead of collapsing onto the border, which keeps compositions of
/// orientation-preserving maps free of degenerate Jacobians at the edges.
template <typename T>
Var<T> compose(Var<T> outer, Var<T> inner)
{
    detail::require_field(outer.shape(), "compose");
    detail::require_field(inner.shape(), "compose");
    if (!(outer.shape() == inner.shape())) {
        throw ContractViolation("compose: extent mismatch " + outer.shape().str() + " vs " + inner.shape().str());
    }
    Var<T> grid = outer.tape->constant(coord_grid<T>(outer.shape().h, outer.shape().w));
    return add(inner, bilinear_sample(sub(outer, grid), inner));
}

/// Exponential of a stationary velocity field by scaling and squaring.
template <typename T>
Var<T> exp_velocity(Var<T> v)
{
    detail::require_field(v.shape(), "exp_velocity");
    detail::require_finite(v.value(), "exp_velocity");
    const int n = squaring_steps(v.value());
    Var<T> grid = v.tape->constant(coord_grid<T>(v.shape().h, v.shape().w));
    Var<T> phi = add(grid, scale(v, std::ldexp(1.0, -n)));
    for (int k = 0; k < n; ++k) {
        phi = compose(phi, phi);
    }
    return phi;
}

/// Resamples a deformation onto the finer canonical grid. Coordinates are
/// normalized at every level, so values are not rescaled.
template <typename T>
Var<T> upsample_deformation(Var<T> d, int height, int width)
{
    detail::require_field(d.shape(), "upsample_deformation");
    if (height < d.shape().h || width < d.shape().w) {
        throw ContractViolation("upsample_deformation: cannot downsample " + d.shape().str() + " to " +
                                std::to_string(height) + "x" + std::to_string(width));
    }
    Var<T> grid = d.tape->constant(coord_grid<T>(height, width));
    return bilinear_sample(d, grid);
}

/// Per-channel Gaussian low-pass, kernel radius ceil(3 sigma), reflect borders.
template <typename T>
Var<T> smooth_velocity(Var<T> v, double sigma)
{
    require(sigma >= 0.0, "smooth_velocity: sigma must be non-negative");
    return gaussian_blur(v, sigma, static_cast<int>(std::ceil(3.0 * sigma)));
}

/// image(d(x)) for an image [1,C,H,W] and a field of the same extents.
template <typename T>
Var<T> warp_image(Var<T> image, Var<T> d)
{
    detail::require_field(d.shape(), "warp_image");
    if (image.shape().h != d.shape().h || image.shape().w != d.shape().w) {
        throw ContractViolation("warp_image: image " + image.shape().str() + " and field " + d.shape().str() +
                                " differ in extents");
    }
    return bilinear_sample(image, d);
}

// ---------------------------------------------------------------------------
// Value-level conveniences (evaluated on a non-recording tape)

template <typename T>
Tensor<T> exp_velocity(const Tensor<T>& v)
{
    detail::require_finite(v, "exp_velocity");
    Tape<T> tape(false);
    return exp_velocity(tape.constant(v)).value();
}

template <typename T>
Tensor<T> compose(const Tensor<T>& outer, const Tensor<T>& inner)
{
    Tape<T> tape(false);
    return compose(tape.constant(outer), tape.constant(inner)).value();
}

template <typename T>
Tensor<T> upsample_deformation(const Tensor<T>& d, int height, int width)
{
    Tape<T> tape(false);
    return upsample_deformation(tape.constant(d), height, width).value();
}

template <typename T>
Tensor<T> smooth_velocity(const Tensor<T>& v, double sigma)
{
    Tape<T> tape(false);
    return smooth_velocity(tape.constant(v), sigma).value();
}

template <typename T>
Tensor<T> warp_image(const Tensor<T>& image, const Tensor<T>& d)
{
    Tape<T> tape(false);
    return warp_image(tape.constant(image), tape.constant(d)).value();
}

inline Image2D warp_image(const Image2D& image, const Tensor<float>& d)
{
    return to_image(warp_image(to_tensor<float>(image), d));
}

/// Nearest-neighbour label warp: out(x) = mask(round(d(x))), clamped to the raster.
template <typename T>
Mask2D warp_mask(const Mask2D& mask, const Tensor<T>& d)
{
    detail::require_field(d.shape, "warp_mask");
    if (mask.width != d.shape.w || mask.height != d.shape.h) {
        throw ContractViolation("warp_mask: mask and field differ in extents");
    }
    Mask2D out(mask.width, mask.height);
    const double hx = 0.5 * (mask.width - 1), hy = 0.5 * (mask.height - 1);
    for (int i = 0; i < mask.height; ++i) {
        for (int j = 0; j < mask.width; ++j) {
            const double px = (static_cast<double>(d(0, i, j)) + 1.0) * hx;
            const double py = (static_cast<double>(d(1, i, j)) + 1.0) * hy;
            const int sx = std::clamp(static_cast<int>(std::lround(px)), 0, mask.width - 1);
            const int sy = std::clamp(static_cast<int>(std::lround(py)), 0, mask.height - 1);
            out.at(j, i) = mask.at(sx, sy);
        }
    }
    return out;
}

/// Displacement d(x) - x converted to pixel units, as a [1,2,H,W] tensor.
template <typename T>
Tensor<double> displacement_px(const Tensor<T>& d)
{
    detail::require_field(d.shape, "displacement_px");
    const int h = d.shape.h, w = d.shape.w;
    const Tensor<T> grid = coord_grid<T>(h, w);
    Tensor<double> u(d.shape);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            u(0, i, j) = (static_cast<double>(d(0, i, j)) - grid(0, i, j)) * 0.5 * (w - 1);
            u(1, i, j) = (static_cast<double>(d(1, i, j)) - grid(1, i, j)) * 0.5 * (h - 1);
        }
    }
    return u;
}

/// Mean Euclidean length of the displacement in pixels.
template <typename T>
double mean_displacement_px(const Tensor<T>& d)
{
    const Tensor<double> u = displacement_px(d);
    const std::size_t n = u.shape.plane();
    double acc = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        acc += std::hypot(u.data[p], u.data[n + p]);
    }
    return acc / static_cast<double>(n);
}

/// Per-pixel determinant of the Jacobian of d in pixel units, [1,1,H,W].
/// Central differences inside, one-sided at the borders. Computed as I + grad(u)
/// with u the displacement, so the identity field gives exactly 1.
template <typename T>
Tensor<double> jacobian_det(const Tensor<T>& d)
{
    detail::require_field(d.shape, "jacobian_det");
    const int h = d.shape.h, w = d.shape.w;
    require(h >= 3 && w >= 3, "jacobian_det: field must be at least 3x3");
    const Tensor<double> u = displacement_px(d);
    auto diff = [&](int c, int i, int j, bool along_x) {
        const int n = along_x ? w : h;
        const int k = along_x ? j : i;
        auto at = [&](int m) { return along_x ? u(c, i, m) : u(c, m, j); };
        if (k == 0) {
            return at(1) - at(0);
        }
        if (k == n - 1) {
            return at(n - 1) - at(n - 2);
        }
        return 0.5 * (at(k + 1) - at(k - 1));
    };
    Tensor<double> det(Shape{1, 1, h, w});
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const double a = 1.0 + diff(0, i, j, true);
            const double b = diff(0, i, j, false);
            const double c = diff(1, i, j, true);
            const double e = 1.0 + diff(1, i, j, false);
            det(0, i, j) = a * e - b * c;
        }
    }
    return det;
}

}  // namespace diffreg

#endif  // DIFFREG_WARP_HPP
