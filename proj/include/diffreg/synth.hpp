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
 * @file synth.hpp
 *
 *****************************************************************************/

#ifndef DIFFREG_SYNTH_HPP
#define DIFFREG_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "diffreg/errors.hpp"
#include "diffreg/image.hpp"
#include "diffreg/ops.hpp"
#include "diffreg/pyramid.hpp"
#include "diffreg/tensor.hpp"
#include "diffreg/warp.hpp"

namespace diffreg {

/// Label values of the cardiac-like phantom.
inline constexpr std::uint8_t kPoolLabel = 1;
inline constexpr std::uint8_t kWallLabel = 2;

/// Random velocity whose largest component (in pixels) equals `amplitude_px`.
/// Gaussian white noise per channel, blurred with `sigma_px`, then rescaled and
/// converted to normalized units.
inline Tensor<float> random_smooth_velocity(std::uint64_t seed, double amplitude_px, double sigma_px, int height,
                                            int width)
{
    require(amplitude_px >= 0.0, "random_smooth_velocity: amplitude must be non-negative");
    if (amplitude_px > 0.25 * std::min(height, width)) {
        throw ContractViolation("random_smooth_velocity: amplitude " + std::to_string(amplitude_px) +
                                " px exceeds a quarter of the smallest extent (" +
                                std::to_string(0.25 * std::min(height, width)) + " px)");
    }
    require(sigma_px >= 0.0, "random_smooth_velocity: sigma must be non-negative");
    Tensor<double> noise(Shape{1, 2, height, width});
    if (amplitude_px == 0.0) {
        return noise.cast<float>();
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : noise.data) {
        v = normal(rng);
    }
    Tape<double> tape(false);
    Tensor<double> smooth =
        gaussian_blur(tape.constant(noise), sigma_px, static_cast<int>(std::ceil(3.0 * sigma_px))).value();
    double peak = 0.0;
    for (double v : smooth.data) {
        peak = std::max(peak, std::abs(v));
    }
    Tensor<float> out(smooth.shape);
    const double sx = amplitude_px / peak * 2.0 / (width - 1);
    const double sy = amplitude_px / peak * 2.0 / (height - 1);
    const std::size_t plane = smooth.shape.plane();
    for (std::size_t p = 0; p < plane; ++p) {
        out.data[p] = static_cast<float>(smooth.data[p] * sx);
        out.data[plane + p] = static_cast<float>(smooth.data[plane + p] * sy);
    }
    return out;
}

/// Largest velocity component of a [1,2,H,W] field, in pixels.
template <typename T>
double max_component_px(const Tensor<T>& v)
{
    const std::size_t plane = v.shape.plane();
    double peak = 0.0;
    for (std::size_t p = 0; p < plane; ++p) {
        peak = std::max(peak, std::abs(static_cast<double>(v.data[p])) * 0.5 * (v.shape.w - 1));
        peak = std::max(peak, std::abs(static_cast<double>(v.data[plane + p])) * 0.5 * (v.shape.h - 1));
    }
    return peak;
}

struct PhantomParams {
    int size = 64;
    double pool_radius = 0.17;    // fractions of the image side
    double wall_radius = 0.30;
    double elongation = 0.12;     // max relative difference of the ellipse axes
    double center_jitter = 0.05;
    double pool_intensity = 0.9;
    double wall_intensity = 0.45;
    double background = 0.15;
    double texture = 0.3;          // amplitude of the background pattern
    int texture_waves = 12;
    double texture_cycles = 10.0;  // max spatial frequency, cycles per image side
    double edge_blur_px = 1.0;
};

struct Phantom {
    Image2D image;
    Mask2D mask;
};

/// Blurred two-compartment phantom (bright pool inside a darker wall) on a
/// smoothly textured background, with matching labels.
inline Phantom make_phantom(std::uint64_t seed, const PhantomParams& p = {})
{
    require(p.size >= 16, "make_phantom: size must be at least 16");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int n = p.size;
    const double cx = 0.5 * (n - 1) * (1.0 + p.center_jitter * 2.0 * u(rng));
    const double cy = 0.5 * (n - 1) * (1.0 + p.center_jitter * 2.0 * u(rng));
    const double ax = 1.0 + p.elongation * u(rng);
    const double ay = 1.0 + p.elongation * u(rng);
    const double angle = 3.14159265358979323846 * u(rng);
    const double ca = std::cos(angle), sa = std::sin(angle);

    // Low-frequency background pattern: a few random cosine waves.
    struct Wave {
        double kx, ky, phase;
    };
    std::vector<Wave> waves;
    for (int i = 0; i < p.texture_waves; ++i) {
        waves.push_back({u(rng) * p.texture_cycles / n, u(rng) * p.texture_cycles / n, 3.14159265358979323846 * u(rng)});
    }

    Phantom out{Image2D(n, n), Mask2D(n, n)};
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double dx = x - cx, dy = y - cy;
            const double rx = (ca * dx + sa * dy) / ax, ry = (-sa * dx + ca * dy) / ay;
            const double r = std::hypot(rx, ry) / n;
            double bg = p.background;
            for (const auto& w : waves) {
                bg += p.texture / waves.size() * std::cos(2.0 * 3.14159265358979323846 * (w.kx * x + w.ky * y) + w.phase);
            }
            double v = bg;
            std::uint8_t label = 0;
            if (r <= p.pool_radius) {
                v = p.pool_intensity;
                label = kPoolLabel;
            } else if (r <= p.wall_radius) {
                v = p.wall_intensity;
                label = kWallLabel;
            }
            out.image.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            out.mask.at(x, y) = label;
        }
    }
    if (p.edge_blur_px > 0.0) {
        Tape<float> tape(false);
        const auto blurred = gaussian_blur(tape.constant(to_tensor<float>(out.image)), p.edge_blur_px,
                                           static_cast<int>(std::ceil(3.0 * p.edge_blur_px)))
                                 .value();
        out.image = to_image(blurred);
    }
    return out;
}

/// Fixed/moving pair related by a known diffeomorphism.
///
/// moving = fixed o exp(v), so a forward registration field should recover
/// gt_forward = exp(-v) (moving o gt_forward ~ fixed) and a backward field
/// should recover gt_backward = exp(v).
struct SyntheticPair {
    Image2D fixed;
    Image2D moving;
    Mask2D fixed_mask;
    Mask2D moving_mask;
    Tensor<float> velocity;
    Tensor<float> gt_forward;
    Tensor<float> gt_backward;
};

inline SyntheticPair make_synthetic_pair(const Image2D& base, const Mask2D& base_mask, const Tensor<float>& v)
{
    require(base.width == base_mask.width && base.height == base_mask.height,
            "make_synthetic_pair: image and mask extents differ");
    require(v.shape == (Shape{1, 2, base.height, base.width}), "make_synthetic_pair: velocity extents differ");
    SyntheticPair pair;
    pair.velocity = v;
    pair.gt_backward = exp_velocity(v);
    Tensor<float> neg = v;
    for (float& x : neg.data) {
        x = -x;
    }
    pair.gt_forward = exp_velocity(neg);
    pair.fixed = base;
    pair.fixed_mask = base_mask;
    pair.moving = warp_image(base, pair.gt_backward);
    pair.moving_mask = warp_mask(base_mask, pair.gt_backward);
    return pair;
}

/// Phantom plus random velocity, both derived from one seed (phantom from
/// 2*seed, velocity from 2*seed + 1).
inline SyntheticPair make_seeded_pair(std::uint64_t seed, int size, double amplitude_px, double sigma_px)
{
    PhantomParams params;
    params.size = size;
    const Phantom ph = make_phantom(2 * seed, params);
    const Tensor<float> v = random_smooth_velocity(2 * seed + 1, amplitude_px, sigma_px, size, size);
    return make_synthetic_pair(ph.image, ph.mask, v);
}

/// Mean endpoint distance (pixels) between two deformation fields, optionally
/// ignoring a border of `margin` pixels.
template <typename T>
double mean_endpoint_error_px(const Tensor<T>& a, const Tensor<T>& b, int margin = 0)
{
    require(a.shape == b.shape, "mean_endpoint_error_px: extents differ");
    const int h = a.shape.h, w = a.shape.w;
    double acc = 0.0;
    std::size_t count = 0;
    for (int i = margin; i < h - margin; ++i) {
        for (int j = margin; j < w - margin; ++j) {
            const double dx = (static_cast<double>(a(0, i, j)) - b(0, i, j)) * 0.5 * (w - 1);
            const double dy = (static_cast<double>(a(1, i, j)) - b(1, i, j)) * 0.5 * (h - 1);
            acc += std::hypot(dx, dy);
            ++count;
        }
    }
    require(count > 0, "mean_endpoint_error_px: margin leaves no pixels");
    return acc / static_cast<double>(count);
}

}  // namespace diffreg

#endif  // DIFFREG_SYNTH_HPP
