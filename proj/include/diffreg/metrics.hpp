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
 * @file metrics.hpp
 *
 *****************************************************************************/

#ifndef DIFFREG_METRICS_HPP
#define DIFFREG_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "diffreg/errors.hpp"
#include "diffreg/image.hpp"
#include "diffreg/tensor.hpp"
#include "diffreg/warp.hpp"

namespace diffreg {

namespace detail {

inline void require_same_extents(const Mask2D& a, const Mask2D& b, const char* op)
{
    if (a.width != b.width || a.height != b.height) {
        throw ContractViolation(std::string(op) + ": masks differ in extents (" + std::to_string(a.width) + "x" +
                                std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                                std::to_string(b.height) + ")");
    }
}

}  // namespace detail

/// 2|A n B| / (|A| + |B|) for the pixels carrying `label`; 1 when both are empty.
inline double dice(const Mask2D& a, const Mask2D& b, std::uint8_t label)
{
    detail::require_same_extents(a, b, "dice");
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        const bool in_a = a.labels[i] == label;
        const bool in_b = b.labels[i] == label;
        na += in_a;
        nb += in_b;
        both += in_a && in_b;
    }
    if (na + nb == 0) {
        return 1.0;
    }
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

/// Region pixels with a 4-neighbour outside the region (or outside the raster).
inline std::vector<std::pair<int, int>> contour(const Mask2D& m, std::uint8_t label)
{
    std::vector<std::pair<int, int>> pts;
    auto inside = [&](int x, int y) {
        return x >= 0 && y >= 0 && x < m.width && y < m.height && m.at(x, y) == label;
    };
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (inside(x, y) &&
                (!inside(x - 1, y) || !inside(x + 1, y) || !inside(x, y - 1) || !inside(x, y + 1))) {
                pts.emplace_back(x, y);
            }
        }
    }
    return pts;
}

/// Symmetric Hausdorff distance (pixels) between the contours of `label` in a and b.
inline double hausdorff(const Mask2D& a, const Mask2D& b, std::uint8_t label)
{
    detail::require_same_extents(a, b, "hausdorff");
    const auto ca = contour(a, label);
    const auto cb = contour(b, label);
    if (ca.empty() || cb.empty()) {
        throw UndefinedMetric("hausdorff: undefined metric, label " + std::to_string(label) + " is empty in " +
                              (ca.empty() ? "the first" : "the second") + " mask");
    }
    auto directed = [](const auto& from, const auto& to) {
        double worst = 0.0;
        for (const auto& [px, py] : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& [qx, qy] : to) {
                const double dx = px - qx, dy = py - qy;
                best = std::min(best, dx * dx + dy * dy);
            }
            worst = std::max(worst, best);
        }
        return std::sqrt(worst);
    };
    return std::max(directed(ca, cb), directed(cb, ca));
}

/// Fraction of scores strictly greater than d.
inline double reliability(const std::vector<double>& dices, double d)
{
    require(!dices.empty(), "reliability: empty score list");
    const auto above = std::count_if(dices.begin(), dices.end(), [d](double v) { return v > d; });
    return static_cast<double>(above) / static_cast<double>(dices.size());
}

/// Pixels whose Jacobian determinant is <= 0 (folding or collapse).
template <typename T>
std::size_t count_nonpositive_jacobian(const Tensor<T>& field)
{
    const Tensor<double> det = jacobian_det(field);
    return static_cast<std::size_t>(std::count_if(det.data.begin(), det.data.end(), [](double v) { return v <= 0.0; }));
}

struct LabelScore {
    std::uint8_t label = 0;
    double dice = 0.0;
    double hausdorff_px = 0.0;
};

struct EvalReport {
    std::vector<LabelScore> labels;
    std::size_t nonpositive_jacobian = 0;

    double mean_dice() const
    {
        double s = 0.0;
        for (const auto& l : labels) {
            s += l.dice;
        }
        return labels.empty() ? 0.0 : s / labels.size();
    }
};

/// Warps the moving mask with `field` (nearest neighbour) and scores it against
/// the fixed mask for every requested label.
template <typename T>
EvalReport evaluate_registration(const Tensor<T>& field, const Mask2D& moving_mask, const Mask2D& fixed_mask,
                                 const std::vector<std::uint8_t>& labels)
{
    detail::require_same_extents(moving_mask, fixed_mask, "evaluate");
    const Mask2D warped = warp_mask(moving_mask, field);
    EvalReport r;
    r.nonpositive_jacobian = count_nonpositive_jacobian(field);
    for (auto label : labels) {
        r.labels.push_back({label, dice(warped, fixed_mask, label), hausdorff(warped, fixed_mask, label)});
    }
    return r;
}

/// Order statistic with linear interpolation, q in [0,1].
inline double percentile(std::vector<double> values, double q)
{
    require(!values.empty(), "percentile: empty input");
    std::sort(values.begin(), values.end());
    const double pos = q * (values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - lo) * (values[hi] - values[lo]);
}

}  // namespace diffreg

#endif  // DIFFREG_METRICS_HPP
