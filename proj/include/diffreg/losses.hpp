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
 * @file losses.hpp
 *
 *****************************************************************************/

#ifndef DIFFREG_LOSSES_HPP
#define DIFFREG_LOSSES_HPP

#include <Eigen/Core>

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "diffreg/errors.hpp"
#include "diffreg/ops.hpp"
#include "diffreg/tape.hpp"
#include "diffreg/warp.hpp"

namespace diffreg {

enum class LossMode { MSE, SSIM, SSIM_MI };

inline std::string to_string(LossMode m)
{
    switch (m) {
    case LossMode::MSE:
        return "mse";
    case LossMode::SSIM:
        return "ssim";
    case LossMode::SSIM_MI:
        return "ssim+mi";
    }
    return "?";
}

inline std::optional<LossMode> parse_loss_mode(const std::string& s)
{
    if (s == "mse") {
        return LossMode::MSE;
    }
    if (s == "ssim") {
        return LossMode::SSIM;
    }
    if (s == "ssim+mi" || s == "ssim_mi") {
        return LossMode::SSIM_MI;
    }
    return std::nullopt;
}

struct LossConfig {
    LossMode mode = LossMode::SSIM_MI;
    double alpha = 0.5;  // inverse-consistency weight
    double gamma = 2.5;  // identity-regularizer weight
    int mi_bins = 16;
    int ssim_window = 11;
    double ssim_sigma = 1.5;

    void validate() const
    {
        if (!(alpha >= 0.0) || !(gamma >= 0.0)) {
            throw ConfigError("loss weights alpha and gamma must be non-negative");
        }
        if (mi_bins < 4) {
            throw ConfigError("mi_bins must be at least 4, got " + std::to_string(mi_bins));
        }
        if (ssim_window < 1 || ssim_window % 2 == 0) {
            throw ConfigError("ssim_window must be odd, got " + std::to_string(ssim_window));
        }
    }
};

inline constexpr double kSsimC1 = 1e-4;  // (0.01 * L)^2 with dynamic range L = 1
inline constexpr double kSsimC2 = 9e-4;  // (0.03 * L)^2
inline constexpr double kMiFloor = 1e-12;

/// Mean structural similarity with Gaussian local statistics (reflect borders).
template <typename T>
Var<T> ssim(Var<T> a, Var<T> b, int window = 11, double sigma = 1.5)
{
    detail::require_same_shape(a.shape(), b.shape(), "ssim");
    if (a.shape().h < window || a.shape().w < window) {
        throw ContractViolation("ssim: image " + a.shape().str() + " is smaller than the " + std::to_string(window) +
                                "-pixel window");
    }
    const int r = window / 2;
    auto blur = [&](Var<T> x) { return gaussian_blur(x, sigma, r); };
    Var<T> mu_a = blur(a);
    Var<T> mu_b = blur(b);
    Var<T> mu_aa = square(mu_a);
    Var<T> mu_bb = square(mu_b);
    Var<T> mu_ab = mul(mu_a, mu_b);
    Var<T> var_a = sub(blur(square(a)), mu_aa);
    Var<T> var_b = sub(blur(square(b)), mu_bb);
    Var<T> cov = sub(blur(mul(a, b)), mu_ab);
    Var<T> num = mul(add_scalar(scale(mu_ab, 2.0), kSsimC1), add_scalar(scale(cov, 2.0), kSsimC2));
    Var<T> den = mul(add_scalar(add(mu_aa, mu_bb), kSsimC1), add_scalar(add(var_a, var_b), kSsimC2));
    return mean(div(num, den));
}

namespace detail {

// Per-pixel Parzen weights over `bins` centres (k + 0.5)/bins, sigma = 1/bins,
// normalized to sum to one. Shape [pixels x bins].
template <typename T>
Eigen::MatrixXd parzen_weights(const std::vector<T>& values, int bins)
{
    const double sigma = 1.0 / bins;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    Eigen::MatrixXd w(static_cast<Eigen::Index>(values.size()), bins);
    // Adjacent-bin ratio: e_{k+1} = e_k * r_k with r_{k+1} = r_k * q.
    const double step = 1.0 / bins;
    const double q = std::exp(-step * step * 2.0 * inv2s2);
    for (Eigen::Index p = 0; p < w.rows(); ++p) {
        const double v = values[p];
        const double d0 = v - 0.5 * step;
        double e = std::exp(-d0 * d0 * inv2s2);
        double r = std::exp((2.0 * d0 * step - step * step) * inv2s2);
        double total = 0.0;
        for (int k = 0; k < bins; ++k) {
            w(p, k) = e;
            total += e;
            e *= r;
            r *= q;
        }
        w.row(p) /= total;
    }
    return w;
}

// d(weights)/d(value) chained with an upstream gradient on the weights.
inline double parzen_backward(double v, const Eigen::MatrixXd& w, const Eigen::MatrixXd& gw, Eigen::Index p, int bins)
{
    const double sigma = 1.0 / bins;
    const double inv_s2 = 1.0 / (sigma * sigma);
    double mean_slope = 0.0;
    for (int k = 0; k < bins; ++k) {
        mean_slope += w(p, k) * (-(v - (k + 0.5) / bins) * inv_s2);
    }
    double g = 0.0;
    for (int k = 0; k < bins; ++k) {
        const double slope = -(v - (k + 0.5) / bins) * inv_s2;
        g += gw(p, k) * w(p, k) * (slope - mean_slope);
    }
    return g;
}

}  // namespace detail

/// Mutual information (nats) of the Parzen soft-binned joint histogram of a and b.
template <typename T>
Var<T> soft_mutual_information(Var<T> a, Var<T> b, int bins = 16)
{
    detail::require_same_shape(a.shape(), b.shape(), "soft_mutual_information");
    require(bins >= 4, "soft_mutual_information: need at least 4 bins");
    auto wa = std::make_shared<Eigen::MatrixXd>(detail::parzen_weights(a.value().data, bins));
    auto wb = std::make_shared<Eigen::MatrixXd>(detail::parzen_weights(b.value().data, bins));
    const double n = static_cast<double>(wa->rows());
    auto joint = std::make_shared<Eigen::MatrixXd>(wa->transpose() * *wb / n);
    const Eigen::VectorXd pa = joint->rowwise().sum();
    const Eigen::RowVectorXd pb = joint->colwise().sum();
    double mi = 0.0;
    for (int k = 0; k < bins; ++k) {
        for (int l = 0; l < bins; ++l) {
            const double p = (*joint)(k, l);
            if (p >= kMiFloor) {
                mi += p * (std::log(p) - std::log(pa(k)) - std::log(pb(l)));
            }
        }
    }
    Tensor<T> out(Shape{}, static_cast<T>(mi));
    return a.tape->record(
        "soft_mutual_information", std::move(out), {a, b},
        [a, b, bins, n, wa, wb, joint](Tape<T>& t, const std::vector<T>& g) {
            const Eigen::MatrixXd& P = *joint;
            const Eigen::VectorXd pa = P.rowwise().sum();
            const Eigen::RowVectorXd pb = P.colwise().sum();
            Eigen::VectorXd row_mass = Eigen::VectorXd::Zero(bins);
            Eigen::RowVectorXd col_mass = Eigen::RowVectorXd::Zero(bins);
            for (int k = 0; k < bins; ++k) {
                for (int l = 0; l < bins; ++l) {
                    if (P(k, l) >= kMiFloor) {
                        row_mass(k) += P(k, l);
                        col_mass(l) += P(k, l);
                    }
                }
            }
            // dMI/dP including the dependence of both marginals on P.
            Eigen::MatrixXd G(bins, bins);
            for (int k = 0; k < bins; ++k) {
                for (int l = 0; l < bins; ++l) {
                    double d = -row_mass(k) / pa(k) - col_mass(l) / pb(l);
                    if (P(k, l) >= kMiFloor) {
                        d += std::log(P(k, l)) + 1.0 - std::log(pa(k)) - std::log(pb(l));
                    }
                    G(k, l) = d * g[0];
                }
            }
            if (a.requires_grad()) {
                const Eigen::MatrixXd gwa = (*wb * G.transpose()) / n;
                auto& ga = t.grad(a);
                const auto& av = a.value().data;
                for (Eigen::Index p = 0; p < wa->rows(); ++p) {
                    ga[p] += static_cast<T>(detail::parzen_backward(av[p], *wa, gwa, p, bins));
                }
            }
            if (b.requires_grad()) {
                const Eigen::MatrixXd gwb = (*wa * G) / n;
                auto& gb = t.grad(b);
                const auto& bv = b.value().data;
                for (Eigen::Index p = 0; p < wb->rows(); ++p) {
                    gb[p] += static_cast<T>(detail::parzen_backward(bv[p], *wb, gwb, p, bins));
                }
            }
        });
}

/// Dissimilarity of `fixed` and `warped`; lower is better in every mode.
template <typename T>
Var<T> dissimilarity(Var<T> fixed, Var<T> warped, const LossConfig& cfg)
{
    switch (cfg.mode) {
    case LossMode::MSE:
        return mse(fixed, warped);
    case LossMode::SSIM:
        return add_scalar(scale(ssim(fixed, warped, cfg.ssim_window, cfg.ssim_sigma), -1.0), 1.0);
    case LossMode::SSIM_MI: {
        Var<T> s = add_scalar(scale(ssim(fixed, warped, cfg.ssim_window, cfg.ssim_sigma), -1.0), 1.0);
        return sub(s, soft_mutual_information(fixed, warped, cfg.mi_bins));
    }
    }
    throw ContractViolation("dissimilarity: unknown loss mode");
}

/// Deformations at every level, finest first. `backward` is empty in the
/// forward-only objective.
template <typename T>
struct MultiresFields {
    std::vector<Var<T>> forward;
    std::vector<Var<T>> backward;

    bool bidirectional() const { return !backward.empty(); }
};

/// Per-family sums of the objective, for reporting.
struct LossBreakdown {
    double similarity = 0.0;
    double consistency = 0.0;
    double regularity = 0.0;
};

/// Objective summed over levels: similarity of both warps, alpha-weighted
/// inverse consistency in both composition orders and gamma-weighted squared
/// displacement of both fields. With no backward fields only the forward
/// similarity and forward regularizer remain.
template <typename T>
Var<T> total_loss(const std::vector<Var<T>>& fixed, const std::vector<Var<T>>& moving,
                  const MultiresFields<T>& fields, const std::vector<Var<T>>& grids, const LossConfig& cfg,
                  LossBreakdown* breakdown = nullptr)
{
    const std::size_t levels = fixed.size();
    if (levels == 0 || moving.size() != levels || grids.size() != levels || fields.forward.size() != levels ||
        (fields.bidirectional() && fields.backward.size() != levels)) {
        throw ContractViolation("total_loss: every pyramid level needs images, grid and fields");
    }
    std::optional<Var<T>> total;
    auto accumulate = [&](Var<T> term, double weight, double* bucket) {
        Var<T> weighted = weight == 1.0 ? term : scale(term, weight);
        if (bucket) {
            *bucket += static_cast<double>(weighted.value().data[0]);
        }
        total = total ? add(*total, weighted) : weighted;
    };
    LossBreakdown local;
    for (std::size_t t = 0; t < levels; ++t) {
        Var<T> df = fields.forward[t];
        accumulate(dissimilarity(fixed[t], warp_image(moving[t], df), cfg), 1.0, &local.similarity);
        // mean ||D - x||^2 over pixels = 2 * mse over both channels
        accumulate(mse(df, grids[t]), 2.0 * cfg.gamma, &local.regularity);
        if (!fields.bidirectional()) {
            continue;
        }
        Var<T> db = fields.backward[t];
        accumulate(dissimilarity(moving[t], warp_image(fixed[t], db), cfg), 1.0, &local.similarity);
        accumulate(mse(compose(db, df), grids[t]), cfg.alpha, &local.consistency);
        accumulate(mse(compose(df, db), grids[t]), cfg.alpha, &local.consistency);
        accumulate(mse(db, grids[t]), 2.0 * cfg.gamma, &local.regularity);
    }
    if (breakdown) {
        *breakdown = local;
    }
    return *total;
}

}  // namespace diffreg

#endif  // DIFFREG_LOSSES_HPP
