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
 * @file engine.hpp
 *
 *****************************************************************************/

#ifndef DIFFREG_ENGINE_HPP
#define DIFFREG_ENGINE_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "diffreg/errors.hpp"
#include "diffreg/fcn.hpp"
#include "diffreg/image.hpp"
#include "diffreg/losses.hpp"
#include "diffreg/optimizer.hpp"
#include "diffreg/pyramid.hpp"
#include "diffreg/tape.hpp"
#include "diffreg/warp.hpp"

namespace diffreg {

/// How a level's increment is folded into the upsampled coarser deformation.
enum class UpdateRule {
    Compositional,  // D_t = D_up o exp(V_t)  (diffeomorphic, default)
    Additive,       // D_t = D_up + V_t       (ablation only; no exponential)
};

struct RegistrationConfig {
    int levels = 2;
    int iterations = 800;
    double lr = 5e-4;
    double lambda = 5.0;
    std::optional<double> alpha_override;
    std::optional<double> gamma_override;
    LossMode loss = LossMode::SSIM_MI;
    double sigma = 1.0;  // velocity low-pass, pixels at every level
    bool bidirectional = true;
    std::uint64_t seed = 0;
    int mi_bins = 16;
    int ssim_window = 11;
    UpdateRule update = UpdateRule::Compositional;

    double alpha() const { return alpha_override.value_or(1.0 / levels); }
    double gamma() const { return gamma_override.value_or(lambda / levels); }

    LossConfig loss_config() const
    {
        LossConfig c;
        c.mode = loss;
        c.alpha = alpha();
        c.gamma = gamma();
        c.mi_bins = mi_bins;
        c.ssim_window = ssim_window;
        return c;
    }

    void validate() const
    {
        if (levels < 1) {
            throw ConfigError("levels must be at least 1");
        }
        if (iterations < 1) {
            throw ConfigError("iterations must be at least 1");
        }
        if (!(lr > 0.0)) {
            throw ConfigError("learning rate must be positive");
        }
        if (!(lambda >= 0.0)) {
            throw ConfigError("lambda must be non-negative");
        }
        if (!(sigma >= 0.0)) {
            throw ConfigError("smoothing sigma must be non-negative");
        }
        loss_config().validate();
    }
};

struct RegistrationResult {
    Tensor<float> forward;   // D^F at the finest level: warps moving onto fixed
    Tensor<float> backward;  // D^B at the finest level; empty when forward-only
    Image2D warped_moving;   // moving(D^F(x))
    Image2D warped_fixed;    // fixed(D^B(x)); empty when forward-only
    std::vector<double> loss_trace;  // pre-step loss of every iteration
    double seconds = 0.0;
    RegistrationConfig config;
    NetParams<float> params;
};

/// Builds D^F_t (and D^B_t) for every level from the shared network.
/// `grids` hold coord_grid of each level, finest first.
///
/// Per direction, with coordinate sign s (+1 forward, -1 backward):
///   coarsest:      D_K = exp(smooth(f([s X_K; 0])))
///   t = K-1 .. 1:  D_up = upsample(D_{t+1});  D_t = D_up o exp(smooth(f([s X_t; D_up])))
template <typename T>
MultiresFields<T> build_multires_deformations(const ParamVars<T>& params, const std::vector<Var<T>>& grids,
                                              const RegistrationConfig& cfg)
{
    require(!grids.empty(), "build_multires_deformations: no levels");
    Tape<T>& tape = *grids.front().tape;
    const int levels = static_cast<int>(grids.size());
    MultiresFields<T> fields;
    const int directions = cfg.bidirectional ? 2 : 1;
    for (int dir = 0; dir < directions; ++dir) {
        std::vector<Var<T>> out(levels);
        const double sign = dir == 0 ? 1.0 : -1.0;
        std::optional<Var<T>> current;
        for (int t = levels - 1; t >= 0; --t) {
            const Shape s = grids[t].shape();
            Var<T> coords = dir == 0 ? grids[t] : scale(grids[t], sign);
            Var<T> prior = current ? upsample_deformation(*current, s.h, s.w) : tape.constant(Tensor<T>(s));
            Var<T> velocity = smooth_velocity(fcn_forward(params, coords, prior), cfg.sigma);
            if (cfg.update == UpdateRule::Additive) {
                current = add(current ? prior : grids[t], velocity);
            } else {
                Var<T> step = exp_velocity(velocity);
                current = current ? compose(prior, step) : step;
            }
            out[t] = *current;
        }
        (dir == 0 ? fields.forward : fields.backward) = std::move(out);
    }
    return fields;
}

namespace detail {

template <typename T>
struct PreparedPair {
    std::vector<Tensor<T>> fixed;
    std::vector<Tensor<T>> moving;
    std::vector<Tensor<T>> grids;
};

template <typename T>
PreparedPair<T> prepare_pair(const Image2D& moving, const Image2D& fixed, const RegistrationConfig& cfg)
{
    if (!moving.same_extents(fixed)) {
        throw ContractViolation("register: moving image is " + std::to_string(moving.width) + "x" +
                                std::to_string(moving.height) + " but fixed image is " + std::to_string(fixed.width) +
                                "x" + std::to_string(fixed.height));
    }
    cfg.validate();
    const ImagePyramid pf = gaussian_pyramid(fixed, cfg.levels);
    const ImagePyramid pm = gaussian_pyramid(moving, cfg.levels);
    PreparedPair<T> p;
    for (int t = 0; t < cfg.levels; ++t) {
        const Image2D& level = pf.levels[t];
        if (cfg.loss != LossMode::MSE && (level.width < cfg.ssim_window || level.height < cfg.ssim_window)) {
            throw ConfigError("pyramid level " + std::to_string(t + 1) + " (" + std::to_string(level.width) + "x" +
                              std::to_string(level.height) + ") is smaller than the SSIM window; reduce levels");
        }
        p.fixed.push_back(to_tensor<T>(level));
        p.moving.push_back(to_tensor<T>(pm.levels[t]));
        p.grids.push_back(coord_grid<T>(level.height, level.width));
    }
    return p;
}

template <typename T>
std::vector<Var<T>> constants(Tape<T>& tape, const std::vector<Tensor<T>>& values)
{
    std::vector<Var<T>> out;
    out.reserve(values.size());
    for (const auto& v : values) {
        out.push_back(tape.constant(v));
    }
    return out;
}

}  // namespace detail

/// Objective value and parameter gradient for one network state. Used by the
/// optimization loop and by gradient checks.
template <typename T>
struct Evaluation {
    double loss = 0.0;
    NetParams<T> grads;
    LossBreakdown terms;
};

template <typename T>
Evaluation<T> evaluate_objective(const NetParams<T>& params, const detail::PreparedPair<T>& pair,
                                 const RegistrationConfig& cfg, bool with_gradient)
{
    Tape<T> tape(with_gradient);
    const ParamVars<T> pv = ParamVars<T>::attach(tape, params);
    const auto fixed = detail::constants(tape, pair.fixed);
    const auto moving = detail::constants(tape, pair.moving);
    const auto grids = detail::constants(tape, pair.grids);
    const MultiresFields<T> fields = build_multires_deformations(pv, grids, cfg);
    Evaluation<T> ev;
    Var<T> loss = total_loss(fixed, moving, fields, grids, cfg.loss_config(), &ev.terms);
    ev.loss = static_cast<double>(loss.value().data[0]);
    if (with_gradient) {
        tape.backward(loss);
        ev.grads = pv.gradients(tape);
    }
    return ev;
}

/// Finest-level deformations for a given network state.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> finest_fields(const NetParams<T>& params, const std::vector<Tensor<T>>& grids,
                                              const RegistrationConfig& cfg)
{
    Tape<T> tape(false);
    const ParamVars<T> pv = ParamVars<T>::attach(tape, params);
    const MultiresFields<T> f = build_multires_deformations(pv, detail::constants(tape, grids), cfg);
    return {f.forward.front().value(), f.bidirectional() ? f.backward.front().value() : Tensor<T>{}};
}

/// Called after each iteration with (iteration, pre-step loss).
using ProgressFn = std::function<void(int, double)>;

/// Optimizes a freshly initialized network for this pair alone and returns the
/// finest-level deformations and warps.
inline RegistrationResult register_images(const Image2D& moving, const Image2D& fixed, const RegistrationConfig& cfg,
                                          const ProgressFn& progress = {})
{
    const auto start = std::chrono::steady_clock::now();
    const auto pair = detail::prepare_pair<float>(moving, fixed, cfg);

    RegistrationResult result;
    result.config = cfg;
    NetParams<float> params = init_params<float>(cfg.seed);
    AdamState<float> adam = AdamState<float>::zeros_like(params);
    result.loss_trace.reserve(cfg.iterations);

    for (int it = 0; it < cfg.iterations; ++it) {
        Evaluation<float> ev;
        try {
            ev = evaluate_objective(params, pair, cfg, true);
        } catch (const NumericalError& e) {
            throw NumericalError("iteration " + std::to_string(it) + ": " + e.what());
        }
        if (!std::isfinite(ev.loss)) {
            throw NumericalError("iteration " + std::to_string(it) + ": loss is not finite");
        }
        result.loss_trace.push_back(ev.loss);
        adam_step(params, ev.grads, adam, cfg.lr);
        if (progress) {
            progress(it, ev.loss);
        }
    }

    auto [fwd, bwd] = finest_fields(params, pair.grids, cfg);
    result.forward = std::move(fwd);
    result.backward = std::move(bwd);
    result.warped_moving = warp_image(moving, result.forward);
    if (cfg.bidirectional) {
        result.warped_fixed = warp_image(fixed, result.backward);
    }
    result.params = std::move(params);
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace diffreg

#endif  // DIFFREG_ENGINE_HPP
