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
 * @file fcn.hpp
 *
 *****************************************************************************/

#ifndef DIFFREG_FCN_HPP
#define DIFFREG_FCN_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <random>

#include "diffreg/errors.hpp"
#include "diffreg/ops.hpp"
#include "diffreg/tape.hpp"
#include "diffreg/tensor.hpp"

namespace diffreg {

inline constexpr int kFilters = 24;
inline constexpr int kKernel = 5;
inline constexpr int kInputChannels = 4;   // x, y, phi_x, phi_y
inline constexpr int kOutputChannels = 2;  // v_x, v_y
inline constexpr int kLayers = 4;

template <typename T>
struct ConvLayer {
    Tensor<T> weight;  // [Cout, Cin, k, k]
    Tensor<T> bias;    // [1, 1, 1, Cout]
};

/// Weights of the four-layer velocity network. Shared by every resolution and
/// by both registration directions.
template <typename T = float>
struct NetParams {
    std::array<ConvLayer<T>, kLayers> layers;

    static constexpr int in_channels(int layer) { return layer == 0 ? kInputChannels : kFilters; }
    static constexpr int out_channels(int layer) { return layer == kLayers - 1 ? kOutputChannels : kFilters; }

    std::size_t count() const
    {
        std::size_t n = 0;
        for (const auto& l : layers) {
            n += l.weight.size() + l.bias.size();
        }
        return n;
    }

    template <typename U>
    NetParams<U> cast() const
    {
        NetParams<U> out;
        for (int i = 0; i < kLayers; ++i) {
            out.layers[i].weight = layers[i].weight.template cast<U>();
            out.layers[i].bias = layers[i].bias.template cast<U>();
        }
        return out;
    }

    /// Flat view order: layer by layer, weight then bias.
    template <typename F>
    void for_each_tensor(F&& f)
    {
        for (auto& l : layers) {
            f(l.weight);
            f(l.bias);
        }
    }
    template <typename F>
    void for_each_tensor(F&& f) const
    {
        for (const auto& l : layers) {
            f(l.weight);
            f(l.bias);
        }
    }
};

/// Layers 1-3: U(-b, b) with b = sqrt(6 / fan_in), fan_in = Cin * 25, zero bias.
/// Layer 4 is all zero so the first forward pass yields a zero velocity.
template <typename T = float>
NetParams<T> init_params(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    NetParams<T> p;
    for (int i = 0; i < kLayers; ++i) {
        const int cin = NetParams<T>::in_channels(i);
        const int cout = NetParams<T>::out_channels(i);
        auto& layer = p.layers[i];
        layer.weight = Tensor<T>(Shape{cout, cin, kKernel, kKernel});
        layer.bias = Tensor<T>(Shape{1, 1, 1, cout});
        if (i == kLayers - 1) {
            continue;
        }
        const double bound = std::sqrt(6.0 / (cin * kKernel * kKernel));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (T& w : layer.weight.data) {
            w = static_cast<T>(dist(rng));
        }
    }
    return p;
}

/// NetParams registered as tape leaves for one forward/backward pass.
template <typename T>
struct ParamVars {
    std::array<Var<T>, kLayers> weight;
    std::array<Var<T>, kLayers> bias;

    static ParamVars attach(Tape<T>& tape, const NetParams<T>& p)
    {
        ParamVars v;
        for (int i = 0; i < kLayers; ++i) {
            v.weight[i] = tape.leaf(p.layers[i].weight);
            v.bias[i] = tape.leaf(p.layers[i].bias);
        }
        return v;
    }

    /// Collects d(loss)/d(theta) after Tape::backward, shaped like NetParams.
    NetParams<T> gradients(Tape<T>& tape) const
    {
        NetParams<T> g;
        for (int i = 0; i < kLayers; ++i) {
            g.layers[i].weight = tape.gradient(weight[i]);
            g.layers[i].bias = tape.gradient(bias[i]);
        }
        return g;
    }
};

/// Velocity field [1,2,H,W] from the channel stack [coords; deformation]:
/// three conv+ReLU blocks followed by a linear conv, all 5x5 with same padding.
template <typename T>
Var<T> fcn_forward(const ParamVars<T>& params, Var<T> coords, Var<T> deformation)
{
    if (coords.shape().c != 2 || deformation.shape().c != 2 || coords.shape().h != deformation.shape().h ||
        coords.shape().w != deformation.shape().w) {
        throw ContractViolation("fcn_forward: coords " + coords.shape().str() + " and deformation " +
                                deformation.shape().str() + " must both be [1,2,H,W] with equal extents");
    }
    Var<T> x = concat_channels(coords, deformation);
    for (int i = 0; i < kLayers; ++i) {
        x = conv2d(x, params.weight[i], params.bias[i], kKernel / 2);
        if (i + 1 < kLayers) {
            x = relu(x);
        }
    }
    return x;
}

}  // namespace diffreg

#endif  // DIFFREG_FCN_HPP
