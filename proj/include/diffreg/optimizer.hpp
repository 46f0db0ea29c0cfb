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
 * @file optimizer.hpp
 *
 *****************************************************************************/

#ifndef DIFFREG_OPTIMIZER_HPP
#define DIFFREG_OPTIMIZER_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "diffreg/errors.hpp"
#include "diffreg/fcn.hpp"

namespace diffreg {

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moments shaped like NetParams, plus the step counter.
template <typename T = float>
struct AdamState {
    NetParams<T> m;
    NetParams<T> v;
    std::int64_t step = 0;

    static AdamState zeros_like(const NetParams<T>& p)
    {
        AdamState s;
        for (int i = 0; i < kLayers; ++i) {
            s.m.layers[i].weight = Tensor<T>(p.layers[i].weight.shape);
            s.m.layers[i].bias = Tensor<T>(p.layers[i].bias.shape);
        }
        s.v = s.m;
        return s;
    }
};

namespace detail {

template <typename T>
void adam_update(std::vector<T>& x, const std::vector<T>& g, std::vector<T>& m, std::vector<T>& v, double lr,
                 double c1, double c2, const AdamOptions& o)
{
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double gi = g[i];
        const double mi = o.beta1 * m[i] + (1.0 - o.beta1) * gi;
        const double vi = o.beta2 * v[i] + (1.0 - o.beta2) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        x[i] = static_cast<T>(x[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + o.epsilon));
    }
}

}  // namespace detail

/// One bias-corrected Adam update of every parameter.
template <typename T>
void adam_step(NetParams<T>& params, const NetParams<T>& grads, AdamState<T>& state, double lr,
               const AdamOptions& opts = {})
{
    require(lr >= 0.0, "adam_step: learning rate must be non-negative");
    for (int i = 0; i < kLayers; ++i) {
        for (const Tensor<T>* g : {&grads.layers[i].weight, &grads.layers[i].bias}) {
            if (!g->all_finite()) {
                throw NumericalError("adam_step: non-finite gradient in layer " + std::to_string(i + 1));
            }
        }
    }
    state.step += 1;
    const double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(state.step));
    for (int i = 0; i < kLayers; ++i) {
        detail::adam_update(params.layers[i].weight.data, grads.layers[i].weight.data, state.m.layers[i].weight.data,
                            state.v.layers[i].weight.data, lr, c1, c2, opts);
        detail::adam_update(params.layers[i].bias.data, grads.layers[i].bias.data, state.m.layers[i].bias.data,
                            state.v.layers[i].bias.data, lr, c1, c2, opts);
    }
}

}  // namespace diffreg

#endif  // DIFFREG_OPTIMIZER_HPP
