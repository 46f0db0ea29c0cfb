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
 * @file test_fcn.cpp
 *
 *****************************************************************************/

#include "catch_amalgamated.hpp"

#include <cmath>

#include "diffreg/fcn.hpp"
#include "test_support.hpp"

using namespace diffreg;

namespace {

// Init plus a small random last layer so the output is not trivially zero.
NetParams<double> random_params(std::uint64_t seed)
{
    NetParams<double> p = init_params<double>(seed);
    p.layers[3].weight = testing::random_tensor(p.layers[3].weight.shape, seed + 100, -0.05, 0.05);
    p.layers[3].bias = testing::random_tensor(p.layers[3].bias.shape, seed + 101, -0.05, 0.05);
    for (int i = 0; i < 3; ++i) {
        p.layers[i].bias = testing::random_tensor(p.layers[i].bias.shape, seed + 200 + i, -0.1, 0.1);
    }
    return p;
}

template <typename T>
Tensor<T> run(const NetParams<T>& p, const Tensor<T>& coords, const Tensor<T>& def)
{
    Tape<T> tape(false);
    const auto pv = ParamVars<T>::attach(tape, p);
    return fcn_forward(pv, tape.constant(coords), tape.constant(def)).value();
}

// vars: 4 weights, 4 biases, coords, deformation -> mean(out^2)
template <typename T>
Var<T> mean_square_output(Tape<T>&, const std::vector<Var<T>>& v)
{
    ParamVars<T> pv;
    for (int i = 0; i < kLayers; ++i) {
        pv.weight[i] = v[2 * i];
        pv.bias[i] = v[2 * i + 1];
    }
    const Var<T> out = fcn_forward(pv, v[8], v[9]);
    return mean(mul(out, out));
}

}  // namespace

TEST_CASE("parameter shapes follow the four-layer layout")
{
    const NetParams<float> p = init_params<float>(0);
    CHECK(p.layers[0].weight.shape == (Shape{24, 4, 5, 5}));
    CHECK(p.layers[1].weight.shape == (Shape{24, 24, 5, 5}));
    CHECK(p.layers[2].weight.shape == (Shape{24, 24, 5, 5}));
    CHECK(p.layers[3].weight.shape == (Shape{2, 24, 5, 5}));
    CHECK(p.layers[0].bias.size() == 24);
    CHECK(p.layers[3].bias.size() == 2);
    CHECK(p.count() == 2424 + 2 * 14424 + 1202);
}

TEST_CASE("init bounds, zero biases and zero last layer")
{
    for (std::uint64_t seed : {0u, 1u, 17u}) {
        const NetParams<float> p = init_params<float>(seed);
        const double b1 = std::sqrt(6.0 / 100.0);
        const double b2 = std::sqrt(6.0 / 600.0);
        double peak = 0.0;
        for (float w : p.layers[0].weight.data) {
            CHECK(std::abs(w) <= b1);
            peak = std::max(peak, static_cast<double>(std::abs(w)));
        }
        CHECK(peak > 0.9 * b1);  // the full range is actually used
        for (int i : {1, 2}) {
            for (float w : p.layers[i].weight.data) {
                CHECK(std::abs(w) <= b2);
            }
        }
        for (const auto& l : p.layers) {
            for (float b : l.bias.data) {
                CHECK(b == 0.0f);
            }
        }
        for (float w : p.layers[3].weight.data) {
            CHECK(w == 0.0f);
        }
    }
}

TEST_CASE("same seed gives bitwise-identical parameters")
{
    const auto a = init_params<float>(42);
    const auto b = init_params<float>(42);
    const auto c = init_params<float>(43);
    for (int i = 0; i < kLayers; ++i) {
        CHECK(a.layers[i].weight.data == b.layers[i].weight.data);
        CHECK(a.layers[i].bias.data == b.layers[i].bias.data);
    }
    CHECK(a.layers[0].weight.data != c.layers[0].weight.data);
}

TEST_CASE("zero last layer gives a zero velocity for any input")
{
    const NetParams<float> p = init_params<float>(5);
    const auto coords = testing::random_tensor(Shape{1, 2, 13, 10}, 1, -3, 3).cast<float>();
    const auto def = testing::random_tensor(Shape{1, 2, 13, 10}, 2, -3, 3).cast<float>();
    const Tensor<float> out = run(p, coords, def);
    REQUIRE(out.shape == (Shape{1, 2, 13, 10}));
    for (float v : out.data) {
        CHECK(v == 0.0f);
    }
}

TEST_CASE("output extents equal input extents")
{
    const NetParams<float> p = random_params(3).cast<float>();
    for (int n : {8, 16, 33, 64, 128, 256}) {
        const Tensor<float> g = coord_grid<float>(n, n);
        const Tensor<float> out = run(p, g, g);
        CHECK(out.shape == (Shape{1, 2, n, n}));
        CHECK(out.all_finite());
    }
    const Tensor<float> g = coord_grid<float>(8, 21);
    CHECK(run(p, g, g).shape == (Shape{1, 2, 8, 21}));
}

TEST_CASE("mismatched inputs are rejected")
{
    const NetParams<float> p = init_params<float>(0);
    Tape<float> tape(false);
    const auto pv = ParamVars<float>::attach(tape, p);
    const auto a = tape.constant(coord_grid<float>(8, 8));
    const auto b = tape.constant(coord_grid<float>(8, 9));
    const auto c = tape.constant(Tensor<float>(Shape{1, 3, 8, 8}));
    CHECK_THROWS_AS(fcn_forward(pv, a, b), ContractViolation);
    CHECK_THROWS_AS(fcn_forward(pv, c, c), ContractViolation);
}

TEST_CASE("translation covariance away from the border")
{
    const NetParams<double> p = random_params(9);
    const int h = 24, w = 30;
    const auto coords = testing::smooth_random(Shape{1, 2, h, w + 1}, 4, 1.0, 2.0);
    const auto def = testing::smooth_random(Shape{1, 2, h, w + 1}, 5, 1.0, 2.0);
    // a = columns [0, w), b = columns [1, w + 1): b is a shifted left by one
    auto crop = [&](const Tensor<double>& t, int x0) {
        Tensor<double> c(Shape{1, 2, h, w});
        for (int ch = 0; ch < 2; ++ch) {
            for (int i = 0; i < h; ++i) {
                for (int j = 0; j < w; ++j) {
                    c(ch, i, j) = t(ch, i, j + x0);
                }
            }
        }
        return c;
    };
    const Tensor<double> oa = run(p, crop(coords, 0), crop(def, 0));
    const Tensor<double> ob = run(p, crop(coords, 1), crop(def, 1));
    const int reach = kLayers * (kKernel / 2);  // receptive field radius
    double worst = 0.0, scale = 0.0;
    for (int ch = 0; ch < 2; ++ch) {
        for (int i = reach; i < h - reach; ++i) {
            for (int j = reach + 1; j < w - reach; ++j) {
                worst = std::max(worst, std::abs(oa(ch, i, j) - ob(ch, i, j - 1)));
                scale = std::max(scale, std::abs(oa(ch, i, j)));
            }
        }
    }
    CHECK(scale > 1e-3);
    CHECK(worst < 1e-5);
}

TEST_CASE("gradient of mean squared output w.r.t. layer-1 weights")
{
    const NetParams<double> p = random_params(11);
    std::vector<Tensor<double>> inputs;
    p.for_each_tensor([&](const Tensor<double>& t) { inputs.push_back(t); });
    inputs.push_back(coord_grid<double>(10, 10));
    inputs.push_back(testing::perturbed_grid(10, 10, 3, 1.0));
    std::vector<bool> which(inputs.size(), false);
    which[0] = true;
    const auto r = testing::check_gradient<float>(
        inputs, [](auto& tape, const auto& v) { return mean_square_output(tape, v); }, 1e-6, which);
    CHECK(r.numeric_norm > 0.0);
    CHECK(r.rel_error <= 2e-2);
    // double-precision analytic gradient pins the implementation more tightly
    const auto rd = testing::check_gradient<double>(
        inputs, [](auto& tape, const auto& v) { return mean_square_output(tape, v); }, 1e-6, which);
    CHECK(rd.rel_error <= 1e-6);
}
