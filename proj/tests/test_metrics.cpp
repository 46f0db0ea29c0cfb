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
 * @file test_metrics.cpp
 *
 *****************************************************************************/

#include "catch_amalgamated.hpp"

#include <cmath>

#include "diffreg/metrics.hpp"
#include "metric_examples.hpp"
#include "test_support.hpp"

using namespace diffreg;
using Catch::Approx;

namespace {

Mask2D random_mask(int n, std::uint64_t seed, double fill)
{
    const Tensor<double> t = testing::random_tensor(Shape{1, 1, n, n}, seed, 0.0, 1.0);
    Mask2D m(n, n);
    for (std::size_t i = 0; i < t.size(); ++i) {
        m.labels[i] = t.data[i] < fill ? 1 : (t.data[i] < 2 * fill ? 2 : 0);
    }
    return m;
}

}  // namespace

TEST_CASE("worked metric examples hold exactly")
{
    for (const auto& ex : testing::metric_examples()) {
        CAPTURE(ex.name, ex.detail);
        CHECK(ex.pass);
    }
}

TEST_CASE("dice is symmetric and bounded")
{
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Mask2D a = random_mask(24, s, 0.3), b = random_mask(24, 100 + s, 0.3);
        for (std::uint8_t label : {1, 2}) {
            const double d = dice(a, b, label);
            CHECK(d == dice(b, a, label));
            CHECK(d >= 0.0);
            CHECK(d <= 1.0);
        }
    }
}

TEST_CASE("dice counts only the requested label")
{
    Mask2D a(4, 4), b(4, 4);
    a.at(0, 0) = 1;
    a.at(1, 0) = 2;
    b.at(0, 0) = 1;
    b.at(2, 0) = 2;
    CHECK(dice(a, b, 1) == 1.0);
    CHECK(dice(a, b, 2) == 0.0);
    CHECK(dice(a, b, 3) == 1.0);
}

TEST_CASE("hausdorff is symmetric and zero on itself")
{
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Mask2D a = random_mask(20, s, 0.25), b = random_mask(20, 50 + s, 0.25);
        CHECK(hausdorff(a, a, 1) == 0.0);
        CHECK(hausdorff(a, b, 1) == hausdorff(b, a, 1));
        CHECK(hausdorff(a, b, 1) >= 0.0);
    }
}

TEST_CASE("hausdorff along a diagonal translation")
{
    const Mask2D a = testing::square_mask(40, 8, 8, 10);
    const Mask2D b = testing::square_mask(40, 11, 12, 10);
    CHECK(hausdorff(a, b, 1) == Approx(5.0).epsilon(1e-12));
}

TEST_CASE("contours are the 4-connected boundary")
{
    const Mask2D a = testing::square_mask(10, 2, 2, 4);
    CHECK(contour(a, 1).size() == 12);  // 16 pixels minus the 2x2 core
    const Mask2D edge = testing::square_mask(4, 0, 0, 4);
    CHECK(contour(edge, 1).size() == 12);  // the raster edge counts as outside
}

TEST_CASE("extent mismatches are contract violations")
{
    CHECK_THROWS_AS(dice(Mask2D(4, 4), Mask2D(4, 5), 1), ContractViolation);
    CHECK_THROWS_AS(hausdorff(Mask2D(4, 4), Mask2D(5, 4), 1), ContractViolation);
    CHECK_THROWS_AS(reliability({}, 0.5), ContractViolation);
}

TEST_CASE("jacobian counts match the determinant map")
{
    const Tensor<double> fold = testing::column_swap_field(9);
    const Tensor<double> det = jacobian_det(fold);
    std::size_t expected = 0;
    for (double v : det.data) {
        expected += v <= 0.0;
    }
    CHECK(count_nonpositive_jacobian(fold) == expected);
    CHECK(det(0, 4, 4) == Approx(-1.0));
}

TEST_CASE("evaluation warps the moving mask with nearest neighbour")
{
    const int n = 32;
    const Mask2D fixed = testing::square_mask(n, 10, 10, 8);
    const Mask2D moving = testing::square_mask(n, 13, 10, 8);
    // moving(x + 3) = fixed(x)
    Tensor<float> d = coord_grid<float>(n, n);
    for (std::size_t p = 0; p < d.shape.plane(); ++p) {
        d.data[p] += static_cast<float>(3.0 * 2.0 / (n - 1));
    }
    const EvalReport r = evaluate_registration(d, moving, fixed, {1});
    REQUIRE(r.labels.size() == 1);
    CHECK(r.labels[0].dice == 1.0);
    CHECK(r.labels[0].hausdorff_px == 0.0);
    CHECK(r.nonpositive_jacobian == 0);
    CHECK(r.mean_dice() == 1.0);

    const EvalReport id = evaluate_registration(coord_grid<float>(n, n), moving, fixed, {1});
    CHECK(id.labels[0].dice == Approx(2.0 * 40 / 128));
    CHECK(id.labels[0].hausdorff_px == 3.0);
}

TEST_CASE("percentile interpolates order statistics")
{
    CHECK(percentile({3, 1, 2}, 0.5) == 2.0);
    CHECK(percentile({0, 10}, 0.25) == 2.5);
    CHECK(percentile({7}, 0.9) == 7.0);
    CHECK_THROWS_AS(percentile({}, 0.5), ContractViolation);
}
