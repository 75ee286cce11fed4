/*
 * Copyright 2026 The attwarp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "attwarp/aggregation.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <random>

using namespace attwarp;

namespace
{
RawAttentionTensor<double> single_layer(Eigen::Index heads, Eigen::Index tokens, Eigen::Index gh, Eigen::Index gw,
                                        const std::vector<double>& values)
{
    RawAttentionTensor<double> raw;
    raw.heads = heads;
    raw.out_tokens = tokens;
    raw.grid_h = gh;
    raw.grid_w = gw;
    raw.layers.push_back(Eigen::Map<const Matrix<double>>(values.data(), heads * tokens, gh * gw));
    return raw;
}

RawAttentionTensor<double> random_raw(std::mt19937_64& rng, std::vector<int> ids, Eigen::Index heads,
                                      Eigen::Index tokens, Eigen::Index gh, Eigen::Index gw)
{
    RawAttentionTensor<double> raw;
    raw.heads = heads;
    raw.out_tokens = tokens;
    raw.grid_h = gh;
    raw.grid_w = gw;
    raw.layer_ids = ids;
    for (std::size_t l = 0; l < ids.size(); ++l)
    {
        raw.layers.push_back(testing::random_scores(rng, heads * tokens, gh * gw, 0.0, 1.0));
    }
    return raw;
}
}  // namespace

TEST_CASE("aggregate of a single weight is the weight itself")
{
    const auto raw = single_layer(1, 1, 2, 2, {0.1, 0.2, 0.3, 0.4});
    const Matrix<double> grid = aggregate(raw, {0});
    REQUIRE(grid.rows() == 2);
    REQUIRE(grid.cols() == 2);
    CHECK(grid(0, 0) == doctest::Approx(0.1));
    CHECK(grid(0, 1) == doctest::Approx(0.2));
    CHECK(grid(1, 0) == doctest::Approx(0.3));
    CHECK(grid(1, 1) == doctest::Approx(0.4));
}

TEST_CASE("aggregate averages over heads")
{
    const auto raw = single_layer(2, 1, 2, 2, {1, 0, 0, 0, 0, 1, 0, 0});
    const Matrix<double> grid = aggregate(raw, {0});
    CHECK(grid(0, 0) == doctest::Approx(0.5));
    CHECK(grid(0, 1) == doctest::Approx(0.5));
    CHECK(grid(1, 0) == 0.0);
    CHECK(grid(1, 1) == 0.0);
}

TEST_CASE("llava preset selects layer 20 on a 24x24 grid")
{
    std::mt19937_64 rng(7);
    std::vector<int> ids(32);
    for (int k = 0; k < 32; ++k)
    {
        ids[static_cast<std::size_t>(k)] = k;
    }
    const auto raw = random_raw(rng, ids, 2, 3, 24, 24);
    const auto preset = find_layer_preset("llava");
    REQUIRE(preset);
    CHECK(preset->layer == 20);
    CHECK(find_layer_preset("qwen")->layer == 16);
    const Matrix<double> grid = aggregate(raw, {preset->layer});
    CHECK(grid.rows() == 24);
    CHECK(grid.cols() == 24);
    const Eigen::RowVectorXd expected = raw.layers[20].colwise().mean();
    CHECK((Eigen::Map<const Eigen::RowVectorXd>(grid.data(), 576) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("aggregate matches the triple-loop oracle")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial)
    {
        const auto raw = random_raw(rng, {3, 5, 9}, 4, 3, 3, 4);
        std::vector<std::vector<std::vector<std::vector<double>>>> w;
        for (const int pick : {0, 2})
        {
            std::vector<std::vector<std::vector<double>>> layer;
            for (Eigen::Index h = 0; h < 4; ++h)
            {
                std::vector<std::vector<double>> head;
                for (Eigen::Index m = 0; m < 3; ++m)
                {
                    std::vector<double> token;
                    for (Eigen::Index t = 0; t < 12; ++t)
                    {
                        token.push_back(raw.layers[static_cast<std::size_t>(pick)](h * 3 + m, t));
                    }
                    head.push_back(token);
                }
                layer.push_back(head);
            }
            w.push_back(layer);
        }
        const auto expected = testing::triple_loop_mean(w);
        const Matrix<double> grid = aggregate(raw, {3, 9});
        for (Eigen::Index t = 0; t < 12; ++t)
        {
            CHECK(std::abs(grid(t / 4, t % 4) - expected[static_cast<std::size_t>(t)]) < 1e-12);
        }
    }
}

TEST_CASE("aggregate over disjoint layer sets is the size-weighted mean")
{
    std::mt19937_64 rng(3);
    const auto raw = random_raw(rng, {0, 1, 2, 3, 4}, 3, 2, 4, 4);
    const Matrix<double> a = aggregate(raw, {0, 1});
    const Matrix<double> b = aggregate(raw, {2, 3, 4});
    const Matrix<double> all = aggregate(raw, {0, 1, 2, 3, 4});
    CHECK((all - (2.0 * a + 3.0 * b) / 5.0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("aggregate is invariant to head and token permutations")
{
    std::mt19937_64 rng(5);
    auto raw = random_raw(rng, {0}, 4, 3, 3, 3);
    const Matrix<double> before = aggregate(raw, {0});
    std::vector<Eigen::Index> rows(12);
    for (Eigen::Index k = 0; k < 12; ++k)
    {
        rows[static_cast<std::size_t>(k)] = k;
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    Matrix<double> shuffled(12, 9);
    for (Eigen::Index k = 0; k < 12; ++k)
    {
        shuffled.row(k) = raw.layers[0].row(rows[static_cast<std::size_t>(k)]);
    }
    raw.layers[0] = shuffled;
    CHECK((aggregate(raw, {0}) - before).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("aggregate rejects bad selections and shapes")
{
    std::mt19937_64 rng(1);
    auto raw = random_raw(rng, {0, 1}, 2, 2, 2, 2);
    CHECK_THROWS_AS((void)aggregate(raw, {}), std::invalid_argument);
    CHECK_THROWS_AS((void)aggregate(raw, {7}), std::out_of_range);
    raw.layers[1] = Matrix<double>::Ones(4, 5);
    CHECK_THROWS_AS((void)aggregate(raw, {0}), std::invalid_argument);
    raw.layers[1] = Matrix<double>::Ones(4, 4);
    raw.layers[1](0, 0) = -1.0;
    CHECK_THROWS_AS((void)aggregate(raw, {0}), std::invalid_argument);
}

TEST_CASE("postprocess keeps constants fixed")
{
    const Matrix<double> grid = Matrix<double>::Constant(3, 5, 0.25);
    const ScoreMatrix out = postprocess(grid, {17, 23, 3, SharpnessTransform::identity});
    CHECK(out.rows() == 17);
    CHECK(out.cols() == 23);
    CHECK((out.array() - 0.25).abs().maxCoeff() < 1e-12);
}

TEST_CASE("postprocess upsample matches the brute-force Lanczos oracle")
{
    Matrix<double> grid(2, 2);
    grid << 0, 0, 0, 1;
    // Frozen from the non-separable 2-D reference (test_support.hpp), then
    // clamped at zero.
    ScoreMatrix expected(4, 4);
    expected << 0.030792423190098707, 0, 0, 0,                                          //
        0, 0.054228759884544446, 0.17864193360122771, 0.27373430717128872,             //
        0, 0.17864193360122768, 0.58848737291300013, 0.90174339280822058,              //
        0, 0.27373430717128872, 0.90174339280822058, 1.3817478231491174;
    const ScoreMatrix out = postprocess(grid, {4, 4, 1, SharpnessTransform::identity});
    CHECK((out - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((out - testing::brute_force_upsample(grid, 4, 4).cwiseMax(0.0)).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::Index r = 0;
    Eigen::Index c = 0;
    out.maxCoeff(&r, &c);
    CHECK(r >= 2);
    CHECK(c >= 2);
}

TEST_CASE("separable resize agrees with the 2-D reference on random grids")
{
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 10; ++trial)
    {
        const ScoreMatrix grid = testing::random_scores(rng, 3 + trial % 3, 4 + trial % 2, 0.0, 1.0);
        const ScoreMatrix out = lanczos_resize(grid, 13, 17);
        CHECK((out - testing::brute_force_upsample(grid, 13, 17)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("square transform without resize")
{
    Matrix<double> grid(2, 2);
    grid << 1, 2, 3, 4;
    const ScoreMatrix out = postprocess(grid, {2, 2, 1, SharpnessTransform::square});
    CHECK(out(0, 0) == doctest::Approx(1));
    CHECK(out(0, 1) == doctest::Approx(4));
    CHECK(out(1, 0) == doctest::Approx(9));
    CHECK(out(1, 1) == doctest::Approx(16));
}

TEST_CASE("transforms preserve argmax and stay finite and nonnegative")
{
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 25; ++trial)
    {
        const ScoreMatrix grid = testing::random_scores(rng, 6, 6, 0.0, 3.0);
        Eigen::Index r0 = 0;
        Eigen::Index c0 = 0;
        grid.maxCoeff(&r0, &c0);
        for (const auto t : {SharpnessTransform::sqrt, SharpnessTransform::identity, SharpnessTransform::square,
                             SharpnessTransform::cube})
        {
            const ScoreMatrix same = postprocess(grid, {6, 6, 1, t});
            Eigen::Index r1 = 0;
            Eigen::Index c1 = 0;
            same.maxCoeff(&r1, &c1);
            CHECK(r1 == r0);
            CHECK(c1 == c0);
            const ScoreMatrix big = postprocess(grid, {31, 29, 3, t});
            CHECK(all_finite_nonnegative(big));
        }
    }
}

TEST_CASE("postprocess floors an all-zero map")
{
    const ScoreMatrix out = postprocess(Matrix<double>::Zero(2, 2), {4, 4, 3, SharpnessTransform::identity});
    CHECK(out.sum() > 0.0);
    CHECK((out.array() - kMassFloor).abs().maxCoeff() < 1e-20);
}

TEST_CASE("postprocess argument errors")
{
    const Matrix<double> grid = Matrix<double>::Ones(4, 4);
    CHECK_THROWS_AS((void)postprocess(grid, {0, 4, 1, SharpnessTransform::identity}), std::invalid_argument);
    CHECK_THROWS_AS((void)postprocess(grid, {8, 8, 2, SharpnessTransform::identity}), std::invalid_argument);
    CHECK_THROWS_AS((void)postprocess(grid, {2, 8, 1, SharpnessTransform::identity}), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_transform("cubic"), std::invalid_argument);
    CHECK(parse_transform("sqrt") == SharpnessTransform::sqrt);
}

TEST_CASE("box_smooth averages in-bounds neighbours")
{
    Matrix<double> m = Matrix<double>::Zero(3, 3);
    m(1, 1) = 9.0;
    const Matrix<double> s = box_smooth(m, 3);
    CHECK(s(1, 1) == doctest::Approx(1.0));
    CHECK(s(0, 0) == doctest::Approx(9.0 / 4.0));
    CHECK(s(0, 1) == doctest::Approx(9.0 / 6.0));
}
