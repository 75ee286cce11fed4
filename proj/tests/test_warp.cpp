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

#include "attwarp/warp.hpp"
#include "test_support.hpp"

#include <random>

using namespace attwarp;

namespace
{
AxisProfile<double> profile_of(const std::vector<double>& v)
{
    return {Eigen::Map<const Vector<double>>(v.data(), static_cast<Eigen::Index>(v.size())), Axis::horizontal};
}

WarpField<double> field_from_profiles(const std::vector<double>& px, const std::vector<double>& py, double floor = 0.0)
{
    return build_warp(cdf(profile_of(px), floor), cdf(profile_of(py), floor));
}

std::vector<double> prefix_mass_fraction(const std::vector<double>& p, std::size_t a, std::size_t b)
{
    double inside = 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k)
    {
        total += p[k];
        if (k >= a && k <= b)
        {
            inside += p[k];
        }
    }
    return {inside / total};
}
}  // namespace

TEST_CASE("marginals are column and row sums")
{
    ScoreMatrix a(2, 2);
    a << 1, 3, 2, 2;
    const auto [mx, my] = marginals(a);
    CHECK(mx.axis == Axis::horizontal);
    CHECK(my.axis == Axis::vertical);
    CHECK(mx.values[0] == 3);
    CHECK(mx.values[1] == 5);
    CHECK(my.values[0] == 4);
    CHECK(my.values[1] == 4);
}

TEST_CASE("marginals of uniform and one-hot matrices")
{
    const ScoreMatrix u = ScoreMatrix::Constant(5, 7, 0.5);
    const auto [ux, uy] = marginals(u);
    CHECK((ux.values.array() - 0.5 * 5).abs().maxCoeff() < 1e-15);
    CHECK((uy.values.array() - 0.5 * 7).abs().maxCoeff() < 1e-15);

    ScoreMatrix one_hot = ScoreMatrix::Zero(8, 8);
    one_hot(2, 5) = 7;
    const auto [hx, hy] = marginals(one_hot);
    Vector<double> ex = Vector<double>::Zero(8);
    ex[5] = 7;
    Vector<double> ey = Vector<double>::Zero(8);
    ey[2] = 7;
    CHECK(hx.values == ex);
    CHECK(hy.values == ey);
}

TEST_CASE("marginal totals agree")
{
    std::mt19937_64 rng(4);
    const ScoreMatrix a = testing::random_scores(rng, 13, 29);
    const auto [mx, my] = marginals(a);
    CHECK(std::abs(mx.values.sum() - my.values.sum()) <= 1e-6 * a.sum());
    CHECK(std::abs(mx.values.sum() - a.sum()) <= 1e-6 * a.sum());
}

TEST_CASE("cdf examples")
{
    const auto m = cdf(profile_of({3, 5}), 0.0);
    CHECK(m.cumulative[0] == doctest::Approx(0.375));
    CHECK(m.cumulative[1] == 1.0);

    const auto u = cdf(profile_of(std::vector<double>(10, 2.0)), 0.0);
    for (Eigen::Index k = 0; k < 10; ++k)
    {
        CHECK(u.cumulative[k] == doctest::Approx(static_cast<double>(k + 1) / 10.0));
    }

    const double eps = kMassFloor;
    const auto floored = cdf(profile_of({0, 0, 1}));
    const double e1 = eps / (1.0 + 3.0 * eps);
    CHECK(std::abs(floored.cumulative[0] - e1) < 1e-20);
    CHECK(std::abs(floored.cumulative[1] - 2 * e1) < 1e-20);
    CHECK(floored.cumulative[2] == 1.0);
}

TEST_CASE("cdf errors")
{
    CHECK_THROWS_AS((void)cdf(profile_of({0, 0, 0}), 0.0), std::invalid_argument);
    CHECK_THROWS_AS((void)cdf(profile_of({1, -1}), 0.0), std::invalid_argument);
    CHECK_THROWS_AS((void)cdf(profile_of({}), 0.0), std::invalid_argument);
}

TEST_CASE("cdf is nondecreasing and ends at one")
{
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 200; ++trial)
    {
        const auto p = testing::random_profile(rng, 1 + rng() % 64, 0.0, 1.0);
        const auto m = cdf(profile_of(p));
        CHECK(m.cumulative[0] >= 0.0);
        CHECK(m.cumulative[m.size() - 1] == 1.0);
        for (Eigen::Index k = 1; k < m.size(); ++k)
        {
            CHECK(m.cumulative[k] >= m.cumulative[k - 1]);
        }
    }
}

TEST_CASE("uniform CDFs give the identity warp")
{
    const auto f = field_from_profiles(std::vector<double>(9, 1.0), std::vector<double>(6, 1.0));
    for (int j = 0; j < 9; ++j)
    {
        CHECK(f.fx(j) == doctest::Approx(j).epsilon(1e-12));
    }
    for (int i = 0; i < 6; ++i)
    {
        CHECK(f.fy(i) == doctest::Approx(i).epsilon(1e-12));
    }
}

TEST_CASE("piecewise-linear inversion of a skewed CDF")
{
    AxisCdf<double> mx{Vector<double>(4), Axis::horizontal};
    mx.cumulative << 0.5, 0.75, 0.875, 1.0;
    AxisCdf<double> my{Vector<double>::LinSpaced(4, 0.25, 1.0), Axis::vertical};
    const auto f = build_warp(mx, my);
    const std::vector<double> profile = {4, 2, 1, 1};
    for (int j = 0; j < 4; ++j)
    {
        CHECK(std::abs(f.fx(j) - std::min(testing::bisect_inverse_cdf(profile, j / 4.0), 3.0)) < 1e-9);
    }
    CHECK(f.fx(0) == 0.0);
    CHECK(f.fx(2) == doctest::Approx(1.0));
    CHECK(f.fx(1) == doctest::Approx(0.5));
    CHECK(f.fx(3) == doctest::Approx(2.0));
}

TEST_CASE("inverse matches bisection on random profiles")
{
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial)
    {
        const auto p = testing::random_profile(rng, 1 + rng() % 64);
        const auto map = AxisMap<double>::from_cdf(cdf(profile_of(p), 0.0));
        const double n = static_cast<double>(p.size());
        for (int s = 0; s < 20; ++s)
        {
            const double u = unit(rng);
            worst = std::max(worst, std::abs(map.backward(u * n) - testing::bisect_inverse_cdf(p, u)));
        }
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("inverse then forward round-trips coordinates")
{
    std::mt19937_64 rng(13);
    const auto px = testing::random_profile(rng, 48);
    const auto py = testing::random_profile(rng, 40);
    const auto f = field_from_profiles(px, py, kMassFloor);
    std::uniform_real_distribution<double> ux(0.0, 47.0);
    std::uniform_real_distribution<double> uy(0.0, 39.0);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k)
    {
        const double x = ux(rng);
        const double y = uy(rng);
        worst = std::max(worst, std::abs(f.fx(f.inverse_x(x)) - x));
        worst = std::max(worst, std::abs(f.fy(f.inverse_y(y)) - y));
    }
    CHECK(worst < 0.5);
    CHECK(worst < 1e-9);
}

TEST_CASE("field invariants: bounds and monotonicity")
{
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 50; ++trial)
    {
        const auto f = build_warp(testing::random_scores(rng, 20, 30, 0.0, 1.0));
        const auto sx = f.fx_samples();
        const auto sy = f.fy_samples();
        CHECK(sx[0] >= 0.0);
        CHECK(sx[29] <= 29.0);
        CHECK(sy[0] >= 0.0);
        CHECK(sy[19] <= 19.0);
        for (Eigen::Index j = 1; j < sx.size(); ++j)
        {
            CHECK(sx[j] >= sx[j - 1]);
        }
        for (Eigen::Index i = 1; i < sy.size(); ++i)
        {
            CHECK(sy[i] >= sy[i - 1]);
        }
    }
}

TEST_CASE("identity field reproduces the image exactly")
{
    std::mt19937_64 rng(15);
    const RgbImage image = testing::random_image(rng, 17, 23);
    const auto warped = warp_image(image, WarpField<double>::identity(17, 23));
    REQUIRE(warped.pixels.channel_count() == 3);
    for (int ch = 0; ch < 3; ++ch)
    {
        CHECK(warped.pixels.channels[static_cast<std::size_t>(ch)] == image.channels[static_cast<std::size_t>(ch)]);
    }
}

TEST_CASE("uniform attention leaves the image unchanged")
{
    std::mt19937_64 rng(16);
    const RgbImage image = testing::random_image(rng, 31, 45);
    const auto warped = warp_image(image, build_warp(ScoreMatrix::Constant(31, 45, 0.3)));
    for (int ch = 0; ch < 3; ++ch)
    {
        const auto& a = warped.pixels.channels[static_cast<std::size_t>(ch)];
        const auto& b = image.channels[static_cast<std::size_t>(ch)];
        CHECK((a - b).cwiseAbs().maxCoeff() <= 1.0f / 255.0f);
    }
}

TEST_CASE("one-hot attention at the centre magnifies the centre pixel")
{
    const Eigen::Index n = 32;
    ScoreMatrix a = ScoreMatrix::Zero(n, n);
    a(16, 16) = 1.0;
    const auto f = build_warp(a);
    // Floored marginal: centre column carries 1 + n*eps of total 1 + n*n*eps.
    const double eps = kMassFloor;
    const double fraction = (1.0 + static_cast<double>(n) * eps) / (1.0 + static_cast<double>(n * n) * eps);
    const BoundingBox centre{16, 16, 16, 16};
    const BoundingBox mapped = warp_box_forward(centre, f);
    CHECK(mapped.width() == doctest::Approx(static_cast<double>(n) * fraction));
    CHECK(mapped.width() >= 0.25 * static_cast<double>(n));
    CHECK(mapped.height() >= 0.25 * static_cast<double>(n));

    int near_centre = 0;
    for (Eigen::Index j = 0; j < n; ++j)
    {
        near_centre += std::abs(f.fx(static_cast<double>(j)) - 16.0) <= 1.0 ? 1 : 0;
    }
    CHECK(near_centre >= n / 4);
}

TEST_CASE("rows and columns sample a single input coordinate")
{
    std::mt19937_64 rng(17);
    const Eigen::Index rows = 24;
    const Eigen::Index cols = 36;
    RgbImage image(rows, cols, 3);
    for (Eigen::Index r = 0; r < rows; ++r)
    {
        for (Eigen::Index c = 0; c < cols; ++c)
        {
            image.channels[0](r, c) = static_cast<float>(c) / static_cast<float>(cols);
            image.channels[1](r, c) = static_cast<float>(r) / static_cast<float>(rows);
            image.channels[2](r, c) = 0.5f;
        }
    }
    const auto f = build_warp(testing::random_scores(rng, rows, cols, 0.0, 1.0));
    const auto warped = warp_image(image, f);
    for (Eigen::Index j = 0; j < cols; ++j)
    {
        const auto column = warped.pixels.channels[0].col(j);
        CHECK((column.array() - column(0)).abs().maxCoeff() < 1e-6);
        CHECK(column(0) == doctest::Approx(f.fx(static_cast<double>(j)) / static_cast<double>(cols)).epsilon(1e-5));
    }
    for (Eigen::Index i = 0; i < rows; ++i)
    {
        const auto row = warped.pixels.channels[1].row(i);
        CHECK((row.array() - row(0)).abs().maxCoeff() < 1e-6);
        if (i > 0)
        {
            CHECK(row(0) >= warped.pixels.channels[1](i - 1, 0) - 1e-6f);
        }
    }
    CHECK(warped.pixels.height() == rows);
    CHECK(warped.pixels.width() == cols);
}

TEST_CASE("warp_image rejects mismatched dimensions")
{
    const RgbImage image(10, 12, 3);
    CHECK_THROWS_AS((void)warp_image(image, WarpField<double>::identity(12, 10)), std::invalid_argument);
}

TEST_CASE("warped extent equals dimension times mass fraction")
{
    std::mt19937_64 rng(18);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial)
    {
        const std::size_t n = 8 + rng() % 120;
        const auto p = testing::random_profile(rng, n, 0.0, 1.0);
        const auto f = field_from_profiles(p, std::vector<double>(4, 1.0));
        std::size_t a = rng() % n;
        std::size_t b = rng() % n;
        if (a > b)
        {
            std::swap(a, b);
        }
        const double fraction = prefix_mass_fraction(p, a, b)[0];
        const BoundingBox mapped = warp_box_forward(BoundingBox{double(a), 0, double(b), 3}, f);
        worst = std::max(worst, std::abs(mapped.width() - static_cast<double>(n) * fraction));
    }
    CHECK(worst < 1.0);
}

TEST_CASE("an interval expands iff its mass fraction exceeds its length fraction")
{
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 300; ++trial)
    {
        const std::size_t n = 16 + rng() % 48;
        const auto p = testing::random_profile(rng, n, 0.0, 1.0);
        const auto f = field_from_profiles(p, std::vector<double>(4, 1.0));
        std::size_t a = rng() % n;
        std::size_t b = rng() % n;
        if (a > b)
        {
            std::swap(a, b);
        }
        const double mass = prefix_mass_fraction(p, a, b)[0];
        const double length = static_cast<double>(b - a + 1) / static_cast<double>(n);
        if (std::abs(mass - length) < 1e-9)
        {
            continue;
        }
        const double width = warp_box_forward(BoundingBox{double(a), 0, double(b), 3}, f).width();
        CHECK((width > static_cast<double>(b - a + 1)) == (mass > length));
    }
}

TEST_CASE("box mapping under the identity and for the full image")
{
    const auto id = WarpField<double>::identity(50, 40);
    const BoundingBox box{3, 7, 19, 30};
    CHECK(warp_box_forward(box, id) == box);
    CHECK(warp_box_inverse(box, id) == box);

    std::mt19937_64 rng(20);
    const auto f = build_warp(testing::random_scores(rng, 50, 40));
    const BoundingBox full{0, 0, 39, 49};
    const BoundingBox mapped = warp_box_forward(full, f);
    CHECK(mapped.x_min == 0.0);
    CHECK(mapped.y_min == 0.0);
    CHECK(mapped.x_max == 39.0);
    CHECK(mapped.y_max == 49.0);
}

TEST_CASE("forward then inverse box mapping round-trips")
{
    std::mt19937_64 rng(22);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial)
    {
        const auto f = build_warp(testing::random_scores(rng, 64, 64, 0.05, 1.0));
        std::uniform_int_distribution<int> coord(0, 63);
        int x0 = coord(rng);
        int x1 = coord(rng);
        int y0 = coord(rng);
        int y1 = coord(rng);
        const BoundingBox box{double(std::min(x0, x1)), double(std::min(y0, y1)), double(std::max(x0, x1)),
                              double(std::max(y0, y1))};
        const BoundingBox back = warp_box_inverse(warp_box_forward(box, f), f);
        worst = std::max({worst, std::abs(back.x_min - box.x_min), std::abs(back.x_max - box.x_max),
                          std::abs(back.y_min - box.y_min), std::abs(back.y_max - box.y_max)});
    }
    CHECK(worst <= 1.0);

    const auto f = build_warp(testing::gaussian_blob(64, 64, 15, 15, 5, 1.0, 0.01));
    const BoundingBox box{10, 10, 20, 20};
    const BoundingBox back = warp_box_inverse(warp_box_forward(box, f), f);
    CHECK(std::abs(back.x_min - 10) <= 1.0);
    CHECK(std::abs(back.y_min - 10) <= 1.0);
    CHECK(std::abs(back.x_max - 20) <= 1.0);
    CHECK(std::abs(back.y_max - 20) <= 1.0);
}

TEST_CASE("composition equals sequential application")
{
    std::mt19937_64 rng(23);
    const auto f1 = build_warp(testing::random_scores(rng, 30, 40, 0.01, 1.0));
    const auto f2 = build_warp(testing::random_scores(rng, 30, 40, 0.01, 1.0));
    const auto f3 = build_warp(testing::gaussian_blob(30, 40, 10, 30, 4, 1.0, 0.001));
    const auto composed = compose(f3, compose(f2, f1));
    std::uniform_real_distribution<double> ux(0.0, 40.0);
    std::uniform_real_distribution<double> uy(0.0, 30.0);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k)
    {
        const double x = ux(rng);
        const double y = uy(rng);
        worst = std::max(worst, std::abs(composed.inverse_x(x) - f3.inverse_x(f2.inverse_x(f1.inverse_x(x)))));
        worst = std::max(worst, std::abs(composed.inverse_y(y) - f3.inverse_y(f2.inverse_y(f1.inverse_y(y)))));
        const double xb = composed.x_map().backward(x);
        worst = std::max(worst, std::abs(xb - f1.x_map().backward(f2.x_map().backward(f3.x_map().backward(x)))));
    }
    CHECK(worst < 1e-9);
    const auto sx = composed.fx_samples();
    for (Eigen::Index j = 1; j < sx.size(); ++j)
    {
        CHECK(sx[j] >= sx[j - 1]);
    }
}
