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

#pragma once

#include "attwarp/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace attwarp
{

/// Column sums (horizontal) or row sums (vertical) of a score matrix.
template <typename Scalar>
struct AxisProfile
{
    Vector<Scalar> values;
    Axis axis = Axis::horizontal;
};

/// Normalized prefix sums of an AxisProfile; the last entry is exactly 1.
template <typename Scalar>
struct AxisCdf
{
    Vector<Scalar> cumulative;
    Axis axis = Axis::horizontal;

    [[nodiscard]] Eigen::Index size() const { return cumulative.size(); }
};

template <typename Derived>
[[nodiscard]] std::pair<AxisProfile<typename Derived::Scalar>, AxisProfile<typename Derived::Scalar>> marginals(
    const Eigen::MatrixBase<Derived>& scores)
{
    using Scalar = typename Derived::Scalar;
    if (scores.rows() == 0 || scores.cols() == 0)
    {
        throw std::invalid_argument("marginals: empty score matrix");
    }
    if (!all_finite_nonnegative(scores))
    {
        throw std::invalid_argument("marginals: scores must be finite and >= 0");
    }
    AxisProfile<Scalar> horizontal{scores.colwise().sum().transpose(), Axis::horizontal};
    AxisProfile<Scalar> vertical{scores.rowwise().sum(), Axis::vertical};
    return {std::move(horizontal), std::move(vertical)};
}

/// Prefix sums of (profile + floor) normalized to end at 1. With floor > 0
/// the result is strictly increasing.
template <typename Scalar>
[[nodiscard]] AxisCdf<Scalar> cdf(const AxisProfile<Scalar>& profile, Scalar floor = Scalar(kMassFloor))
{
    const Eigen::Index n = profile.values.size();
    if (n == 0)
    {
        throw std::invalid_argument("cdf: empty profile");
    }
    if (!all_finite_nonnegative(profile.values) || floor < 0)
    {
        throw std::invalid_argument("cdf: profile must be finite and >= 0");
    }
    Vector<Scalar> cumulative(n);
    Scalar running = 0;
    for (Eigen::Index k = 0; k < n; ++k)
    {
        running += profile.values[k] + floor;
        cumulative[k] = running;
    }
    if (!(running > 0))
    {
        throw std::invalid_argument("cdf: profile has zero mass");
    }
    cumulative /= running;
    cumulative[n - 1] = Scalar(1);
    return {std::move(cumulative), profile.axis};
}

/// Monotone piecewise-linear map of [0, L] onto itself, stored as knots.
///
/// forward() takes an input coordinate to its output coordinate. backward()
/// inverts it; on a flat run it returns the left end of the run.
template <typename Scalar>
class AxisMap
{
public:
    AxisMap() = default;

    AxisMap(Vector<Scalar> input_knots, Vector<Scalar> output_knots)
        : in_(std::move(input_knots)), out_(std::move(output_knots))
    {
        if (in_.size() < 2 || in_.size() != out_.size())
        {
            throw std::invalid_argument("AxisMap: need at least two matching knots");
        }
        for (Eigen::Index k = 1; k < in_.size(); ++k)
        {
            if (!(in_[k] > in_[k - 1]) || out_[k] < out_[k - 1])
            {
                throw std::invalid_argument("AxisMap: knots must be increasing");
            }
        }
    }

    [[nodiscard]] static AxisMap identity(Eigen::Index length)
    {
        const Vector<Scalar> knots = Vector<Scalar>::LinSpaced(2, Scalar(0), static_cast<Scalar>(length));
        return AxisMap(knots, knots);
    }

    /// Continuous CDF extension: knot k sits at input coordinate k with value
    /// n * cumulative[k - 1], so pixel k's mass is spread over [k, k + 1].
    [[nodiscard]] static AxisMap from_cdf(const AxisCdf<Scalar>& cdf)
    {
        const Eigen::Index n = cdf.size();
        const auto length = static_cast<Scalar>(n);
        Vector<Scalar> in = Vector<Scalar>::LinSpaced(n + 1, Scalar(0), length);
        Vector<Scalar> out(n + 1);
        out[0] = 0;
        out.tail(n) = cdf.cumulative * length;
        out[n] = length;
        return AxisMap(std::move(in), std::move(out));
    }

    [[nodiscard]] Scalar length() const { return in_[in_.size() - 1]; }
    [[nodiscard]] const Vector<Scalar>& input_knots() const { return in_; }
    [[nodiscard]] const Vector<Scalar>& output_knots() const { return out_; }

    [[nodiscard]] Scalar forward(Scalar x) const
    {
        x = std::clamp(x, in_[0], length());
        const Scalar* begin = in_.data();
        const Scalar* end = begin + in_.size();
        auto k = static_cast<Eigen::Index>(std::upper_bound(begin, end, x) - begin) - 1;
        k = std::clamp<Eigen::Index>(k, 0, in_.size() - 2);
        return out_[k] + (x - in_[k]) * ((out_[k + 1] - out_[k]) / (in_[k + 1] - in_[k]));
    }

    [[nodiscard]] Scalar backward(Scalar y) const
    {
        y = std::clamp(y, out_[0], out_[out_.size() - 1]);
        const Scalar* begin = out_.data();
        const Scalar* end = begin + out_.size();
        const auto k = static_cast<Eigen::Index>(std::lower_bound(begin, end, y) - begin);
        if (k == 0 || out_[k] == y)
        {
            return in_[k];
        }
        return in_[k - 1] + (y - out_[k - 1]) * ((in_[k] - in_[k - 1]) / (out_[k] - out_[k - 1]));
    }

private:
    Vector<Scalar> in_;
    Vector<Scalar> out_;
};

/// outer(inner(x)). Piecewise-linear maps are closed under composition, so
/// the result is exact: its knots are inner's knots plus the preimages of
/// outer's knots.
template <typename Scalar>
[[nodiscard]] AxisMap<Scalar> compose(const AxisMap<Scalar>& outer, const AxisMap<Scalar>& inner)
{
    if (outer.length() != inner.length())
    {
        throw std::invalid_argument("compose: axis lengths differ");
    }
    std::vector<Scalar> xs(inner.input_knots().data(), inner.input_knots().data() + inner.input_knots().size());
    for (Eigen::Index k = 0; k < outer.input_knots().size(); ++k)
    {
        xs.push_back(inner.backward(outer.input_knots()[k]));
    }
    std::sort(xs.begin(), xs.end());
    const Scalar tol = inner.length() * Scalar(1e-12);
    std::vector<Scalar> unique_xs;
    unique_xs.reserve(xs.size());
    for (const Scalar x : xs)
    {
        if (unique_xs.empty() || x - unique_xs.back() > tol)
        {
            unique_xs.push_back(x);
        }
    }
    unique_xs.front() = 0;
    unique_xs.back() = inner.length();

    const auto n = static_cast<Eigen::Index>(unique_xs.size());
    Vector<Scalar> in(n);
    Vector<Scalar> out(n);
    for (Eigen::Index k = 0; k < n; ++k)
    {
        in[k] = unique_xs[static_cast<size_t>(k)];
        out[k] = outer.forward(inner.forward(in[k]));
    }
    for (Eigen::Index k = 1; k < n; ++k)
    {
        out[k] = std::max(out[k], out[k - 1]);
    }
    return AxisMap<Scalar>(std::move(in), std::move(out));
}

/// Rectilinear warp: an independent monotone map per axis.
///
/// fx(j) is the input column sampled by output column j; inverse_x(x) is
/// where input coordinate x lands in the output. The same holds for rows.
template <typename Scalar = double>
class WarpField
{
public:
    WarpField() = default;
    WarpField(AxisMap<Scalar> x_map, AxisMap<Scalar> y_map) : x_(std::move(x_map)), y_(std::move(y_map)) {}

    [[nodiscard]] static WarpField identity(Eigen::Index height, Eigen::Index width)
    {
        return {AxisMap<Scalar>::identity(width), AxisMap<Scalar>::identity(height)};
    }

    [[nodiscard]] Eigen::Index width() const { return static_cast<Eigen::Index>(std::lround(x_.length())); }
    [[nodiscard]] Eigen::Index height() const { return static_cast<Eigen::Index>(std::lround(y_.length())); }

    [[nodiscard]] Scalar fx(Scalar j) const { return std::min(x_.backward(j), static_cast<Scalar>(width() - 1)); }
    [[nodiscard]] Scalar fy(Scalar i) const { return std::min(y_.backward(i), static_cast<Scalar>(height() - 1)); }
    [[nodiscard]] Scalar inverse_x(Scalar x) const { return x_.forward(x); }
    [[nodiscard]] Scalar inverse_y(Scalar y) const { return y_.forward(y); }

    [[nodiscard]] const AxisMap<Scalar>& x_map() const { return x_; }
    [[nodiscard]] const AxisMap<Scalar>& y_map() const { return y_; }

    /// fx sampled at every output column.
    [[nodiscard]] Vector<Scalar> fx_samples() const
    {
        Vector<Scalar> s(width());
        for (Eigen::Index j = 0; j < s.size(); ++j)
        {
            s[j] = fx(static_cast<Scalar>(j));
        }
        return s;
    }

    [[nodiscard]] Vector<Scalar> fy_samples() const
    {
        Vector<Scalar> s(height());
        for (Eigen::Index i = 0; i < s.size(); ++i)
        {
            s[i] = fy(static_cast<Scalar>(i));
        }
        return s;
    }

private:
    AxisMap<Scalar> x_;
    AxisMap<Scalar> y_;
};

/// outer applied after inner: original -> inner output -> outer output.
template <typename Scalar>
[[nodiscard]] WarpField<Scalar> compose(const WarpField<Scalar>& outer, const WarpField<Scalar>& inner)
{
    return {compose(outer.x_map(), inner.x_map()), compose(outer.y_map(), inner.y_map())};
}

template <typename Scalar>
[[nodiscard]] WarpField<Scalar> build_warp(const AxisCdf<Scalar>& cdf_x, const AxisCdf<Scalar>& cdf_y)
{
    return {AxisMap<Scalar>::from_cdf(cdf_x), AxisMap<Scalar>::from_cdf(cdf_y)};
}

/// Score matrix -> warp field with the default mass floor.
template <typename Derived>
[[nodiscard]] WarpField<typename Derived::Scalar> build_warp(const Eigen::MatrixBase<Derived>& scores)
{
    const auto [horizontal, vertical] = marginals(scores);
    return build_warp(cdf(horizontal), cdf(vertical));
}

template <typename PixelScalar>
struct WarpedImage
{
    Image<PixelScalar> pixels;
    WarpField<double> field;
};

namespace detail
{
struct LinearTap
{
    Eigen::Index lo;
    Eigen::Index hi;
    double weight;
};

[[nodiscard]] inline LinearTap linear_tap(double coord, Eigen::Index size)
{
    coord = std::clamp(coord, 0.0, static_cast<double>(size - 1));
    const auto lo = static_cast<Eigen::Index>(std::floor(coord));
    const Eigen::Index hi = std::min<Eigen::Index>(lo + 1, size - 1);
    return {lo, hi, coord - static_cast<double>(lo)};
}
}  // namespace detail

/// Bilinear resampling: output(i, j) = input(fy(i), fx(j)) per channel,
/// clamp-to-edge.
template <typename PixelScalar>
[[nodiscard]] WarpedImage<PixelScalar> warp_image(const Image<PixelScalar>& image, const WarpField<double>& field)
{
    if (image.empty() || image.height() != field.height() || image.width() != field.width())
    {
        throw std::invalid_argument("warp_image: image and warp field dimensions differ");
    }
    const Eigen::Index rows = image.height();
    const Eigen::Index cols = image.width();
    std::vector<detail::LinearTap> col_taps(static_cast<size_t>(cols));
    std::vector<detail::LinearTap> row_taps(static_cast<size_t>(rows));
    for (Eigen::Index j = 0; j < cols; ++j)
    {
        col_taps[static_cast<size_t>(j)] = detail::linear_tap(field.fx(static_cast<double>(j)), cols);
    }
    for (Eigen::Index i = 0; i < rows; ++i)
    {
        row_taps[static_cast<size_t>(i)] = detail::linear_tap(field.fy(static_cast<double>(i)), rows);
    }

    WarpedImage<PixelScalar> result{Image<PixelScalar>(rows, cols, image.channel_count()), field};
    for (size_t ch = 0; ch < image.channels.size(); ++ch)
    {
        const auto& src = image.channels[ch];
        auto& dst = result.pixels.channels[ch];
        for (Eigen::Index i = 0; i < rows; ++i)
        {
            const auto& ty = row_taps[static_cast<size_t>(i)];
            for (Eigen::Index j = 0; j < cols; ++j)
            {
                const auto& tx = col_taps[static_cast<size_t>(j)];
                const double top = (1.0 - tx.weight) * static_cast<double>(src(ty.lo, tx.lo)) +
                                   tx.weight * static_cast<double>(src(ty.lo, tx.hi));
                const double bottom = (1.0 - tx.weight) * static_cast<double>(src(ty.hi, tx.lo)) +
                                      tx.weight * static_cast<double>(src(ty.hi, tx.hi));
                dst(i, j) = static_cast<PixelScalar>((1.0 - ty.weight) * top + ty.weight * bottom);
            }
        }
    }
    return result;
}

namespace detail
{
[[nodiscard]] inline BoundingBox clamp_box(BoundingBox box, double width, double height)
{
    box.x_min = std::clamp(box.x_min, 0.0, width - 1.0);
    box.y_min = std::clamp(box.y_min, 0.0, height - 1.0);
    box.x_max = std::clamp(box.x_max, box.x_min - 1.0, width - 1.0);
    box.y_max = std::clamp(box.y_max, box.y_min - 1.0, height - 1.0);
    return box;
}
}  // namespace detail

/// Input-frame box -> output-frame box. The covered span [min, max + 1) is
/// mapped through inverse_x / inverse_y, so the warped extent along each
/// axis is the dimension times the span's attention mass fraction.
template <typename Scalar>
[[nodiscard]] BoundingBox warp_box_forward(const BoundingBox& box, const WarpField<Scalar>& field)
{
    const auto w = static_cast<double>(field.width());
    const auto h = static_cast<double>(field.height());
    const BoundingBox in = detail::clamp_box(box, w, h);
    BoundingBox out;
    out.x_min = static_cast<double>(field.inverse_x(static_cast<Scalar>(in.x_min)));
    out.x_max = static_cast<double>(field.inverse_x(static_cast<Scalar>(in.x_max + 1.0))) - 1.0;
    out.y_min = static_cast<double>(field.inverse_y(static_cast<Scalar>(in.y_min)));
    out.y_max = static_cast<double>(field.inverse_y(static_cast<Scalar>(in.y_max + 1.0))) - 1.0;
    return detail::clamp_box(out, w, h);
}

/// Output-frame box (e.g. a detection on the warped image) -> input frame.
template <typename Scalar>
[[nodiscard]] BoundingBox warp_box_inverse(const BoundingBox& box, const WarpField<Scalar>& field)
{
    const auto w = static_cast<double>(field.width());
    const auto h = static_cast<double>(field.height());
    const BoundingBox in = detail::clamp_box(box, w, h);
    BoundingBox out;
    out.x_min = static_cast<double>(field.x_map().backward(static_cast<Scalar>(in.x_min)));
    out.x_max = static_cast<double>(field.x_map().backward(static_cast<Scalar>(in.x_max + 1.0))) - 1.0;
    out.y_min = static_cast<double>(field.y_map().backward(static_cast<Scalar>(in.y_min)));
    out.y_max = static_cast<double>(field.y_map().backward(static_cast<Scalar>(in.y_max + 1.0))) - 1.0;
    return detail::clamp_box(out, w, h);
}

}  // namespace attwarp
