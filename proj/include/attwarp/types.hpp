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

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace attwarp
{

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// H x W nonnegative attention score field. Row i is image row i.
using ScoreMatrix = Matrix<double>;

/// Uniform per-entry floor added to marginals (and to all-zero score
/// matrices) so every CDF is strictly increasing.
inline constexpr double kMassFloor = 1e-8;

enum class Axis
{
    horizontal,
    vertical
};

/// Planar image with values in [0, 1]. Channel count is preserved by every
/// transform in this library.
template <typename Scalar>
struct Image
{
    std::vector<Matrix<Scalar>> channels;

    Image() = default;
    Image(Eigen::Index height, Eigen::Index width, int channel_count)
        : channels(static_cast<size_t>(channel_count), Matrix<Scalar>::Zero(height, width))
    {
    }

    [[nodiscard]] Eigen::Index height() const { return channels.empty() ? 0 : channels.front().rows(); }
    [[nodiscard]] Eigen::Index width() const { return channels.empty() ? 0 : channels.front().cols(); }
    [[nodiscard]] int channel_count() const { return static_cast<int>(channels.size()); }
    [[nodiscard]] bool empty() const { return channels.empty() || height() == 0 || width() == 0; }
};

using RgbImage = Image<float>;

/// Axis-aligned box with inclusive pixel bounds: it covers pixel columns
/// x_min..x_max and rows y_min..y_max. Along x it spans the continuous
/// interval [x_min, x_max + 1), so its extent is x_max - x_min + 1. Warped
/// boxes may have fractional bounds; an extent of zero is a degenerate box.
struct BoundingBox
{
    double x_min = 0;
    double y_min = 0;
    double x_max = 0;
    double y_max = 0;

    [[nodiscard]] double width() const { return x_max - x_min + 1.0; }
    [[nodiscard]] double height() const { return y_max - y_min + 1.0; }
    [[nodiscard]] double area() const { return width() * height(); }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

template <typename Derived>
[[nodiscard]] bool all_finite_nonnegative(const Eigen::DenseBase<Derived>& m)
{
    for (Eigen::Index r = 0; r < m.rows(); ++r)
    {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
        {
            const auto v = m(r, c);
            if (!std::isfinite(static_cast<double>(v)) || v < 0)
            {
                return false;
            }
        }
    }
    return true;
}

/// Adds kMassFloor to every entry when the matrix has no mass.
template <typename Scalar>
void ensure_positive_mass(Matrix<Scalar>& m)
{
    if (!(m.sum() > Scalar(0)))
    {
        m.array() += static_cast<Scalar>(kMassFloor);
    }
}

}  // namespace attwarp
