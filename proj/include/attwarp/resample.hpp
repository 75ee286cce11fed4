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
#include <numbers>
#include <stdexcept>
#include <vector>

namespace attwarp
{

inline constexpr double kLanczosLobes = 3.0;

[[nodiscard]] inline double lanczos3(double x)
{
    x = std::abs(x);
    if (x >= kLanczosLobes)
    {
        return 0.0;
    }
    if (x < 1e-12)
    {
        return 1.0;
    }
    const double px = std::numbers::pi * x;
    return kLanczosLobes * std::sin(px) * std::sin(px / kLanczosLobes) / (px * px);
}

/// Normalized 1-D Lanczos-3 taps mapping `in_size` samples to `out_size`.
/// Output sample i is centred at input coordinate (i + 0.5) * in/out in
/// pixel-edge units; when downsampling the kernel is stretched by in/out.
struct ResampleTaps
{
    std::vector<Eigen::Index> first;
    std::vector<std::vector<double>> weights;

    ResampleTaps(Eigen::Index in_size, Eigen::Index out_size)
    {
        if (in_size <= 0 || out_size <= 0)
        {
            throw std::invalid_argument("resample: sizes must be positive");
        }
        const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
        const double filter_scale = std::max(scale, 1.0);
        const double support = kLanczosLobes * filter_scale;
        first.resize(static_cast<size_t>(out_size));
        weights.resize(static_cast<size_t>(out_size));
        for (Eigen::Index i = 0; i < out_size; ++i)
        {
            const double center = (static_cast<double>(i) + 0.5) * scale;
            const auto lo = std::max<Eigen::Index>(
                static_cast<Eigen::Index>(std::floor(center - support + 0.5)), 0);
            const auto hi = std::min<Eigen::Index>(
                static_cast<Eigen::Index>(std::floor(center + support + 0.5)), in_size);
            std::vector<double> w;
            double total = 0.0;
            for (Eigen::Index k = lo; k < hi; ++k)
            {
                const double v = lanczos3((static_cast<double>(k) + 0.5 - center) / filter_scale);
                w.push_back(v);
                total += v;
            }
            if (total != 0.0)
            {
                for (double& v : w)
                {
                    v /= total;
                }
            }
            first[static_cast<size_t>(i)] = lo;
            weights[static_cast<size_t>(i)] = std::move(w);
        }
    }
};

/// Separable Lanczos-3 resize. Identity when the shape is unchanged.
template <typename Derived>
[[nodiscard]] Matrix<typename Derived::Scalar> lanczos_resize(
    const Eigen::MatrixBase<Derived>& src,
    Eigen::Index rows,
    Eigen::Index cols)
{
    using Scalar = typename Derived::Scalar;
    if (src.rows() == rows && src.cols() == cols)
    {
        return src;
    }
    const ResampleTaps col_taps(src.cols(), cols);
    const ResampleTaps row_taps(src.rows(), rows);

    Matrix<double> horizontal(src.rows(), cols);
    for (Eigen::Index r = 0; r < src.rows(); ++r)
    {
        for (Eigen::Index c = 0; c < cols; ++c)
        {
            const auto& w = col_taps.weights[static_cast<size_t>(c)];
            const Eigen::Index base = col_taps.first[static_cast<size_t>(c)];
            double acc = 0.0;
            for (size_t k = 0; k < w.size(); ++k)
            {
                acc += w[k] * static_cast<double>(src(r, base + static_cast<Eigen::Index>(k)));
            }
            horizontal(r, c) = acc;
        }
    }

    Matrix<Scalar> out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
    {
        const auto& w = row_taps.weights[static_cast<size_t>(r)];
        const Eigen::Index base = row_taps.first[static_cast<size_t>(r)];
        for (Eigen::Index c = 0; c < cols; ++c)
        {
            double acc = 0.0;
            for (size_t k = 0; k < w.size(); ++k)
            {
                acc += w[k] * horizontal(base + static_cast<Eigen::Index>(k), c);
            }
            out(r, c) = static_cast<Scalar>(acc);
        }
    }
    return out;
}

/// k x k mean filter, stride 1, same-size output. Windows are truncated at
/// the border and averaged over the in-bounds entries only, so constant
/// fields are fixed points. k == 1 returns the input.
template <typename Derived>
[[nodiscard]] Matrix<typename Derived::Scalar> box_smooth(const Eigen::MatrixBase<Derived>& src, int k)
{
    using Scalar = typename Derived::Scalar;
    if (k < 1 || k % 2 == 0)
    {
        throw std::invalid_argument("box_smooth: kernel size must be odd and >= 1");
    }
    if (k == 1)
    {
        return src;
    }
    const Eigen::Index half = k / 2;
    const Eigen::Index rows = src.rows();
    const Eigen::Index cols = src.cols();

    Matrix<double> row_pass(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
    {
        for (Eigen::Index c = 0; c < cols; ++c)
        {
            const Eigen::Index lo = std::max<Eigen::Index>(c - half, 0);
            const Eigen::Index hi = std::min<Eigen::Index>(c + half, cols - 1);
            double acc = 0.0;
            for (Eigen::Index t = lo; t <= hi; ++t)
            {
                acc += static_cast<double>(src(r, t));
            }
            row_pass(r, c) = acc / static_cast<double>(hi - lo + 1);
        }
    }
    Matrix<Scalar> out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
    {
        const Eigen::Index lo = std::max<Eigen::Index>(r - half, 0);
        const Eigen::Index hi = std::min<Eigen::Index>(r + half, rows - 1);
        for (Eigen::Index c = 0; c < cols; ++c)
        {
            double acc = 0.0;
            for (Eigen::Index t = lo; t <= hi; ++t)
            {
                acc += row_pass(t, c);
            }
            out(r, c) = static_cast<Scalar>(acc / static_cast<double>(hi - lo + 1));
        }
    }
    return out;
}

template <typename Scalar>
[[nodiscard]] Image<Scalar> lanczos_resize(const Image<Scalar>& image, Eigen::Index rows, Eigen::Index cols)
{
    Image<Scalar> out;
    out.channels.reserve(image.channels.size());
    for (const auto& plane : image.channels)
    {
        out.channels.push_back(
            lanczos_resize(plane, rows, cols).cwiseMax(Scalar(0)).cwiseMin(Scalar(1)));
    }
    return out;
}

}  // namespace attwarp
