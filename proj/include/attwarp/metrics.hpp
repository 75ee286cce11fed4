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
#include "attwarp/warp.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace attwarp
{

namespace detail
{
/// Integer pixel range [first, last] covered by inclusive bounds, clipped
/// to [0, size). Empty when first > last.
[[nodiscard]] inline std::pair<Eigen::Index, Eigen::Index> covered_range(double lo, double hi, Eigen::Index size)
{
    const auto first = std::max<Eigen::Index>(static_cast<Eigen::Index>(std::ceil(lo)), 0);
    const auto last = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(hi)), size - 1);
    return {first, last};
}

[[nodiscard]] inline bool contains(const BoundingBox& box, Eigen::Index row, Eigen::Index col)
{
    const auto r = static_cast<double>(row);
    const auto c = static_cast<double>(col);
    return c >= box.x_min && c <= box.x_max && r >= box.y_min && r <= box.y_max;
}
}  // namespace detail

/// Row-major index of the first maximal entry.
template <typename Derived>
[[nodiscard]] std::pair<Eigen::Index, Eigen::Index> argmax_row_major(const Eigen::MatrixBase<Derived>& scores)
{
    if (scores.size() == 0)
    {
        throw std::invalid_argument("argmax: empty matrix");
    }
    Eigen::Index best_r = 0;
    Eigen::Index best_c = 0;
    auto best = scores(0, 0);
    for (Eigen::Index r = 0; r < scores.rows(); ++r)
    {
        for (Eigen::Index c = 0; c < scores.cols(); ++c)
        {
            if (scores(r, c) > best)
            {
                best = scores(r, c);
                best_r = r;
                best_c = c;
            }
        }
    }
    return {best_r, best_c};
}

/// True iff the top-1 score pixel lies in any of the boxes.
template <typename Derived>
[[nodiscard]] bool pointing_game(const Eigen::MatrixBase<Derived>& scores, std::span<const BoundingBox> boxes)
{
    const auto [r, c] = argmax_row_major(scores);
    for (const auto& box : boxes)
    {
        if (detail::contains(box, r, c))
        {
            return true;
        }
    }
    return false;
}

template <typename Derived>
[[nodiscard]] bool pointing_game(const Eigen::MatrixBase<Derived>& scores, const BoundingBox& box)
{
    return pointing_game(scores, std::span<const BoundingBox>(&box, 1));
}

/// Share of the total score mass inside the union of the boxes.
template <typename Derived>
[[nodiscard]] double proportion(const Eigen::MatrixBase<Derived>& scores, std::span<const BoundingBox> boxes)
{
    if (!all_finite_nonnegative(scores))
    {
        throw std::invalid_argument("proportion: scores must be finite and >= 0");
    }
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> inside =
        Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(scores.rows(), scores.cols(), false);
    for (const auto& box : boxes)
    {
        const auto [r0, r1] = detail::covered_range(box.y_min, box.y_max, scores.rows());
        const auto [c0, c1] = detail::covered_range(box.x_min, box.x_max, scores.cols());
        if (r0 <= r1 && c0 <= c1)
        {
            inside.block(r0, c0, r1 - r0 + 1, c1 - c0 + 1).setConstant(true);
        }
    }
    double mass = 0.0;
    double total = 0.0;
    for (Eigen::Index r = 0; r < scores.rows(); ++r)
    {
        for (Eigen::Index c = 0; c < scores.cols(); ++c)
        {
            const auto v = static_cast<double>(scores(r, c));
            total += v;
            mass += inside(r, c) ? v : 0.0;
        }
    }
    if (!(total > 0.0))
    {
        throw std::invalid_argument("proportion: scores have zero mass");
    }
    return std::clamp(mass / total, 0.0, 1.0);
}

template <typename Derived>
[[nodiscard]] double proportion(const Eigen::MatrixBase<Derived>& scores, const BoundingBox& box)
{
    return proportion(scores, std::span<const BoundingBox>(&box, 1));
}

struct ExpansionStats
{
    /// Warped area / original area for every box with nonzero area.
    std::vector<double> ratios;
    std::size_t zero_area_boxes = 0;

    [[nodiscard]] double fraction_expanded() const
    {
        if (ratios.empty())
        {
            return 0.0;
        }
        const auto expanded = std::count_if(ratios.begin(), ratios.end(), [](double r) { return r > 1.0; });
        return static_cast<double>(expanded) / static_cast<double>(ratios.size());
    }

    [[nodiscard]] double mean_increase() const
    {
        if (ratios.empty())
        {
            return 0.0;
        }
        double sum = 0.0;
        for (const double r : ratios)
        {
            sum += r - 1.0;
        }
        return sum / static_cast<double>(ratios.size());
    }
};

template <typename Scalar>
[[nodiscard]] ExpansionStats expansion_stats(std::span<const BoundingBox> boxes, const WarpField<Scalar>& field)
{
    ExpansionStats stats;
    for (const auto& box : boxes)
    {
        // Intersection with the image; boxes outside it have no area.
        const BoundingBox clamped{std::max(box.x_min, 0.0), std::max(box.y_min, 0.0),
                                  std::min(box.x_max, static_cast<double>(field.width() - 1)),
                                  std::min(box.y_max, static_cast<double>(field.height() - 1))};
        if (!(clamped.width() > 0.0) || !(clamped.height() > 0.0))
        {
            ++stats.zero_area_boxes;
            continue;
        }
        const BoundingBox warped = warp_box_forward(clamped, field);
        stats.ratios.push_back(std::max(warped.width(), 0.0) * std::max(warped.height(), 0.0) / clamped.area());
    }
    return stats;
}

struct SampleMetrics
{
    std::string id;
    bool pointing_hit = false;
    double proportion = 0.0;
    ExpansionStats expansion;
};

struct CorpusMetrics
{
    std::size_t samples = 0;
    double pointing_rate = 0.0;
    double mean_proportion = 0.0;
    std::size_t boxes = 0;
    std::size_t zero_area_boxes = 0;
    double fraction_expanded = 0.0;
    double mean_increase = 0.0;
};

/// Unweighted means over samples for pointing and proportion; expansion
/// figures pool every box in the corpus.
[[nodiscard]] inline CorpusMetrics summarize(std::span<const SampleMetrics> samples)
{
    CorpusMetrics corpus;
    corpus.samples = samples.size();
    ExpansionStats pooled;
    for (const auto& s : samples)
    {
        corpus.pointing_rate += s.pointing_hit ? 1.0 : 0.0;
        corpus.mean_proportion += s.proportion;
        pooled.ratios.insert(pooled.ratios.end(), s.expansion.ratios.begin(), s.expansion.ratios.end());
        pooled.zero_area_boxes += s.expansion.zero_area_boxes;
    }
    if (!samples.empty())
    {
        corpus.pointing_rate /= static_cast<double>(samples.size());
        corpus.mean_proportion /= static_cast<double>(samples.size());
    }
    corpus.boxes = pooled.ratios.size();
    corpus.zero_area_boxes = pooled.zero_area_boxes;
    corpus.fraction_expanded = pooled.fraction_expanded();
    corpus.mean_increase = pooled.mean_increase();
    return corpus;
}

struct MetricReport
{
    std::vector<SampleMetrics> samples;
    CorpusMetrics corpus;
    std::size_t skipped_lines = 0;
};

}  // namespace attwarp
