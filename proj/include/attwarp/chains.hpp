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

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace attwarp
{

inline constexpr double kKlSmoothing = 1e-10;

struct ChainConfig
{
    double kl_epsilon = 0.2;
    int max_iterations = 5;

    void validate() const
    {
        if (!(kl_epsilon >= 0.0) || !std::isfinite(kl_epsilon))
        {
            throw std::invalid_argument("chain: kl_epsilon must be finite and >= 0");
        }
        if (max_iterations < 1)
        {
            throw std::invalid_argument("chain: max_iterations must be >= 1");
        }
    }
};

/// Nonnegative H x W field summing to 1.
struct AttentionDistribution
{
    Matrix<double> probabilities;

    template <typename Derived>
    [[nodiscard]] static AttentionDistribution from_scores(const Eigen::MatrixBase<Derived>& scores)
    {
        if (!all_finite_nonnegative(scores))
        {
            throw std::invalid_argument("distribution: scores must be finite and >= 0");
        }
        const double total = static_cast<double>(scores.sum());
        if (!(total > 0.0))
        {
            throw std::invalid_argument("distribution: scores have zero mass");
        }
        return {scores.template cast<double>() / total};
    }
};

/// KL(p || q) after adding `smoothing` to every entry of both and
/// renormalizing.
[[nodiscard]] inline double kl_divergence(const AttentionDistribution& p,
                                          const AttentionDistribution& q,
                                          double smoothing = kKlSmoothing)
{
    if (p.probabilities.rows() != q.probabilities.rows() || p.probabilities.cols() != q.probabilities.cols())
    {
        throw std::invalid_argument("kl_divergence: dimension mismatch");
    }
    const auto n = static_cast<double>(p.probabilities.size());
    const Eigen::ArrayXXd ps = (p.probabilities.array() + smoothing) / (p.probabilities.sum() + n * smoothing);
    const Eigen::ArrayXXd qs = (q.probabilities.array() + smoothing) / (q.probabilities.sum() + n * smoothing);
    return std::max(0.0, (ps * (ps / qs).log()).sum());
}

/// Resamples a score field living on a warped frame back onto the original
/// frame: original pixel (r, c) reads the warped frame at
/// (inverse_y(r), inverse_x(c)).
template <typename Derived>
[[nodiscard]] Matrix<double> pull_back(const Eigen::MatrixBase<Derived>& warped_scores, const WarpField<double>& composed)
{
    const Eigen::Index rows = composed.height();
    const Eigen::Index cols = composed.width();
    if (warped_scores.rows() != rows || warped_scores.cols() != cols)
    {
        throw std::invalid_argument("pull_back: score and field dimensions differ");
    }
    std::vector<detail::LinearTap> col_taps(static_cast<size_t>(cols));
    for (Eigen::Index c = 0; c < cols; ++c)
    {
        col_taps[static_cast<size_t>(c)] = detail::linear_tap(composed.inverse_x(static_cast<double>(c)), cols);
    }
    Matrix<double> out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
    {
        const auto ty = detail::linear_tap(composed.inverse_y(static_cast<double>(r)), rows);
        for (Eigen::Index c = 0; c < cols; ++c)
        {
            const auto& tx = col_taps[static_cast<size_t>(c)];
            const double top = (1.0 - tx.weight) * static_cast<double>(warped_scores(ty.lo, tx.lo)) +
                               tx.weight * static_cast<double>(warped_scores(ty.lo, tx.hi));
            const double bottom = (1.0 - tx.weight) * static_cast<double>(warped_scores(ty.hi, tx.lo)) +
                                  tx.weight * static_cast<double>(warped_scores(ty.hi, tx.hi));
            out(r, c) = (1.0 - ty.weight) * top + ty.weight * bottom;
        }
    }
    return out;
}

enum class StopReason
{
    kl_converged,
    max_iterations,
    provider_exhausted
};

[[nodiscard]] inline std::string_view to_string(StopReason reason)
{
    switch (reason)
    {
        case StopReason::kl_converged:
            return "kl_converged";
        case StopReason::max_iterations:
            return "max_iterations";
        case StopReason::provider_exhausted:
            return "provider_exhausted";
    }
    return "max_iterations";
}

struct ChainStep
{
    int depth = 0;
    /// Warp from frame depth-1 to frame depth.
    WarpField<double> step_field;
    /// Warp from the original frame to frame depth.
    WarpField<double> composed_field;
    /// Attention that drove this step, pulled back to the original frame.
    AttentionDistribution attention;
    /// KL(P_depth || P_depth-1) of the attention measured on the result of
    /// this step; empty when no further attention was requested.
    std::optional<double> kl;
};

struct ChainTrace
{
    std::vector<ChainStep> steps;
    StopReason stop_reason = StopReason::max_iterations;
};

template <typename PixelScalar>
using AttentionProvider = std::function<std::optional<ScoreMatrix>(const Image<PixelScalar>&)>;

template <typename PixelScalar>
struct ChainResult
{
    /// Final iterated image together with the composed original->final field.
    WarpedImage<PixelScalar> warped;
    ChainTrace trace;
};

/// Iteratively re-warps with fresh attention until successive attention
/// distributions (compared on the original frame) differ by less than
/// kl_epsilon, or max_iterations warps have been applied. A provider that
/// returns no map ends the chain with the best result so far.
template <typename PixelScalar>
[[nodiscard]] ChainResult<PixelScalar> run_chain(const Image<PixelScalar>& image,
                                                 const AttentionProvider<PixelScalar>& provider,
                                                 const ChainConfig& config = {})
{
    config.validate();
    if (image.empty())
    {
        throw std::invalid_argument("run_chain: empty image");
    }
    const Eigen::Index rows = image.height();
    const Eigen::Index cols = image.width();
    auto checked = [&](std::optional<ScoreMatrix> scores) {
        if (scores && (scores->rows() != rows || scores->cols() != cols))
        {
            throw std::invalid_argument("run_chain: provider returned a map of the wrong size");
        }
        if (scores)
        {
            if (!all_finite_nonnegative(*scores))
            {
                throw std::invalid_argument("run_chain: provider returned negative or non-finite scores");
            }
            ensure_positive_mass(*scores);
        }
        return scores;
    };

    ChainResult<PixelScalar> result{{image, WarpField<double>::identity(rows, cols)}, {}};
    auto scores = checked(provider(image));
    if (!scores)
    {
        result.trace.stop_reason = StopReason::provider_exhausted;
        return result;
    }
    auto previous = AttentionDistribution::from_scores(*scores);

    for (int depth = 1;; ++depth)
    {
        auto step_field = build_warp(*scores);
        result.warped.pixels = warp_image(result.warped.pixels, step_field).pixels;
        result.warped.field = compose(step_field, result.warped.field);
        result.trace.steps.push_back({depth, std::move(step_field), result.warped.field, previous, std::nullopt});

        if (depth >= config.max_iterations)
        {
            result.trace.stop_reason = StopReason::max_iterations;
            break;
        }
        scores = checked(provider(result.warped.pixels));
        if (!scores)
        {
            result.trace.stop_reason = StopReason::provider_exhausted;
            break;
        }
        Matrix<double> pulled = pull_back(*scores, result.warped.field);
        ensure_positive_mass(pulled);
        auto current = AttentionDistribution::from_scores(pulled);
        const double kl = kl_divergence(current, previous);
        result.trace.steps.back().kl = kl;
        previous = std::move(current);
        if (kl < config.kl_epsilon)
        {
            result.trace.stop_reason = StopReason::kl_converged;
            break;
        }
    }
    return result;
}

}  // namespace attwarp
