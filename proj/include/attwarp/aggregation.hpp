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

#include "attwarp/resample.hpp"
#include "attwarp/types.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace attwarp
{

/// Cross-attention weights from the output tokens of a language model to
/// the image tokens of its vision grid.
///
/// Each layer record is a (heads * out_tokens) x (grid_h * grid_w) matrix.
/// Row h * out_tokens + m holds the weights from output token m under head
/// h; column t = i * grid_w + j is image token (i, j).
template <typename Scalar>
struct RawAttentionTensor
{
    std::vector<Matrix<Scalar>> layers;
    /// Model layer index of each record; defaults to 0..layers-1.
    std::vector<int> layer_ids;
    Eigen::Index heads = 0;
    Eigen::Index out_tokens = 0;
    Eigen::Index grid_h = 0;
    Eigen::Index grid_w = 0;

    [[nodiscard]] Eigen::Index img_tokens() const { return grid_h * grid_w; }

    /// Throws std::invalid_argument if any shape or value invariant fails.
    void validate() const
    {
        if (heads <= 0 || out_tokens <= 0 || grid_h <= 0 || grid_w <= 0)
        {
            throw std::invalid_argument("raw attention: dimensions must be positive");
        }
        if (layers.empty())
        {
            throw std::invalid_argument("raw attention: no layer records");
        }
        if (!layer_ids.empty() && layer_ids.size() != layers.size())
        {
            throw std::invalid_argument("raw attention: layer_ids size does not match layer count");
        }
        for (const auto& layer : layers)
        {
            if (layer.rows() != heads * out_tokens || layer.cols() != img_tokens())
            {
                throw std::invalid_argument("raw attention: layer record shape mismatch");
            }
            if (!all_finite_nonnegative(layer))
            {
                throw std::invalid_argument("raw attention: weights must be finite and >= 0");
            }
        }
    }

    [[nodiscard]] int layer_id(size_t record) const
    {
        return layer_ids.empty() ? static_cast<int>(record) : layer_ids[record];
    }
};

/// Decoder layer used for attention by default for each model family. A
/// zero grid size means the token grid depends on the input resolution.
struct LayerPreset
{
    std::string_view name;
    int layer;
    Eigen::Index grid_h;
    Eigen::Index grid_w;
};

inline constexpr LayerPreset kLlavaPreset{"llava", 20, 24, 24};
inline constexpr LayerPreset kQwenPreset{"qwen", 16, 0, 0};

[[nodiscard]] inline std::optional<LayerPreset> find_layer_preset(std::string_view name)
{
    for (const auto& preset : {kLlavaPreset, kQwenPreset})
    {
        if (preset.name == name)
        {
            return preset;
        }
    }
    return std::nullopt;
}

/// Mean of the weights over output tokens, heads, and the selected layers,
/// reshaped to the token grid.
template <typename Scalar>
[[nodiscard]] Matrix<Scalar> aggregate(const RawAttentionTensor<Scalar>& raw, std::vector<int> layer_select)
{
    raw.validate();
    if (layer_select.empty())
    {
        throw std::invalid_argument("aggregate: empty layer selection");
    }
    std::sort(layer_select.begin(), layer_select.end());
    layer_select.erase(std::unique(layer_select.begin(), layer_select.end()), layer_select.end());

    Eigen::Matrix<double, 1, Eigen::Dynamic> sum = Eigen::Matrix<double, 1, Eigen::Dynamic>::Zero(raw.img_tokens());
    for (const int id : layer_select)
    {
        std::optional<size_t> record;
        for (size_t r = 0; r < raw.layers.size(); ++r)
        {
            if (raw.layer_id(r) == id)
            {
                record = r;
                break;
            }
        }
        if (!record)
        {
            throw std::out_of_range("aggregate: layer " + std::to_string(id) + " not present");
        }
        sum += raw.layers[*record].template cast<double>().colwise().sum();
    }
    const double count = static_cast<double>(layer_select.size()) * static_cast<double>(raw.heads) *
                         static_cast<double>(raw.out_tokens);
    const Eigen::Matrix<double, 1, Eigen::Dynamic> mean = sum / count;
    return Eigen::Map<const Matrix<double>>(mean.data(), raw.grid_h, raw.grid_w).template cast<Scalar>();
}

/// Elementwise monotone map controlling how strongly high scores dominate.
enum class SharpnessTransform
{
    sqrt,
    identity,
    square,
    cube
};

[[nodiscard]] inline std::string_view to_string(SharpnessTransform t)
{
    switch (t)
    {
        case SharpnessTransform::sqrt:
            return "sqrt";
        case SharpnessTransform::identity:
            return "identity";
        case SharpnessTransform::square:
            return "square";
        case SharpnessTransform::cube:
            return "cube";
    }
    return "identity";
}

[[nodiscard]] inline SharpnessTransform parse_transform(std::string_view name)
{
    for (const auto t : {SharpnessTransform::sqrt, SharpnessTransform::identity, SharpnessTransform::square,
                         SharpnessTransform::cube})
    {
        if (to_string(t) == name)
        {
            return t;
        }
    }
    throw std::invalid_argument("unknown transform '" + std::string(name) + "'");
}

template <typename Derived>
[[nodiscard]] Matrix<typename Derived::Scalar> apply_transform(const Eigen::MatrixBase<Derived>& m,
                                                               SharpnessTransform t)
{
    switch (t)
    {
        case SharpnessTransform::sqrt:
            return m.array().sqrt().matrix();
        case SharpnessTransform::identity:
            return m;
        case SharpnessTransform::square:
            return m.array().square().matrix();
        case SharpnessTransform::cube:
            return m.array().cube().matrix();
    }
    return m;
}

struct PostprocessOptions
{
    Eigen::Index target_h = 0;
    Eigen::Index target_w = 0;
    int smooth_k = 3;
    SharpnessTransform transform = SharpnessTransform::identity;
};

/// Token grid -> full-resolution score matrix: Lanczos-3 upsample, clamp
/// at zero, k x k mean filter, sharpness transform.
template <typename Derived>
[[nodiscard]] ScoreMatrix postprocess(const Eigen::MatrixBase<Derived>& grid, const PostprocessOptions& opts)
{
    if (opts.target_h <= 0 || opts.target_w <= 0 || grid.rows() <= 0 || grid.cols() <= 0)
    {
        throw std::invalid_argument("postprocess: dimensions must be positive");
    }
    if (opts.smooth_k < 1 || opts.smooth_k % 2 == 0)
    {
        throw std::invalid_argument("postprocess: smooth_k must be odd and >= 1");
    }
    if (opts.target_h < grid.rows() || opts.target_w < grid.cols())
    {
        throw std::invalid_argument("postprocess: target must not be smaller than the grid");
    }
    if (!all_finite_nonnegative(grid))
    {
        throw std::invalid_argument("postprocess: grid must be finite and >= 0");
    }
    ScoreMatrix up = lanczos_resize(grid.template cast<double>(), opts.target_h, opts.target_w);
    up = up.cwiseMax(0.0);
    ScoreMatrix out = apply_transform(box_smooth(up, opts.smooth_k), opts.transform);
    ensure_positive_mass(out);
    return out;
}

}  // namespace attwarp
