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

#include "attwarp/aggregation.hpp"
#include "attwarp/chains.hpp"
#include "attwarp/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace attwarp::cli
{

enum ExitCode : int
{
    kSuccess = 0,
    kHardFailure = 1,
    kPartialFailure = 2,
    kProviderExhausted = 3,
};

inline constexpr const char* kOutputDirEnv = "ATTWARP_OUTPUT_DIR";

struct ResizePolicy
{
    enum class Mode
    {
        none,
        stretch,
        pad
    };
    Mode mode = Mode::none;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
};

/// Region of the resized canvas occupied by image content.
struct ContentRect
{
    Eigen::Index top = 0;
    Eigen::Index left = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Eigen::Index canvas_rows = 0;
    Eigen::Index canvas_cols = 0;
};

[[nodiscard]] ContentRect content_rect(const ResizePolicy& policy, Eigen::Index rows, Eigen::Index cols);

/// size: "512" (square) or "WxH". policy: "stretch" or "pad". An empty size
/// means no resize.
[[nodiscard]] ResizePolicy parse_resize(const std::string& size, const std::string& policy);

struct MapOptions
{
    SharpnessTransform transform = SharpnessTransform::identity;
    int smooth_k = 3;
};

[[nodiscard]] RgbImage prepare_image(const RgbImage& image, const ResizePolicy& policy);

/// Brings an attention map onto the prepared image's pixel grid. Maps the
/// size of the original image (or of the resized canvas) are treated as
/// full resolution; smaller maps are token grids and go through
/// postprocess(). Anything else is a dimension mismatch.
[[nodiscard]] ScoreMatrix prepare_attention(const ScoreMatrix& map,
                                            Eigen::Index image_rows,
                                            Eigen::Index image_cols,
                                            const ResizePolicy& policy,
                                            const MapOptions& options);

struct WarpJob
{
    std::vector<std::filesystem::path> images;
    std::vector<std::filesystem::path> attentions;
    MapOptions map;
    ResizePolicy resize;
    std::filesystem::path out_dir = ".";
    unsigned jobs = 0;
};

struct ChainJob
{
    std::filesystem::path image;
    std::vector<std::filesystem::path> attentions;
    std::optional<std::string> extractor_cmd;
    MapOptions map;
    ResizePolicy resize;
    ChainConfig chain;
    std::filesystem::path out_dir = ".";
};

struct MetricsJob
{
    std::filesystem::path annotations;
    MapOptions map;
    std::filesystem::path out_dir = ".";
};

struct ExportJob
{
    std::vector<std::filesystem::path> attentions;
    std::filesystem::path out_dir = ".";
    unsigned jobs = 0;
};

struct AggregateJob
{
    std::filesystem::path raw;
    std::optional<std::filesystem::path> sidecar;
    std::vector<int> layers;
    std::optional<std::string> preset;
    std::optional<Eigen::Index> height;
    std::optional<Eigen::Index> width;
    MapOptions map;
    std::filesystem::path out;
};

int cmd_warp(const WarpJob& job);
int cmd_chain(const ChainJob& job);
int cmd_metrics(const MetricsJob& job);
int cmd_export_targets(const ExportJob& job);
int cmd_aggregate(const AggregateJob& job);

/// Expands `--config file.json` into command-line flags for the selected
/// subcommand. Flags given explicitly win; the output-directory key is
/// dropped when the environment override is set.
[[nodiscard]] std::vector<std::string> expand_config(std::vector<std::string> args);

/// Full command-line entry point; args excludes the program name.
int run(std::vector<std::string> args);

}  // namespace attwarp::cli
