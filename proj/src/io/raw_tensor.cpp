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

#include "attwarp/io.hpp"

#include <json.hpp>

namespace attwarp
{

using nlohmann::json;

std::filesystem::path sidecar_path_for(const std::filesystem::path& stack)
{
    std::filesystem::path p = stack;
    p.replace_extension(".json");
    return p;
}

RawAttentionTensor<float> read_raw_tensor(const std::filesystem::path& stack, const std::filesystem::path& sidecar)
{
    const Bytes text = read_file(sidecar);
    json meta;
    try
    {
        meta = json::parse(text.begin(), text.end());
    }
    catch (const json::exception& e)
    {
        throw FormatError(sidecar.string() + ": " + e.what());
    }

    RawAttentionTensor<float> raw;
    std::size_t layer_count = 0;
    try
    {
        const json& layers = meta.at("layers");
        if (layers.is_array())
        {
            raw.layer_ids = layers.get<std::vector<int>>();
            layer_count = raw.layer_ids.size();
        }
        else
        {
            layer_count = layers.get<std::size_t>();
        }
        raw.heads = meta.at("heads").get<Eigen::Index>();
        raw.out_tokens = meta.at("out_tokens").get<Eigen::Index>();
        raw.grid_h = meta.at("grid_h").get<Eigen::Index>();
        raw.grid_w = meta.at("grid_w").get<Eigen::Index>();
    }
    catch (const json::exception& e)
    {
        throw FormatError(sidecar.string() + ": " + e.what());
    }
    if (layer_count == 0 || raw.heads <= 0 || raw.out_tokens <= 0 || raw.grid_h <= 0 || raw.grid_w <= 0)
    {
        throw FormatError(sidecar.string() + ": dimensions must be positive");
    }

    const Matrix<float> values = read_atw1(stack);
    const Eigen::Index rows_per_layer = raw.heads * raw.out_tokens;
    if (values.rows() != static_cast<Eigen::Index>(layer_count) * rows_per_layer || values.cols() != raw.img_tokens())
    {
        throw FormatError(stack.string() + ": raster shape does not match sidecar");
    }
    for (std::size_t l = 0; l < layer_count; ++l)
    {
        raw.layers.emplace_back(values.middleRows(static_cast<Eigen::Index>(l) * rows_per_layer, rows_per_layer));
    }
    try
    {
        raw.validate();
    }
    catch (const std::invalid_argument& e)
    {
        throw FormatError(stack.string() + ": " + e.what());
    }
    return raw;
}

void write_raw_tensor(const RawAttentionTensor<float>& raw,
                      const std::filesystem::path& stack,
                      const std::filesystem::path& sidecar)
{
    raw.validate();
    const Eigen::Index rows_per_layer = raw.heads * raw.out_tokens;
    Matrix<float> values(static_cast<Eigen::Index>(raw.layers.size()) * rows_per_layer, raw.img_tokens());
    for (std::size_t l = 0; l < raw.layers.size(); ++l)
    {
        values.middleRows(static_cast<Eigen::Index>(l) * rows_per_layer, rows_per_layer) = raw.layers[l];
    }
    json meta;
    if (raw.layer_ids.empty())
    {
        meta["layers"] = raw.layers.size();
    }
    else
    {
        meta["layers"] = raw.layer_ids;
    }
    meta["heads"] = raw.heads;
    meta["out_tokens"] = raw.out_tokens;
    meta["grid_h"] = raw.grid_h;
    meta["grid_w"] = raw.grid_w;
    write_atw1(stack, values);
    write_file_atomic(sidecar, meta.dump(2) + "\n");
}

}  // namespace attwarp
