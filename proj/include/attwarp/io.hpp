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
#include "attwarp/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace attwarp
{

/// Malformed or unreadable input file.
class FormatError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

using Bytes = std::vector<std::uint8_t>;

[[nodiscard]] Bytes read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

// ATW1 raster: "ATW1", u32 height, u32 width, u32 dtype (0 = float32), then
// height * width little-endian float32 values in row-major order.

inline constexpr std::uint32_t kAtw1Float32 = 0;

[[nodiscard]] Bytes encode_atw1(const Matrix<float>& values);
[[nodiscard]] Matrix<float> decode_atw1(std::span<const std::uint8_t> bytes);
void write_atw1(const std::filesystem::path& path, const Matrix<float>& values);
[[nodiscard]] Matrix<float> read_atw1(const std::filesystem::path& path);

/// ATW1 file or 8/16-bit grayscale PNG (rescaled to [0, 1]), detected by
/// content. Rejects negative or non-finite values.
[[nodiscard]] ScoreMatrix read_attention_map(const std::filesystem::path& path);

/// Raw attention stack: one ATW1 raster of (layers * heads * out_tokens)
/// rows by (grid_h * grid_w) columns, ordered layer, head, output token,
/// plus a JSON sidecar
/// {"layers": n | [ids], "heads", "out_tokens", "grid_h", "grid_w"}.
[[nodiscard]] RawAttentionTensor<float> read_raw_tensor(const std::filesystem::path& stack,
                                                        const std::filesystem::path& sidecar);
void write_raw_tensor(const RawAttentionTensor<float>& raw,
                      const std::filesystem::path& stack,
                      const std::filesystem::path& sidecar);

/// Default sidecar location: the stack path with a .json extension.
[[nodiscard]] std::filesystem::path sidecar_path_for(const std::filesystem::path& stack);

/// PNG (8/16-bit, gray/RGB, alpha dropped) or baseline JPEG. Grayscale is
/// expanded to three channels. Values are scaled to [0, 1].
[[nodiscard]] RgbImage decode_image(std::span<const std::uint8_t> bytes);
[[nodiscard]] RgbImage read_image(const std::filesystem::path& path);

/// Single-channel PNG (gray or gray+alpha, 8/16-bit), scaled to [0, 1].
[[nodiscard]] Matrix<float> decode_gray_png(std::span<const std::uint8_t> bytes);

/// 8-bit RGB PNG with fixed encoder settings, so equal pixels give equal
/// bytes.
[[nodiscard]] Bytes encode_png(const RgbImage& image);
[[nodiscard]] Bytes encode_jpeg(const RgbImage& image, int quality = 95);

/// Picks PNG or JPEG from the extension (.jpg/.jpeg -> JPEG).
void write_image(const std::filesystem::path& path, const RgbImage& image);

/// Lowercase hex SHA-256.
[[nodiscard]] std::string sha256_hex(std::span<const std::uint8_t> bytes);
[[nodiscard]] std::string sha256_file(const std::filesystem::path& path);

}  // namespace attwarp
