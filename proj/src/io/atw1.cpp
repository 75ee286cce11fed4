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

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <thread>

#include <unistd.h>

namespace attwarp
{

namespace
{
constexpr std::uint8_t kAtw1Magic[4] = {'A', 'T', 'W', '1'};
constexpr std::size_t kAtw1HeaderSize = 16;
constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_u32(Bytes& out, std::size_t offset, std::uint32_t v)
{
    for (std::size_t k = 0; k < 4; ++k)
    {
        out[offset + k] = static_cast<std::uint8_t>((v >> (8 * k)) & 0xffu);
    }
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset)
{
    std::uint32_t v = 0;
    for (int k = 3; k >= 0; --k)
    {
        v = (v << 8) | bytes[offset + static_cast<std::size_t>(k)];
    }
    return v;
}

bool starts_with(std::span<const std::uint8_t> bytes, std::span<const std::uint8_t> magic)
{
    return bytes.size() >= magic.size() && std::memcmp(bytes.data(), magic.data(), magic.size()) == 0;
}
}  // namespace

Bytes read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw FormatError("cannot open " + path.string());
    }
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    static std::atomic<unsigned> counter{0};
    std::ostringstream suffix;
    suffix << ".tmp." << ::getpid() << '.' << std::hash<std::thread::id>{}(std::this_thread::get_id()) << '.'
           << counter.fetch_add(1);
    std::filesystem::path tmp = path;
    tmp += suffix.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
        {
            throw std::runtime_error("cannot write " + tmp.string());
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out)
        {
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text)
{
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Bytes encode_atw1(const Matrix<float>& values)
{
    Bytes out(kAtw1HeaderSize + static_cast<std::size_t>(values.size()) * 4);
    std::memcpy(out.data(), kAtw1Magic, sizeof(kAtw1Magic));
    put_u32(out, 4, static_cast<std::uint32_t>(values.rows()));
    put_u32(out, 8, static_cast<std::uint32_t>(values.cols()));
    put_u32(out, 12, kAtw1Float32);
    std::size_t offset = kAtw1HeaderSize;
    for (Eigen::Index r = 0; r < values.rows(); ++r)
    {
        for (Eigen::Index c = 0; c < values.cols(); ++c)
        {
            put_u32(out, offset, std::bit_cast<std::uint32_t>(values(r, c)));
            offset += 4;
        }
    }
    return out;
}

Matrix<float> decode_atw1(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < kAtw1HeaderSize || !starts_with(bytes, kAtw1Magic))
    {
        throw FormatError("ATW1: bad magic or truncated header");
    }
    const std::uint32_t height = get_u32(bytes, 4);
    const std::uint32_t width = get_u32(bytes, 8);
    const std::uint32_t dtype = get_u32(bytes, 12);
    if (dtype != kAtw1Float32)
    {
        throw FormatError("ATW1: unsupported dtype tag " + std::to_string(dtype));
    }
    const std::uint64_t count = std::uint64_t{height} * width;
    if (bytes.size() != kAtw1HeaderSize + count * 4)
    {
        throw FormatError("ATW1: payload size does not match " + std::to_string(height) + "x" +
                          std::to_string(width));
    }
    Matrix<float> values(height, width);
    std::size_t offset = kAtw1HeaderSize;
    for (Eigen::Index r = 0; r < values.rows(); ++r)
    {
        for (Eigen::Index c = 0; c < values.cols(); ++c)
        {
            values(r, c) = std::bit_cast<float>(get_u32(bytes, offset));
            offset += 4;
        }
    }
    return values;
}

void write_atw1(const std::filesystem::path& path, const Matrix<float>& values)
{
    write_file_atomic(path, encode_atw1(values));
}

Matrix<float> read_atw1(const std::filesystem::path& path)
{
    try
    {
        return decode_atw1(read_file(path));
    }
    catch (const FormatError& e)
    {
        throw FormatError(path.string() + ": " + e.what());
    }
}

ScoreMatrix read_attention_map(const std::filesystem::path& path)
{
    const Bytes bytes = read_file(path);
    ScoreMatrix scores;
    if (starts_with(bytes, kAtw1Magic))
    {
        scores = decode_atw1(bytes).cast<double>();
    }
    else if (starts_with(bytes, kPngMagic))
    {
        scores = decode_gray_png(bytes).cast<double>();
    }
    else
    {
        throw FormatError(path.string() + ": not an ATW1 or PNG attention map");
    }
    if (scores.size() == 0 || !all_finite_nonnegative(scores))
    {
        throw FormatError(path.string() + ": attention values must be finite and >= 0");
    }
    return scores;
}

}  // namespace attwarp
