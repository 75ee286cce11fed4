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

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>

#include <jpeglib.h>
#include <png.h>

namespace attwarp
{

namespace
{

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
constexpr std::uint8_t kJpegSignature[3] = {0xff, 0xd8, 0xff};

struct MemoryReader
{
    std::span<const std::uint8_t> bytes;
    std::size_t offset = 0;
};

void png_read_memory(png_structp png, png_bytep out, png_size_t length)
{
    auto* reader = static_cast<MemoryReader*>(png_get_io_ptr(png));
    if (reader->offset + length > reader->bytes.size())
    {
        png_error(png, "truncated PNG");
    }
    std::memcpy(out, reader->bytes.data() + reader->offset, length);
    reader->offset += length;
}

void png_write_memory(png_structp png, png_bytep data, png_size_t length)
{
    auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

void png_error_quiet(png_structp png, png_const_charp)
{
    png_longjmp(png, 1);
}

void png_warning_quiet(png_structp, png_const_charp) {}

struct DecodedPlanes
{
    std::vector<Matrix<float>> planes;
    bool gray = false;
};

struct PngReadHandles
{
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReadHandles() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

// Returns false on a libpng error; the caller turns that into FormatError.
bool decode_png_into(std::span<const std::uint8_t> bytes, DecodedPlanes& out, std::vector<png_byte>& buffer)
{
    PngReadHandles h;
    h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_quiet, png_warning_quiet);
    if (!h.png)
    {
        return false;
    }
    h.info = png_create_info_struct(h.png);
    if (!h.info)
    {
        return false;
    }
    MemoryReader reader{bytes, 0};
    if (setjmp(png_jmpbuf(h.png)))
    {
        return false;
    }
    png_set_read_fn(h.png, &reader, png_read_memory);
    png_read_info(h.png, h.info);

    const png_byte color_type = png_get_color_type(h.png, h.info);
    if (color_type == PNG_COLOR_TYPE_PALETTE)
    {
        png_set_palette_to_rgb(h.png);
    }
    if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(h.png, h.info) < 8)
    {
        png_set_expand_gray_1_2_4_to_8(h.png);
    }
    if ((color_type & PNG_COLOR_MASK_ALPHA) != 0)
    {
        png_set_strip_alpha(h.png);
    }
    else if (png_get_valid(h.png, h.info, PNG_INFO_tRNS))
    {
        png_set_tRNS_to_alpha(h.png);
        png_set_strip_alpha(h.png);
    }
    png_read_update_info(h.png, h.info);

    const png_uint_32 width = png_get_image_width(h.png, h.info);
    const png_uint_32 height = png_get_image_height(h.png, h.info);
    const int depth = png_get_bit_depth(h.png, h.info);
    const int channels = png_get_channels(h.png, h.info);
    const std::size_t row_bytes = png_get_rowbytes(h.png, h.info);
    buffer.resize(row_bytes * height);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 r = 0; r < height; ++r)
    {
        rows[r] = buffer.data() + r * row_bytes;
    }
    png_read_image(h.png, rows.data());
    png_read_end(h.png, nullptr);

    out.gray = channels == 1;
    out.planes.assign(static_cast<std::size_t>(channels), Matrix<float>(height, width));
    const float scale = depth == 16 ? 1.0f / 65535.0f : 1.0f / 255.0f;
    for (png_uint_32 r = 0; r < height; ++r)
    {
        const png_byte* row = rows[r];
        for (png_uint_32 c = 0; c < width; ++c)
        {
            for (int ch = 0; ch < channels; ++ch)
            {
                const std::size_t idx = static_cast<std::size_t>(c) * channels + ch;
                const unsigned v = depth == 16 ? (unsigned{row[2 * idx]} << 8) | row[2 * idx + 1] : row[idx];
                out.planes[static_cast<std::size_t>(ch)](r, c) = static_cast<float>(v) * scale;
            }
        }
    }
    return true;
}

DecodedPlanes decode_png(std::span<const std::uint8_t> bytes)
{
    DecodedPlanes out;
    std::vector<png_byte> buffer;
    if (!decode_png_into(bytes, out, buffer))
    {
        throw FormatError("PNG decode failed");
    }
    return out;
}

struct JpegErrorManager
{
    jpeg_error_mgr base;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo)
{
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

void jpeg_output_quiet(j_common_ptr) {}

bool decode_jpeg_into(std::span<const std::uint8_t> bytes, DecodedPlanes& out, std::vector<JSAMPLE>& buffer)
{
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    err.base.output_message = jpeg_output_quiet;
    if (setjmp(err.jump))
    {
        jpeg_destroy_decompress(&cinfo);
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const auto width = cinfo.output_width;
    const auto height = cinfo.output_height;
    const auto stride = static_cast<std::size_t>(width) * 3;
    buffer.resize(stride * height);
    while (cinfo.output_scanline < height)
    {
        JSAMPROW row = buffer.data() + static_cast<std::size_t>(cinfo.output_scanline) * stride;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);

    out.gray = false;
    out.planes.assign(3, Matrix<float>(height, width));
    for (std::size_t r = 0; r < height; ++r)
    {
        for (std::size_t c = 0; c < width; ++c)
        {
            for (std::size_t ch = 0; ch < 3; ++ch)
            {
                out.planes[ch](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    static_cast<float>(buffer[r * stride + c * 3 + ch]) / 255.0f;
            }
        }
    }
    return true;
}

std::uint8_t to_byte(float v)
{
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

std::vector<std::uint8_t> interleave_rgb8(const RgbImage& image)
{
    if (image.empty() || (image.channel_count() != 3 && image.channel_count() != 1))
    {
        throw std::invalid_argument("image encode: need a non-empty 1- or 3-channel image");
    }
    const auto h = static_cast<std::size_t>(image.height());
    const auto w = static_cast<std::size_t>(image.width());
    std::vector<std::uint8_t> pixels(h * w * 3);
    for (std::size_t r = 0; r < h; ++r)
    {
        for (std::size_t c = 0; c < w; ++c)
        {
            for (std::size_t ch = 0; ch < 3; ++ch)
            {
                const auto& plane = image.channels[image.channel_count() == 3 ? ch : 0];
                pixels[(r * w + c) * 3 + ch] = to_byte(plane(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
            }
        }
    }
    return pixels;
}

struct PngWriteHandles
{
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriteHandles() { png_destroy_write_struct(&png, info ? &info : nullptr); }
};

bool encode_png_into(const std::vector<std::uint8_t>& pixels, png_uint_32 width, png_uint_32 height, Bytes& out)
{
    PngWriteHandles h;
    h.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_quiet, png_warning_quiet);
    if (!h.png)
    {
        return false;
    }
    h.info = png_create_info_struct(h.png);
    if (!h.info)
    {
        return false;
    }
    std::vector<png_bytep> rows(height);
    for (png_uint_32 r = 0; r < height; ++r)
    {
        rows[r] = const_cast<png_bytep>(pixels.data()) + static_cast<std::size_t>(r) * width * 3;
    }
    if (setjmp(png_jmpbuf(h.png)))
    {
        return false;
    }
    png_set_write_fn(h.png, &out, png_write_memory, png_flush_noop);
    png_set_compression_level(h.png, 6);
    png_set_IHDR(h.png, h.info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(h.png, h.info);
    png_write_image(h.png, rows.data());
    png_write_end(h.png, nullptr);
    return true;
}

bool encode_jpeg_into(const std::vector<std::uint8_t>& pixels, unsigned width, unsigned height, int quality, Bytes& out)
{
    jpeg_compress_struct cinfo{};
    JpegErrorManager err{};
    unsigned char* buffer = nullptr;
    unsigned long size = 0;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    if (setjmp(err.jump))
    {
        jpeg_destroy_compress(&cinfo);
        std::free(buffer);
        return false;
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &buffer, &size);
    cinfo.image_width = width;
    cinfo.image_height = height;
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < height)
    {
        auto* row = const_cast<JSAMPLE*>(pixels.data() + static_cast<std::size_t>(cinfo.next_scanline) * width * 3);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    out.assign(buffer, buffer + size);
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    return true;
}

bool has_prefix(std::span<const std::uint8_t> bytes, std::span<const std::uint8_t> magic)
{
    return bytes.size() >= magic.size() && std::equal(magic.begin(), magic.end(), bytes.begin());
}

}  // namespace

RgbImage decode_image(std::span<const std::uint8_t> bytes)
{
    DecodedPlanes decoded;
    if (has_prefix(bytes, kPngSignature))
    {
        decoded = decode_png(bytes);
    }
    else if (has_prefix(bytes, kJpegSignature))
    {
        std::vector<JSAMPLE> buffer;
        if (!decode_jpeg_into(bytes, decoded, buffer))
        {
            throw FormatError("JPEG decode failed");
        }
    }
    else
    {
        throw FormatError("unsupported image format (expected PNG or JPEG)");
    }
    RgbImage image;
    if (decoded.gray)
    {
        image.channels.assign(3, decoded.planes.front());
    }
    else
    {
        image.channels = std::move(decoded.planes);
    }
    return image;
}

RgbImage read_image(const std::filesystem::path& path)
{
    try
    {
        return decode_image(read_file(path));
    }
    catch (const FormatError& e)
    {
        throw FormatError(path.string() + ": " + e.what());
    }
}

Matrix<float> decode_gray_png(std::span<const std::uint8_t> bytes)
{
    if (!has_prefix(bytes, kPngSignature))
    {
        throw FormatError("not a PNG");
    }
    DecodedPlanes decoded = decode_png(bytes);
    if (!decoded.gray)
    {
        throw FormatError("attention PNG must be single-channel grayscale");
    }
    return std::move(decoded.planes.front());
}

Bytes encode_png(const RgbImage& image)
{
    const auto pixels = interleave_rgb8(image);
    Bytes out;
    if (!encode_png_into(pixels, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()), out))
    {
        throw std::runtime_error("PNG encode failed");
    }
    return out;
}

Bytes encode_jpeg(const RgbImage& image, int quality)
{
    const auto pixels = interleave_rgb8(image);
    Bytes out;
    if (!encode_jpeg_into(pixels, static_cast<unsigned>(image.width()), static_cast<unsigned>(image.height()),
                          std::clamp(quality, 1, 100), out))
    {
        throw std::runtime_error("JPEG encode failed");
    }
    return out;
}

void write_image(const std::filesystem::path& path, const RgbImage& image)
{
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    write_file_atomic(path, (ext == ".jpg" || ext == ".jpeg") ? encode_jpeg(image) : encode_png(image));
}

}  // namespace attwarp
