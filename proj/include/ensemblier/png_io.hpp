#pragma once

#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <vector>

#include <png.h>

#include "ensemblier/errors.hpp"
#include "ensemblier/preprocess.hpp"

// Thin libpng wrapper: 8-bit grayscale or RGB in and out. Palette, 16-bit and
// alpha inputs are converted on read. Each setjmp-protected region performs
// libpng calls only; buffers are allocated outside it, so an error longjmp
// never skips a destructor.

namespace ensemblier::png_io {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;

    PngReader() {
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (!png) throw Error("png_create_read_struct failed");
        info = png_create_info_struct(png);
        if (!info) {
            png_destroy_read_struct(&png, nullptr, nullptr);
            throw Error("png_create_info_struct failed");
        }
    }
    ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
    PngReader(const PngReader&) = delete;
    PngReader& operator=(const PngReader&) = delete;
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;

    PngWriter() {
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (!png) throw Error("png_create_write_struct failed");
        info = png_create_info_struct(png);
        if (!info) {
            png_destroy_write_struct(&png, nullptr);
            throw Error("png_create_info_struct failed");
        }
    }
    ~PngWriter() { png_destroy_write_struct(&png, &info); }
    PngWriter(const PngWriter&) = delete;
    PngWriter& operator=(const PngWriter&) = delete;
};

} // namespace detail

inline preprocess::ImageGrid read(const std::filesystem::path& path) {
    detail::FilePtr file(std::fopen(path.string().c_str(), "rb"));
    if (!file) throw Error("cannot open png '" + path.string() + "'");
    detail::PngReader reader;

    int height = 0, width = 0, channels = 0;
    // phase 1: header and conversion setup
    if (setjmp(png_jmpbuf(reader.png)))
        throw FormatError("png read failed for '" + path.string() + "'");
    png_init_io(reader.png, file.get());
    png_read_info(reader.png, reader.info);
    {
        const png_byte color_type = png_get_color_type(reader.png, reader.info);
        const png_byte bit_depth = png_get_bit_depth(reader.png, reader.info);
        if (bit_depth == 16) png_set_strip_16(reader.png);
        if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(reader.png);
        if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
            png_set_expand_gray_1_2_4_to_8(reader.png);
        if (png_get_valid(reader.png, reader.info, PNG_INFO_tRNS))
            png_set_tRNS_to_alpha(reader.png);
        if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(reader.png);
        png_read_update_info(reader.png, reader.info);
        height = static_cast<int>(png_get_image_height(reader.png, reader.info));
        width = static_cast<int>(png_get_image_width(reader.png, reader.info));
        channels = static_cast<int>(png_get_channels(reader.png, reader.info));
    }
    if (channels != 1 && channels != 3)
        throw FormatError("png '" + path.string() + "': unsupported channel count " +
                          std::to_string(channels));

    preprocess::ImageGrid img = preprocess::ImageGrid::filled(height, width, channels, 0);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    const std::size_t stride =
        static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
    for (int r = 0; r < height; ++r)
        rows[static_cast<std::size_t>(r)] =
            img.pixels.data() + static_cast<std::size_t>(r) * stride;

    // phase 2: pixel data, buffers already in place
    if (setjmp(png_jmpbuf(reader.png)))
        throw FormatError("png read failed for '" + path.string() + "'");
    png_read_image(reader.png, rows.data());
    png_read_end(reader.png, nullptr);
    return img;
}

inline void write(const preprocess::ImageGrid& img, const std::filesystem::path& path) {
    img.validate();
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    detail::FilePtr file(std::fopen(path.string().c_str(), "wb"));
    if (!file) throw Error("cannot open png '" + path.string() + "' for writing");
    detail::PngWriter writer;

    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    const std::size_t stride =
        static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.channels);
    for (int r = 0; r < img.height; ++r)
        rows[static_cast<std::size_t>(r)] =
            const_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(r) * stride);

    if (setjmp(png_jmpbuf(writer.png)))
        throw Error("png write failed for '" + path.string() + "'");
    png_init_io(writer.png, file.get());
    png_set_IHDR(writer.png, writer.info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(writer.png, writer.info);
    png_write_image(writer.png, rows.data());
    png_write_end(writer.png, nullptr);
}

} // namespace ensemblier::png_io
