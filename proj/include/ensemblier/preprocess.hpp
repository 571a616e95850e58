#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ensemblier/errors.hpp"

// Input-resizing strategies as pure pixel-grid transforms. All interpolation
// is bilinear with half-pixel-center sampling; results are pinned so test
// vectors stay bit-exact.

namespace ensemblier::preprocess {

/// 8-bit image, row-major, interleaved channels (1 = grayscale, 3 = RGB).
struct ImageGrid {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;

    static ImageGrid filled(int height, int width, int channels, std::uint8_t value) {
        if (height < 1 || width < 1 || (channels != 1 && channels != 3))
            throw ValidationError("image: bad dimensions " + std::to_string(height) + "x" +
                                  std::to_string(width) + "x" + std::to_string(channels));
        ImageGrid img;
        img.height = height;
        img.width = width;
        img.channels = channels;
        img.pixels.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
                              static_cast<std::size_t>(channels),
                          value);
        return img;
    }

    std::uint8_t at(int row, int col, int ch = 0) const {
        return pixels[index(row, col, ch)];
    }
    std::uint8_t& at(int row, int col, int ch = 0) { return pixels[index(row, col, ch)]; }

    std::size_t index(int row, int col, int ch) const {
        return (static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(col)) *
                   static_cast<std::size_t>(channels) +
               static_cast<std::size_t>(ch);
    }

    void validate() const {
        if (height < 1 || width < 1) throw ValidationError("image: empty grid");
        if (channels != 1 && channels != 3)
            throw ValidationError("image: channels must be 1 or 3");
        if (pixels.size() != static_cast<std::size_t>(height) *
                                 static_cast<std::size_t>(width) *
                                 static_cast<std::size_t>(channels))
            throw ValidationError("image: pixel buffer size mismatch");
    }

    bool operator==(const ImageGrid&) const = default;
};

inline constexpr std::uint8_t kWhite = 255;

/// Bilinear resample with half-pixel centers; same-size input is copied
/// through unchanged.
inline ImageGrid bilinear_resize(const ImageGrid& img, int out_height, int out_width) {
    img.validate();
    if (out_height < 1 || out_width < 1)
        throw ValidationError("resize: target dimensions must be positive");
    if (out_height == img.height && out_width == img.width) return img;

    ImageGrid out = ImageGrid::filled(out_height, out_width, img.channels, 0);
    for (int r = 0; r < out_height; ++r) {
        double sy = (static_cast<double>(r) + 0.5) * static_cast<double>(img.height) /
                        static_cast<double>(out_height) -
                    0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(img.height - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double fy = sy - static_cast<double>(y0);
        for (int c = 0; c < out_width; ++c) {
            double sx = (static_cast<double>(c) + 0.5) * static_cast<double>(img.width) /
                            static_cast<double>(out_width) -
                        0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(img.width - 1));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double fx = sx - static_cast<double>(x0);
            for (int ch = 0; ch < img.channels; ++ch) {
                const double top = static_cast<double>(img.at(y0, x0, ch)) * (1.0 - fx) +
                                   static_cast<double>(img.at(y0, x1, ch)) * fx;
                const double bottom = static_cast<double>(img.at(y1, x0, ch)) * (1.0 - fx) +
                                      static_cast<double>(img.at(y1, x1, ch)) * fx;
                const double v = top * (1.0 - fy) + bottom * fy;
                out.at(r, c, ch) = static_cast<std::uint8_t>(
                    std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return out;
}

/// Pad the shorter dimension symmetrically to a square of side max(H, W); an
/// odd remainder goes to the bottom/right. Grayscale pads white; RGB
/// replicates the nearest edge pixel (white padding washes out color images).
inline ImageGrid pad_to_square(const ImageGrid& img) {
    img.validate();
    if (img.height == img.width) return img;
    const int side = std::max(img.height, img.width);
    const int pad_top = (side - img.height) / 2;
    const int pad_left = (side - img.width) / 2;

    ImageGrid out = ImageGrid::filled(side, side, img.channels, kWhite);
    for (int r = 0; r < side; ++r) {
        const int src_r = std::clamp(r - pad_top, 0, img.height - 1);
        const bool r_inside = r >= pad_top && r < pad_top + img.height;
        for (int c = 0; c < side; ++c) {
            const int src_c = std::clamp(c - pad_left, 0, img.width - 1);
            const bool inside = r_inside && c >= pad_left && c < pad_left + img.width;
            for (int ch = 0; ch < img.channels; ++ch) {
                if (inside)
                    out.at(r, c, ch) = img.at(r - pad_top, c - pad_left, ch);
                else if (img.channels == 3)
                    out.at(r, c, ch) = img.at(src_r, src_c, ch);
            }
        }
    }
    return out;
}

/// Center the image on a white target x target canvas (odd margins go to the
/// bottom/right). Requires H <= target and W <= target.
inline ImageGrid center_pad(const ImageGrid& img, int target) {
    img.validate();
    if (img.height > target || img.width > target)
        throw ValidationError("center_pad: image larger than target");
    const int pad_top = (target - img.height) / 2;
    const int pad_left = (target - img.width) / 2;
    ImageGrid out = ImageGrid::filled(target, target, img.channels, kWhite);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            for (int ch = 0; ch < img.channels; ++ch)
                out.at(r + pad_top, c + pad_left, ch) = img.at(r, c, ch);
    return out;
}

/// Replicate the image by wrap-around to base x base: intermediate pixel
/// (i, j) = source (i mod H, j mod W). Pure integer copy, no interpolation.
inline ImageGrid tile_wrap(const ImageGrid& img, int base) {
    img.validate();
    if (base < 1) throw ValidationError("tile_wrap: base must be positive");
    ImageGrid out = ImageGrid::filled(base, base, img.channels, 0);
    for (int r = 0; r < base; ++r)
        for (int c = 0; c < base; ++c)
            for (int ch = 0; ch < img.channels; ++ch)
                out.at(r, c, ch) = img.at(r % img.height, c % img.width, ch);
    return out;
}

/// SqR: pad to square, then resize to target x target.
inline ImageGrid sqr_resize(const ImageGrid& img, int target) {
    return bilinear_resize(pad_to_square(img), target, target);
}

/// Pad: center on a white target x target canvas when the image fits; larger
/// images fall back to sqr_resize.
inline ImageGrid pad_resize(const ImageGrid& img, int target) {
    img.validate();
    if (img.height <= target && img.width <= target) return center_pad(img, target);
    return sqr_resize(img, target);
}

/// Tile: wrap-replicate to base x base (default 256), then resize to target.
inline ImageGrid tile_resize(const ImageGrid& img, int target, int base = 256) {
    return bilinear_resize(tile_wrap(img, base), target, target);
}

enum class Strategy { SqR, Pad, Tile };

inline Strategy parse_strategy(const std::string& s) {
    if (s == "sqr") return Strategy::SqR;
    if (s == "pad") return Strategy::Pad;
    if (s == "tile") return Strategy::Tile;
    throw FormatError("unknown resize strategy '" + s + "' (want sqr|pad|tile)");
}

inline ImageGrid apply_strategy(const ImageGrid& img, Strategy strategy, int target,
                                int base = 256) {
    switch (strategy) {
        case Strategy::SqR: return sqr_resize(img, target);
        case Strategy::Pad: return pad_resize(img, target);
        case Strategy::Tile: return tile_resize(img, target, base);
    }
    throw Error("unreachable");
}

} // namespace ensemblier::preprocess
