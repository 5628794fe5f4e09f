#pragma once

// Deterministic preprocessing: boundary-aligned 512x512 tiling with
// mask-aligned crops, bilinear resize, and the classic low-level forensic
// feature extractors (Sobel magnitude, blockwise DCT, Bayar constraint).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fbench/error.hpp"
#include "fbench/image.hpp"

namespace fbench {

inline constexpr int kDefaultTile = 512;

struct TilePlan {
    int tile = kDefaultTile;
    std::vector<std::pair<int, int>> offsets;  // (x, y), row-major, x fastest
    bool padded = false;
};

namespace detail {

// Offsets along one axis: full strides, then one boundary-aligned offset
// (length - tile) when length is not a multiple. Undersized axes get a
// single offset 0 and flag padding.
inline std::vector<int> axis_offsets(int length, int tile, bool& padded) {
    std::vector<int> offs;
    if (length < tile) {
        offs.push_back(0);
        padded = true;
        return offs;
    }
    for (int o = 0; o + tile <= length; o += tile) offs.push_back(o);
    if (length % tile != 0) offs.push_back(length - tile);
    return offs;
}

}  // namespace detail

inline TilePlan tile_plan(int width, int height, int tile = kDefaultTile) {
    if (width < 1 || height < 1 || tile < 1)
        throw BenchError("BadImageShape", "tile_plan needs positive dimensions");
    TilePlan plan;
    plan.tile = tile;
    auto xs = detail::axis_offsets(width, tile, plan.padded);
    auto ys = detail::axis_offsets(height, tile, plan.padded);
    for (int y : ys)
        for (int x : xs) plan.offsets.emplace_back(x, y);
    return plan;
}

struct Tile {
    Image image;
    std::optional<Image> mask;
    int label = 0;
    int x = 0;
    int y = 0;
    // Content extent before zero padding; set only when the tile was padded.
    std::optional<int> orig_w;
    std::optional<int> orig_h;
};

// File stem for a tile of a given source image, used by the slicing tool.
inline std::string tile_id(const std::string& orig_id, int x, int y) {
    return orig_id + "_x" + std::to_string(x) + "_y" + std::to_string(y);
}

namespace detail {

inline Image crop_padded(const Image& src, int x0, int y0, int tile) {
    Image out = make_image(tile, tile, src.channels, 0);
    const int cw = std::min(tile, src.width - x0);
    const int ch = std::min(tile, src.height - y0);
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x)
            for (int c = 0; c < src.channels; ++c)
                out.at(x, y, c) = src.at(x0 + x, y0 + y, c);
    return out;
}

}  // namespace detail

// Cuts the image (and mask, when present) into plan.tile squares. A tile is
// fake iff its mask crop contains a manipulated pixel; without a mask every
// tile inherits image_label.
inline std::vector<Tile> slice_image_and_mask(const Image& image,
                                              const Image* mask,
                                              const TilePlan& plan,
                                              int image_label = 0) {
    if (mask && (mask->width != image.width || mask->height != image.height))
        throw BenchError("DimensionMismatch",
                         "mask " + std::to_string(mask->width) + "x" +
                             std::to_string(mask->height) + " vs image " +
                             std::to_string(image.width) + "x" +
                             std::to_string(image.height));
    std::vector<Tile> tiles;
    tiles.reserve(plan.offsets.size());
    for (auto [x0, y0] : plan.offsets) {
        Tile t;
        t.x = x0;
        t.y = y0;
        t.image = detail::crop_padded(image, x0, y0, plan.tile);
        const int cw = std::min(plan.tile, image.width - x0);
        const int ch = std::min(plan.tile, image.height - y0);
        if (cw < plan.tile) t.orig_w = cw;
        if (ch < plan.tile) t.orig_h = ch;
        if (mask) {
            t.mask = detail::crop_padded(*mask, x0, y0, plan.tile);
            t.label = 0;
            for (auto v : t.mask->pixels)
                if (v > 127) { t.label = 1; break; }
        } else {
            t.label = image_label;
        }
        tiles.push_back(std::move(t));
    }
    return tiles;
}

// Bilinear resample with half-pixel-center mapping; every channel rounds
// half up back to 8 bits.
inline Image resize_bilinear(const Image& src, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1)
        throw BenchError("BadImageShape", "resize target must be positive");
    Image out = make_image(out_w, out_h, src.channels);
    const double sx = static_cast<double>(src.width) / out_w;
    const double sy = static_cast<double>(src.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < src.channels; ++c) {
                const double top = src.at(x0, y0, c) * (1 - wx) + src.at(x1, y0, c) * wx;
                const double bot = src.at(x0, y1, c) * (1 - wx) + src.at(x1, y1, c) * wx;
                const double v = top * (1 - wy) + bot * wy;
                out.at(x, y, c) = static_cast<std::uint8_t>(std::floor(v + 0.5));
            }
        }
    }
    return out;
}

// Gradient magnitude with the standard 3x3 Sobel kernels and replicate
// borders. Returned as a raw (unquantized) float raster.
inline ScoreMap sobel_magnitude(const Image& img) {
    if (img.channels != 1)
        throw BenchError("BadImageShape", "sobel expects one channel");
    ScoreMap out = make_score_map(img.width, img.height, 0);
    const auto px = [&](int x, int y) {
        x = std::clamp(x, 0, img.width - 1);
        y = std::clamp(y, 0, img.height - 1);
        return static_cast<double>(img.at(x, y));
    };
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double gx = -px(x - 1, y - 1) + px(x + 1, y - 1) -
                              2 * px(x - 1, y) + 2 * px(x + 1, y) -
                              px(x - 1, y + 1) + px(x + 1, y + 1);
            const double gy = -px(x - 1, y - 1) - 2 * px(x, y - 1) -
                              px(x + 1, y - 1) + px(x - 1, y + 1) +
                              2 * px(x, y + 1) + px(x + 1, y + 1);
            out.at(x, y) = std::sqrt(gx * gx + gy * gy);
        }
    }
    return out;
}

namespace detail {

// basis[u][x] = alpha(u) * cos((2x+1) u pi / 16)
inline const std::array<std::array<double, 8>, 8>& dct_basis() {
    static const auto table = [] {
        std::array<std::array<double, 8>, 8> t{};
        const double pi = std::acos(-1.0);
        for (int u = 0; u < 8; ++u) {
            const double a = u == 0 ? std::sqrt(1.0 / 8) : std::sqrt(2.0 / 8);
            for (int x = 0; x < 8; ++x)
                t[static_cast<std::size_t>(u)][static_cast<std::size_t>(x)] =
                    a * std::cos((2 * x + 1) * u * pi / 16.0);
        }
        return t;
    }();
    return table;
}

}  // namespace detail

// Orthonormal 8x8 DCT-II per block. Output raster has the source shape;
// block (bx,by) holds coefficient (u,v) at pixel (8bx+v, 8by+u).
inline ScoreMap block_dct(const Image& img) {
    if (img.channels != 1)
        throw BenchError("BadImageShape", "block_dct expects one channel");
    if (img.width % 8 != 0 || img.height % 8 != 0)
        throw BenchError("NotBlockAligned",
                         "dimensions must be multiples of 8, got " +
                             std::to_string(img.width) + "x" +
                             std::to_string(img.height));
    const auto& basis = detail::dct_basis();
    ScoreMap out = make_score_map(img.width, img.height, 0);
    for (int by = 0; by < img.height; by += 8) {
        for (int bx = 0; bx < img.width; bx += 8) {
            // rows transformed first, then columns: X = C P C^T
            double tmp[8][8];
            for (int y = 0; y < 8; ++y)
                for (int v = 0; v < 8; ++v) {
                    double s = 0;
                    for (int x = 0; x < 8; ++x)
                        s += img.at(bx + x, by + y) *
                             basis[static_cast<std::size_t>(v)][static_cast<std::size_t>(x)];
                    tmp[y][v] = s;
                }
            for (int u = 0; u < 8; ++u)
                for (int v = 0; v < 8; ++v) {
                    double s = 0;
                    for (int y = 0; y < 8; ++y)
                        s += basis[static_cast<std::size_t>(u)][static_cast<std::size_t>(y)] *
                             tmp[y][v];
                    out.at(bx + v, by + u) = s;
                }
        }
    }
    return out;
}

// Constrained-convolution projection: center pixel -1, surrounding weights
// rescaled to sum exactly to 1. Re-projecting a constrained kernel returns
// it unchanged, so the operation is exactly idempotent.
inline std::vector<double> bayar_project(const std::vector<double>& kernel, int n) {
    if (n < 3 || n % 2 == 0)
        throw BenchError("BadKernelShape", "kernel side must be odd and >= 3");
    if (kernel.size() != static_cast<std::size_t>(n) * n)
        throw BenchError("BadKernelShape", "kernel size does not match side");
    const std::size_t center = static_cast<std::size_t>(n) * n / 2;
    const std::size_t last = kernel.size() - 1;  // center is interior for n >= 3

    // A constrained kernel is one this function could have produced: center
    // -1 and final entry equal to 1 minus the left-to-right sum of the rest.
    // Checking that relation (rather than "sum == 1") keeps re-projection an
    // exact no-op for every input.
    double partial = 0;
    for (std::size_t i = 0; i < last; ++i)
        if (i != center) partial += kernel[i];
    if (kernel[center] == -1.0 && kernel[last] == 1.0 - partial) return kernel;

    const double sum = partial + kernel[last];
    if (sum == 0.0)
        throw BenchError("DegenerateKernel", "non-center entries sum to zero");

    std::vector<double> out(kernel.size());
    out[center] = -1.0;
    double scaled = 0;
    for (std::size_t i = 0; i < last; ++i) {
        if (i == center) continue;
        out[i] = kernel[i] / sum;
        scaled += out[i];
    }
    out[last] = 1.0 - scaled;
    return out;
}

}  // namespace fbench
