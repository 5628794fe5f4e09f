#pragma once

// Raster containers plus netpbm (PGM/PPM) reading and writing. Binary
// netpbm is the only on-disk raster format here: it is trivially exact,
// which keeps evaluation runs reproducible byte for byte.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "fbench/error.hpp"

namespace fbench {

// Interleaved 8-bit raster, 1 channel (gray) or 3 (RGB).
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;

    std::uint8_t& at(int x, int y, int c = 0) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c = 0) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::size_t size() const { return pixels.size(); }
    bool operator==(const Image&) const = default;
};

inline Image make_image(int width, int height, int channels = 1,
                        std::uint8_t fill = 0) {
    if (width <= 0 || height <= 0 || (channels != 1 && channels != 3))
        throw BenchError("BadImageShape",
                         "invalid image shape " + std::to_string(width) + "x" +
                             std::to_string(height) + "x" + std::to_string(channels));
    Image img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.pixels.assign(static_cast<std::size_t>(width) * height * channels, fill);
    return img;
}

// Dense per-pixel scores in [0,1]. `levels` records the quantization grid the
// values came from (256 for 8-bit masks, 65536 for 16-bit ones, 0 when the
// values are not known to be quantized). Quantized maps admit exact
// histogram-based ranking metrics.
struct ScoreMap {
    int width = 0;
    int height = 0;
    int levels = 0;
    std::vector<double> values;

    double& at(int x, int y) {
        return values[static_cast<std::size_t>(y) * width + x];
    }
    double at(int x, int y) const {
        return values[static_cast<std::size_t>(y) * width + x];
    }
    std::size_t size() const { return values.size(); }
};

inline ScoreMap make_score_map(int width, int height, int levels = 0,
                               double fill = 0.0) {
    if (width <= 0 || height <= 0)
        throw BenchError("BadImageShape", "invalid score map shape");
    ScoreMap m;
    m.width = width;
    m.height = height;
    m.levels = levels;
    m.values.assign(static_cast<std::size_t>(width) * height, fill);
    return m;
}

namespace detail {

// Skips netpbm whitespace/comments and reads one ASCII unsigned integer.
inline unsigned read_pnm_uint(std::istream& in, const std::string& where) {
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF || c < '0' || c > '9')
        throw BenchError("PnmParse", where + ": expected integer in header");
    unsigned long v = 0;
    while (c >= '0' && c <= '9') {
        v = v * 10 + static_cast<unsigned>(c - '0');
        if (v > 1'000'000'000ul)
            throw BenchError("PnmParse", where + ": header integer too large");
        c = in.get();
    }
    if (c != EOF) in.unget();
    return static_cast<unsigned>(v);
}

}  // namespace detail

// Loads binary PGM (P5) with maxval 255. Use load_pgm16 for 16-bit masks.
inline Image load_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BenchError("IoFailure", "cannot read " + path.string());
    std::string magic(2, '\0');
    in.read(magic.data(), 2);
    if (magic != "P5")
        throw BenchError("PnmParse", path.string() + ": not a binary PGM");
    const std::string where = path.string();
    unsigned w = detail::read_pnm_uint(in, where);
    unsigned h = detail::read_pnm_uint(in, where);
    unsigned maxval = detail::read_pnm_uint(in, where);
    if (maxval != 255)
        throw BenchError("PnmParse", where + ": expected maxval 255, got " +
                                         std::to_string(maxval));
    in.get();  // single whitespace byte after maxval
    Image img = make_image(static_cast<int>(w), static_cast<int>(h), 1);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.pixels.size())
        throw BenchError("PnmParse", where + ": truncated pixel data");
    return img;
}

inline void save_pgm(const Image& img, const std::filesystem::path& path) {
    if (img.channels != 1)
        throw BenchError("BadImageShape", "PGM requires a single channel");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw BenchError("IoFailure", "cannot write " + path.string());
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
}

// Loads binary PPM (P6), maxval 255, into a 3-channel Image.
inline Image load_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BenchError("IoFailure", "cannot read " + path.string());
    std::string magic(2, '\0');
    in.read(magic.data(), 2);
    if (magic != "P6")
        throw BenchError("PnmParse", path.string() + ": not a binary PPM");
    const std::string where = path.string();
    unsigned w = detail::read_pnm_uint(in, where);
    unsigned h = detail::read_pnm_uint(in, where);
    unsigned maxval = detail::read_pnm_uint(in, where);
    if (maxval != 255)
        throw BenchError("PnmParse", where + ": expected maxval 255, got " +
                                         std::to_string(maxval));
    in.get();
    Image img = make_image(static_cast<int>(w), static_cast<int>(h), 3);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.pixels.size())
        throw BenchError("PnmParse", where + ": truncated pixel data");
    return img;
}

inline void save_ppm(const Image& img, const std::filesystem::path& path) {
    if (img.channels != 3)
        throw BenchError("BadImageShape", "PPM requires three channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw BenchError("IoFailure", "cannot write " + path.string());
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
}

// Loads P5 with maxval 255 or 65535 (big-endian) as a 16-bit buffer.
// 8-bit input is widened without scaling; maxval records which grid it was.
struct Image16 {
    int width = 0;
    int height = 0;
    unsigned maxval = 65535;
    std::vector<std::uint16_t> pixels;
};

inline Image16 load_pgm16(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BenchError("IoFailure", "cannot read " + path.string());
    std::string magic(2, '\0');
    in.read(magic.data(), 2);
    if (magic != "P5")
        throw BenchError("PnmParse", path.string() + ": not a binary PGM");
    const std::string where = path.string();
    unsigned w = detail::read_pnm_uint(in, where);
    unsigned h = detail::read_pnm_uint(in, where);
    unsigned maxval = detail::read_pnm_uint(in, where);
    if (maxval != 255 && maxval != 65535)
        throw BenchError("PnmParse", where + ": unsupported maxval " +
                                         std::to_string(maxval));
    in.get();
    Image16 img;
    img.width = static_cast<int>(w);
    img.height = static_cast<int>(h);
    img.maxval = maxval;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    img.pixels.resize(n);
    if (maxval == 255) {
        std::vector<std::uint8_t> raw(n);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n)
            throw BenchError("PnmParse", where + ": truncated pixel data");
        for (std::size_t i = 0; i < n; ++i) img.pixels[i] = raw[i];
    } else {
        std::vector<std::uint8_t> raw(n * 2);
        in.read(reinterpret_cast<char*>(raw.data()),
                static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != raw.size())
            throw BenchError("PnmParse", where + ": truncated pixel data");
        for (std::size_t i = 0; i < n; ++i)
            img.pixels[i] =
                static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
    return img;
}

inline void save_pgm16(const Image16& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw BenchError("IoFailure", "cannot write " + path.string());
    out << "P5\n" << img.width << " " << img.height << "\n65535\n";
    std::vector<std::uint8_t> raw(img.pixels.size() * 2);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        raw[2 * i] = static_cast<std::uint8_t>(img.pixels[i] >> 8);
        raw[2 * i + 1] = static_cast<std::uint8_t>(img.pixels[i] & 0xff);
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
}

// Prediction maps on disk are PGM; value/maxval is the pixel score. The
// returned map remembers its quantization grid.
inline ScoreMap load_score_map(const std::filesystem::path& path) {
    Image16 raw = load_pgm16(path);
    ScoreMap m = make_score_map(raw.width, raw.height,
                                raw.maxval == 255 ? 256 : 65536);
    const double denom = static_cast<double>(raw.maxval);
    for (std::size_t i = 0; i < raw.pixels.size(); ++i)
        m.values[i] = raw.pixels[i] / denom;
    return m;
}

// Per-pixel 0/1 ground truth.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values;

    std::uint8_t at(int x, int y) const {
        return values[static_cast<std::size_t>(y) * width + x];
    }
    std::size_t size() const { return values.size(); }
    bool operator==(const BinaryMask&) const = default;
};

// Ground-truth masks binarize at >127: annotations use 0/255 in the wild but
// compression can smear edge values.
inline BinaryMask binarize_mask(const Image& mask) {
    if (mask.channels != 1)
        throw BenchError("BadImageShape", "mask must be single-channel");
    BinaryMask out;
    out.width = mask.width;
    out.height = mask.height;
    out.values.resize(mask.pixels.size());
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = mask.pixels[i] > 127 ? 1 : 0;
    return out;
}

}  // namespace fbench
