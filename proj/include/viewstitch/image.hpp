#pragma once

// Interleaved 8-bit RGB and single-channel float buffers plus the few image
// primitives the pipeline needs (luma conversion, separable Gaussian blur,
// half-size downsampling, bilinear sampling).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "viewstitch/common.hpp"

namespace viewstitch {

struct ImageRGB {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> data;  // 3 bytes per pixel, row-major

    ImageRGB() = default;
    ImageRGB(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, 0) {}

    bool empty() const { return width == 0 || height == 0; }
    size_t pixel_count() const { return static_cast<size_t>(width) * height; }

    uint8_t* px(int x, int y) { return data.data() + (static_cast<size_t>(y) * width + x) * 3; }
    const uint8_t* px(int x, int y) const {
        return data.data() + (static_cast<size_t>(y) * width + x) * 3;
    }

    void fill(uint8_t r, uint8_t g, uint8_t b) {
        for (size_t i = 0; i < data.size(); i += 3) {
            data[i] = r;
            data[i + 1] = g;
            data[i + 2] = b;
        }
    }

    bool operator==(const ImageRGB& o) const {
        return width == o.width && height == o.height && data == o.data;
    }
};

struct ImageF {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    ImageF() = default;
    ImageF(int w, int h, float v = 0.0f)
        : width(w), height(h), data(static_cast<size_t>(w) * h, v) {}

    bool empty() const { return width == 0 || height == 0; }

    float& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    float at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }

    // Replicating-border access.
    float at_clamped(int x, int y) const {
        x = std::clamp(x, 0, width - 1);
        y = std::clamp(y, 0, height - 1);
        return at(x, y);
    }
};

// Binary mask stored one byte per pixel.
struct MaskU8 {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> data;

    MaskU8() = default;
    MaskU8(int w, int h, uint8_t v = 0)
        : width(w), height(h), data(static_cast<size_t>(w) * h, v) {}

    uint8_t& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
    size_t count_nonzero() const {
        size_t n = 0;
        for (uint8_t v : data) n += (v != 0);
        return n;
    }
};

// ITU-R 601 luma in [0, 255].
inline double luma601(uint8_t r, uint8_t g, uint8_t b) {
    return 0.299 * r + 0.587 * g + 0.114 * b;
}

inline ImageF to_luma(const ImageRGB& img) {
    ImageF out(img.width, img.height);
    const uint8_t* p = img.data.data();
    for (size_t i = 0; i < img.pixel_count(); ++i, p += 3)
        out.data[i] = static_cast<float>(luma601(p[0], p[1], p[2]));
    return out;
}

// Luma scaled to [0, 1]; the feature detector works in this range.
inline ImageF to_luma_unit(const ImageRGB& img) {
    ImageF out = to_luma(img);
    for (float& v : out.data) v /= 255.0f;
    return out;
}

inline std::vector<float> gaussian_kernel_1d(double sigma) {
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[i + radius] = static_cast<float>(v);
        sum += v;
    }
    for (float& v : k) v = static_cast<float>(v / sum);
    return k;
}

// Separable Gaussian blur with replicated borders.
inline ImageF gaussian_blur(const ImageF& src, double sigma) {
    if (sigma <= 0.0) return src;
    std::vector<float> k = gaussian_kernel_1d(sigma);
    int radius = static_cast<int>(k.size() / 2);
    ImageF tmp(src.width, src.height);
    ImageF out(src.width, src.height);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[i + radius] * src.at_clamped(x + i, y);
            tmp.at(x, y) = static_cast<float>(acc);
        }
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[i + radius] * tmp.at_clamped(x, y + i);
            out.at(x, y) = static_cast<float>(acc);
        }
    return out;
}

// Every other pixel; used to build pyramids.
inline ImageF downsample_half(const ImageF& src) {
    ImageF out(std::max(1, src.width / 2), std::max(1, src.height / 2));
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) out.at(x, y) = src.at(x * 2, y * 2);
    return out;
}

inline float bilinear_sample(const ImageF& img, double x, double y) {
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    double fx = x - x0;
    double fy = y - y0;
    float p00 = img.at_clamped(x0, y0);
    float p10 = img.at_clamped(x0 + 1, y0);
    float p01 = img.at_clamped(x0, y0 + 1);
    float p11 = img.at_clamped(x0 + 1, y0 + 1);
    double top = p00 + (p10 - p00) * fx;
    double bot = p01 + (p11 - p01) * fx;
    return static_cast<float>(top + (bot - top) * fy);
}

inline uint8_t clamp_u8(double v) {
    return static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Root-mean-square difference over all channels, in 8-bit units.
inline double rms_diff(const ImageRGB& a, const ImageRGB& b) {
    if (a.width != b.width || a.height != b.height)
        throw Error(errc::domain, "rms_diff: size mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.data.size()));
}

}  // namespace viewstitch
