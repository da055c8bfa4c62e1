#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <vector>

namespace etchr {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Sum of absolute per-channel differences; the metric used by the overlay
// decoder's nearest-color classification.
inline int color_distance(const Rgb& a, const Rgb& b) {
    return std::abs(int(a.r) - int(b.r)) + std::abs(int(a.g) - int(b.g)) +
           std::abs(int(a.b) - int(b.b));
}

// 8-bit RGB raster, row-major, no alpha.
class Image {
  public:
    Image() = default;
    Image(int width, int height, Rgb fill = {255, 255, 255})
        : width_(checked_dim(width)), height_(checked_dim(height)),
          px_(std::size_t(width) * height * 3) {
        this->fill(fill);
    }

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return px_.empty(); }

    const std::vector<std::uint8_t>& bytes() const { return px_; }
    std::vector<std::uint8_t>& bytes() { return px_; }

    Rgb at(int x, int y) const {
        const std::uint8_t* p = px_.data() + idx(x, y);
        return {p[0], p[1], p[2]};
    }

    void set(int x, int y, Rgb c) {
        std::uint8_t* p = px_.data() + idx(x, y);
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }

    void fill(Rgb c) {
        for (std::size_t i = 0; i + 2 < px_.size(); i += 3) {
            px_[i] = c.r;
            px_[i + 1] = c.g;
            px_[i + 2] = c.b;
        }
    }

    // Fills [x0,x1) x [y0,y1), clipped to bounds.
    void fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
        x0 = std::max(x0, 0);
        y0 = std::max(y0, 0);
        x1 = std::min(x1, width_);
        y1 = std::min(y1, height_);
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x)
                set(x, y, c);
    }

    Rgb average(int x0, int y0, int x1, int y1) const {
        x0 = std::max(x0, 0);
        y0 = std::max(y0, 0);
        x1 = std::min(x1, width_);
        y1 = std::min(y1, height_);
        if (x0 >= x1 || y0 >= y1)
            return {0, 0, 0};
        long long r = 0, g = 0, b = 0, n = 0;
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
                Rgb c = at(x, y);
                r += c.r;
                g += c.g;
                b += c.b;
                ++n;
            }
        return {std::uint8_t(r / n), std::uint8_t(g / n), std::uint8_t(b / n)};
    }

    Image crop(int x0, int y0, int w, int h) const {
        if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > width_ || y0 + h > height_)
            throw std::invalid_argument("Image::crop: region out of bounds");
        Image out(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out.set(x, y, at(x0 + x, y0 + y));
        return out;
    }

    friend bool operator==(const Image& a, const Image& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.px_ == b.px_;
    }

  private:
    static int checked_dim(int v) {
        if (v <= 0)
            throw std::invalid_argument("Image: dimensions must be positive");
        return v;
    }

    std::size_t idx(int x, int y) const {
        if (x < 0 || y < 0 || x >= width_ || y >= height_)
            throw std::out_of_range("Image: pixel out of range");
        return (std::size_t(y) * width_ + x) * 3;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> px_;
};

// Bilinear resample. Identity when dimensions already match.
inline Image resize_bilinear(const Image& src, int w, int h) {
    if (w <= 0 || h <= 0)
        throw std::invalid_argument("resize_bilinear: bad target size");
    if (src.width() == w && src.height() == h)
        return src;
    Image out(w, h);
    const double sx = double(src.width()) / w;
    const double sy = double(src.height()) / h;
    for (int y = 0; y < h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = std::clamp(int(std::floor(fy)), 0, src.height() - 1);
        int y1 = std::min(y0 + 1, src.height() - 1);
        double wy = std::clamp(fy - y0, 0.0, 1.0);
        for (int x = 0; x < w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = std::clamp(int(std::floor(fx)), 0, src.width() - 1);
            int x1 = std::min(x0 + 1, src.width() - 1);
            double wx = std::clamp(fx - x0, 0.0, 1.0);
            auto lerp = [&](auto get) {
                double top = get(src.at(x0, y0)) * (1 - wx) + get(src.at(x1, y0)) * wx;
                double bot = get(src.at(x0, y1)) * (1 - wx) + get(src.at(x1, y1)) * wx;
                return std::uint8_t(std::lround(top * (1 - wy) + bot * wy));
            };
            out.set(x, y, {lerp([](Rgb c) { return double(c.r); }),
                           lerp([](Rgb c) { return double(c.g); }),
                           lerp([](Rgb c) { return double(c.b); })});
        }
    }
    return out;
}

// Mean absolute per-channel difference over a whole image, 0..255 scale.
inline double mean_abs_diff(const Image& a, const Image& b) {
    if (a.width() != b.width() || a.height() != b.height())
        throw std::invalid_argument("mean_abs_diff: dimension mismatch");
    const auto& pa = a.bytes();
    const auto& pb = b.bytes();
    long long sum = 0;
    for (std::size_t i = 0; i < pa.size(); ++i)
        sum += std::abs(int(pa[i]) - int(pb[i]));
    return pa.empty() ? 0.0 : double(sum) / double(pa.size());
}

// FNV-1a over dimensions + pixel bytes. Used by the mock backends to key
// instances by their rendered input image.
inline std::uint64_t image_hash(const Image& img) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::uint8_t b) {
        h ^= b;
        h *= 1099511628211ull;
    };
    for (int shift = 0; shift < 32; shift += 8) {
        mix(std::uint8_t(std::uint32_t(img.width()) >> shift));
        mix(std::uint8_t(std::uint32_t(img.height()) >> shift));
    }
    for (std::uint8_t b : img.bytes())
        mix(b);
    return h;
}

} // namespace etchr
