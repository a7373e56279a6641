#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <stdexcept>
#include <vector>

namespace di3po {

/// Dense 2D grid of doubles, row-major. Used for clean latents, noisy
/// latents, noise draws and model outputs.
struct Grid {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    Grid() = default;
    Grid(int w, int h, double fill = 0.0) : width(w), height(h), values(static_cast<size_t>(w) * h, fill) {
        if (w <= 0 || h <= 0) throw std::invalid_argument("Grid dimensions must be positive");
    }

    double& at(int x, int y) { return values[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return values.size(); }
    bool same_shape(const Grid& o) const { return width == o.width && height == o.height; }
};

inline void require_same_shape(const Grid& a, const Grid& b, const char* what) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string("shape mismatch in ") + what);
}

struct Pixel {
    int x = 0;
    int y = 0;
};

/// Partition of a grid into a target region R and its background complement.
/// halo queries use Chebyshev distance to the nearest target pixel.
class RegionMask {
public:
    RegionMask() = default;
    RegionMask(int w, int h, std::vector<uint8_t> target_flags)
        : width_(w), height_(h), target_(std::move(target_flags)) {
        if (target_.size() != static_cast<size_t>(w) * h)
            throw std::invalid_argument("RegionMask flag count does not match grid size");
        compute_distances();
    }

    static RegionMask from_box(int w, int h, int x0, int y0, int bw, int bh) {
        std::vector<uint8_t> f(static_cast<size_t>(w) * h, 0);
        for (int y = y0; y < y0 + bh; ++y)
            for (int x = x0; x < x0 + bw; ++x) f[static_cast<size_t>(y) * w + x] = 1;
        return RegionMask(w, h, std::move(f));
    }

    int width() const { return width_; }
    int height() const { return height_; }
    bool is_target(int x, int y) const { return target_[static_cast<size_t>(y) * width_ + x] != 0; }
    bool is_background(int x, int y) const { return !is_target(x, y); }

    /// Chebyshev distance from (x, y) to the nearest target pixel.
    /// Target pixels have distance 0; if there is no target, INT_MAX-ish.
    int distance_to_target(int x, int y) const { return dist_[static_cast<size_t>(y) * width_ + x]; }

    size_t target_count() const { return target_count_; }

private:
    void compute_distances();

    int width_ = 0;
    int height_ = 0;
    std::vector<uint8_t> target_;
    std::vector<int> dist_;
    size_t target_count_ = 0;
};

inline void RegionMask::compute_distances() {
    const int INF = 1 << 28;
    dist_.assign(target_.size(), INF);
    target_count_ = 0;
    for (size_t i = 0; i < target_.size(); ++i)
        if (target_[i]) {
            dist_[i] = 0;
            ++target_count_;
        }
    if (target_count_ == 0) return;
    // Two-pass chamfer sweep; exact for Chebyshev distance.
    auto idx = [&](int x, int y) { return static_cast<size_t>(y) * width_ + x; };
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) {
            int d = dist_[idx(x, y)];
            if (x > 0) d = std::min(d, dist_[idx(x - 1, y)] + 1);
            if (y > 0) {
                d = std::min(d, dist_[idx(x, y - 1)] + 1);
                if (x > 0) d = std::min(d, dist_[idx(x - 1, y - 1)] + 1);
                if (x + 1 < width_) d = std::min(d, dist_[idx(x + 1, y - 1)] + 1);
            }
            dist_[idx(x, y)] = d;
        }
    for (int y = height_ - 1; y >= 0; --y)
        for (int x = width_ - 1; x >= 0; --x) {
            int d = dist_[idx(x, y)];
            if (x + 1 < width_) d = std::min(d, dist_[idx(x + 1, y)] + 1);
            if (y + 1 < height_) {
                d = std::min(d, dist_[idx(x, y + 1)] + 1);
                if (x + 1 < width_) d = std::min(d, dist_[idx(x + 1, y + 1)] + 1);
                if (x > 0) d = std::min(d, dist_[idx(x - 1, y + 1)] + 1);
            }
            dist_[idx(x, y)] = d;
        }
}

}  // namespace di3po
