#include "di3po/canny.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace di3po {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;
    return k;
}

/// Separable blur with edge-clamped borders.
std::vector<double> blur(const Raster& gray, double sigma) {
    const int W = gray.width, H = gray.height;
    std::vector<double> img(gray.pixels.begin(), gray.pixels.end());
    if (sigma <= 0.0) return img;
    auto k = gaussian_kernel(sigma);
    int radius = static_cast<int>(k.size() / 2);
    std::vector<double> tmp(img.size());
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                int xx = std::clamp(x + i, 0, W - 1);
                s += k[i + radius] * img[static_cast<size_t>(y) * W + xx];
            }
            tmp[static_cast<size_t>(y) * W + x] = s;
        }
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                int yy = std::clamp(y + i, 0, H - 1);
                s += k[i + radius] * tmp[static_cast<size_t>(yy) * W + x];
            }
            img[static_cast<size_t>(y) * W + x] = s;
        }
    return img;
}

}  // namespace

Raster canny_edges(const Raster& input, double low_thresh, double high_thresh, double blur_sigma) {
    if (!(low_thresh >= 0.0 && low_thresh <= high_thresh)) throw std::invalid_argument("require 0 <= low <= high");
    Raster gray = to_grayscale(input);
    const int W = gray.width, H = gray.height;
    std::vector<double> img = blur(gray, blur_sigma);

    auto px = [&](int x, int y) {
        x = std::clamp(x, 0, W - 1);
        y = std::clamp(y, 0, H - 1);
        return img[static_cast<size_t>(y) * W + x];
    };

    std::vector<double> mag(static_cast<size_t>(W) * H, 0.0);
    std::vector<uint8_t> dir(static_cast<size_t>(W) * H, 0);  // 0: 0deg, 1: 45, 2: 90, 3: 135
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double gx = -px(x - 1, y - 1) - 2 * px(x - 1, y) - px(x - 1, y + 1) + px(x + 1, y - 1) +
                        2 * px(x + 1, y) + px(x + 1, y + 1);
            double gy = -px(x - 1, y - 1) - 2 * px(x, y - 1) - px(x + 1, y - 1) + px(x - 1, y + 1) +
                        2 * px(x, y + 1) + px(x + 1, y + 1);
            size_t i = static_cast<size_t>(y) * W + x;
            mag[i] = std::hypot(gx, gy);
            double angle = std::atan2(gy, gx) * 180.0 / M_PI;
            if (angle < 0) angle += 180.0;
            if (angle < 22.5 || angle >= 157.5)
                dir[i] = 0;
            else if (angle < 67.5)
                dir[i] = 1;
            else if (angle < 112.5)
                dir[i] = 2;
            else
                dir[i] = 3;
        }

    // Non-maximum suppression along the gradient direction.
    auto m = [&](int x, int y) -> double {
        if (x < 0 || x >= W || y < 0 || y >= H) return 0.0;
        return mag[static_cast<size_t>(y) * W + x];
    };
    std::vector<uint8_t> cls(static_cast<size_t>(W) * H, 0);  // 0 none, 1 weak, 2 strong
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            size_t i = static_cast<size_t>(y) * W + x;
            if (mag[i] < low_thresh) continue;
            double n1, n2;
            switch (dir[i]) {
                case 0: n1 = m(x - 1, y); n2 = m(x + 1, y); break;
                case 1: n1 = m(x + 1, y - 1); n2 = m(x - 1, y + 1); break;
                case 2: n1 = m(x, y - 1); n2 = m(x, y + 1); break;
                default: n1 = m(x - 1, y - 1); n2 = m(x + 1, y + 1); break;
            }
            if (mag[i] >= n1 && mag[i] >= n2) cls[i] = mag[i] >= high_thresh ? 2 : 1;
        }

    // Hysteresis: keep weak pixels only if 8-connected to a strong chain.
    Raster edges(W, H, 1, 0);
    std::vector<size_t> stack;
    for (size_t i = 0; i < cls.size(); ++i)
        if (cls[i] == 2) {
            edges.pixels[i] = 1;
            stack.push_back(i);
        }
    while (!stack.empty()) {
        size_t i = stack.back();
        stack.pop_back();
        int x = static_cast<int>(i % W), y = static_cast<int>(i / W);
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                int nx = x + dx, ny = y + dy;
                if (nx < 0 || nx >= W || ny < 0 || ny >= H) continue;
                size_t ni = static_cast<size_t>(ny) * W + nx;
                if (cls[ni] == 1 && edges.pixels[ni] == 0) {
                    edges.pixels[ni] = 1;
                    stack.push_back(ni);
                }
            }
    }
    return edges;
}

}  // namespace di3po
