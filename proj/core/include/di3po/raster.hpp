#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "di3po/grid.hpp"

namespace di3po {

/// 8-bit raster, 1 (gray) or 3 (RGB) channels, row-major interleaved.
struct Raster {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<uint8_t> pixels;

    Raster() = default;
    Raster(int w, int h, int ch, uint8_t fill = 0)
        : width(w), height(h), channels(ch), pixels(static_cast<size_t>(w) * h * ch, fill) {}

    uint8_t& at(int x, int y, int c = 0) {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    uint8_t at(int x, int y, int c = 0) const {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    bool operator==(const Raster&) const = default;
};

/// Luma conversion (integer BT.601 weights for RGB, identity for gray).
Raster to_grayscale(const Raster& img);

/// Column partition: left = [0, split_x), right = [split_x, width).
std::pair<Raster, Raster> split_columns(const Raster& img, int split_x);

/// Grayscale raster [0,255] -> latent grid in [-1, 1].
Grid raster_to_latent(const Raster& gray);

/// Latent grid clamped to [-1, 1] -> grayscale raster.
Raster latent_to_raster(const Grid& latent);

/// Minimal deterministic PNG codec (8-bit gray/RGB, non-interlaced).
void write_png(const std::string& path, const Raster& img);
Raster read_png(const std::string& path);
std::vector<uint8_t> encode_png(const Raster& img);
Raster decode_png(const std::vector<uint8_t>& bytes);

}  // namespace di3po
