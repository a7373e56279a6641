#pragma once

#include <vector>

#include "di3po/raster.hpp"

namespace di3po {

/// Classical Canny: Gaussian blur, Sobel gradients, non-maximum suppression
/// along the quantized gradient direction, then two-threshold hysteresis.
/// Input is an 8-bit grayscale raster; output is a binary (0/1) map of the
/// same shape. Thresholds apply to the Sobel gradient magnitude.
Raster canny_edges(const Raster& gray, double low_thresh, double high_thresh, double blur_sigma);

struct CannyDefaults {
    static constexpr double low = 50.0;
    static constexpr double high = 150.0;
    static constexpr double sigma = 1.0;
};

}  // namespace di3po
