#pragma once

#include <string>

#include "di3po/raster.hpp"

namespace di3po {

enum class SplitMethod { Edge, Fallback };

struct SplitResult {
    Raster left;
    Raster right;
    int split_x = 0;
    SplitMethod method = SplitMethod::Fallback;
    double confidence = 0.0;
};

struct SplitConfig {
    double band_fraction = 0.2;      // central search band as fraction of width
    double confidence_threshold = 0.6;  // min fraction of rows with an edge in the column
    double canny_low = 50.0;
    double canny_high = 150.0;
    double canny_sigma = 1.0;
};

/// Locates the panel border as the column inside the central band whose
/// Canny edge map covers the largest fraction of rows. Falls back to a
/// middle split when no column clears the confidence threshold.
SplitResult split_diptych(const Raster& image, const SplitConfig& cfg = {});

inline const char* split_method_name(SplitMethod m) { return m == SplitMethod::Edge ? "edge" : "fallback"; }

}  // namespace di3po
