#include "di3po/split.hpp"

#include <cmath>
#include <stdexcept>

#include "di3po/canny.hpp"

namespace di3po {

SplitResult split_diptych(const Raster& image, const SplitConfig& cfg) {
    if (image.width < 2) throw std::invalid_argument("image too narrow to split");

    Raster edges = canny_edges(image, cfg.canny_low, cfg.canny_high, cfg.canny_sigma);
    const int W = image.width, H = image.height;

    int band = std::max(1, static_cast<int>(std::lround(cfg.band_fraction * W)));
    int lo = std::max(1, W / 2 - band / 2);
    int hi = std::min(W - 1, lo + band);

    int best_col = -1;
    double best_score = 0.0;
    std::vector<double> score(static_cast<size_t>(W), 0.0);
    for (int x = lo; x < hi; ++x) {
        int rows = 0;
        for (int y = 0; y < H; ++y) rows += edges.at(x, y);
        score[x] = static_cast<double>(rows) / H;
        if (score[x] > best_score) {
            best_score = score[x];
            best_col = x;
        }
    }

    SplitResult r;
    if (best_col >= 1 && best_score > cfg.confidence_threshold) {
        // A physical seam yields confident edge columns on both of its
        // borders; split midway through the cluster around the best column
        // (qualifying columns at most 3 apart are merged).
        int first = best_col, last = best_col;
        while (first - 1 >= lo) {
            int next = -1;
            for (int x = first - 1; x >= std::max(lo, first - 3); --x)
                if (score[x] > cfg.confidence_threshold) next = x;
            if (next < 0) break;
            first = next;
        }
        while (last + 1 < hi) {
            int next = -1;
            for (int x = last + 1; x <= std::min(hi - 1, last + 3); ++x)
                if (score[x] > cfg.confidence_threshold) {
                    next = x;
                    break;
                }
            if (next < 0) break;
            last = next;
        }
        r.method = SplitMethod::Edge;
        r.split_x = (first + last + 1) / 2;
        r.confidence = best_score;
    } else {
        r.method = SplitMethod::Fallback;
        r.split_x = W / 2;
        r.confidence = best_score;
    }
    auto [left, right] = split_columns(image, r.split_x);
    r.left = std::move(left);
    r.right = std::move(right);
    return r;
}

}  // namespace di3po
