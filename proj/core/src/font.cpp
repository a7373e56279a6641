#include "di3po/font.hpp"

#include <algorithm>
#include <climits>
#include <stdexcept>

namespace di3po {
namespace font {

namespace {

struct Glyph {
    char ch;
    std::array<uint8_t, 7> rows;
};

constexpr Glyph kGlyphs[] = {
    {'A', {0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001}},
    {'B', {0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110}},
    {'C', {0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110}},
    {'D', {0b11110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b11110}},
    {'E', {0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111}},
    {'F', {0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000}},
    {'G', {0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111}},
    {'H', {0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001}},
    {'I', {0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
    {'J', {0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100}},
    {'K', {0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001}},
    {'L', {0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111}},
    {'M', {0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001}},
    {'N', {0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001, 0b10001}},
    {'O', {0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110}},
    {'P', {0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000}},
    {'Q', {0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101}},
    {'R', {0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001}},
    {'S', {0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110}},
    {'T', {0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100}},
    {'U', {0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110}},
    {'V', {0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100}},
    {'W', {0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b11011, 0b10001}},
    {'X', {0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001}},
    {'Y', {0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100, 0b00100}},
    {'Z', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111}},
    {'0', {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110}},
    {'1', {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
    {'2', {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111}},
    {'3', {0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110}},
    {'4', {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010}},
    {'5', {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110}},
    {'6', {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110}},
    {'7', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000}},
    {'8', {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110}},
    {'9', {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100}},
    {' ', {0, 0, 0, 0, 0, 0, 0}},
};

}  // namespace

const std::array<uint8_t, 7>* glyph_rows(char c) {
    for (const auto& g : kGlyphs)
        if (g.ch == c) return &g.rows;
    return nullptr;
}

bool supported(char c) { return glyph_rows(c) != nullptr; }

bool supported_text(const std::string& text) {
    for (char c : text)
        if (!supported(c)) return false;
    return true;
}

int box_width(int n_chars) { return n_chars * cell_stride + 1; }
int box_height() { return glyph_height + 2; }

void render_text(Raster& img, const std::string& text, int x0, int y0) {
    if (text.empty()) throw std::invalid_argument("cannot render empty text");
    if (!supported_text(text)) throw std::invalid_argument("text contains unsupported characters: " + text);
    int bw = box_width(static_cast<int>(text.size()));
    int bh = box_height();
    if (x0 < 0 || y0 < 0 || x0 + bw > img.width || y0 + bh > img.height)
        throw std::invalid_argument("text box does not fit in raster");

    auto put = [&](int x, int y, uint8_t v) {
        for (int c = 0; c < img.channels; ++c) img.at(x, y, c) = v;
    };
    for (int y = 0; y < bh; ++y)
        for (int x = 0; x < bw; ++x) put(x0 + x, y0 + y, 255);
    for (size_t i = 0; i < text.size(); ++i) {
        const auto& rows = *glyph_rows(text[i]);
        int gx = x0 + 1 + static_cast<int>(i) * cell_stride;
        int gy = y0 + 1;
        for (int r = 0; r < glyph_height; ++r)
            for (int col = 0; col < glyph_width; ++col)
                if (rows[r] & (1 << (glyph_width - 1 - col))) put(gx + col, gy + r, 0);
    }
}

std::optional<TextBox> find_text_box(const Raster& img) {
    Raster gray = to_grayscale(img);
    int minx = INT_MAX, miny = INT_MAX, maxx = -1, maxy = -1;
    for (int y = 0; y < gray.height; ++y)
        for (int x = 0; x < gray.width; ++x) {
            uint8_t v = gray.at(x, y);
            if (v == 0 || v == 255) {
                minx = std::min(minx, x);
                miny = std::min(miny, y);
                maxx = std::max(maxx, x);
                maxy = std::max(maxy, y);
            }
        }
    if (maxx < 0) return std::nullopt;

    TextBox box;
    box.x = minx;
    box.y = miny;
    box.w = maxx - minx + 1;
    box.h = maxy - miny + 1;
    if (box.h != box_height() || box.w < box_width(1) || (box.w - 1) % cell_stride != 0) {
        // Degenerate marking (e.g. partially clipped box); report the region
        // but decode nothing.
        return box;
    }

    int n = (box.w - 1) / cell_stride;
    for (int i = 0; i < n; ++i) {
        int gx = box.x + 1 + i * cell_stride;
        int gy = box.y + 1;
        int best_dist = INT_MAX;
        char best = '?';
        for (const auto& g : kGlyphs) {
            int dist = 0;
            for (int r = 0; r < glyph_height; ++r)
                for (int col = 0; col < glyph_width; ++col) {
                    bool want = g.rows[r] & (1 << (glyph_width - 1 - col));
                    bool have = gray.at(gx + col, gy + r) == 0;
                    if (want != have) ++dist;
                }
            if (dist < best_dist) {
                best_dist = dist;
                best = g.ch;
            }
        }
        box.text += best;
    }
    return box;
}

}  // namespace font
}  // namespace di3po
