#pragma once

#include <array>
#include <optional>
#include <string>

#include "di3po/raster.hpp"

namespace di3po {

/// Built-in 5x7 bitmap font over A-Z, 0-9 and space. Text is rendered as a
/// boxed label: black glyph pixels on a pure-white cell with a 1-pixel white
/// margin. Mock backgrounds stay inside [10, 245], so the pure 0/255 box is
/// recoverable by template matching.
namespace font {

constexpr int glyph_width = 5;
constexpr int glyph_height = 7;
constexpr int cell_stride = 6;  // glyph + 1px gap

/// Rows (top to bottom) of the glyph, 5 bits each, MSB = leftmost column.
/// Returns nullptr for unsupported characters.
const std::array<uint8_t, 7>* glyph_rows(char c);

bool supported(char c);
bool supported_text(const std::string& text);

/// Box footprint for a text of n characters (includes the white margin).
int box_width(int n_chars);
int box_height();

/// Paints the boxed label with its top-left corner at (x0, y0).
/// Throws if the box does not fit or the text has unsupported characters.
void render_text(Raster& img, const std::string& text, int x0, int y0);

struct TextBox {
    int x = 0, y = 0, w = 0, h = 0;
    std::string text;
};

/// Locates the boxed label (bounding box of pure 0/255 pixels) and decodes
/// its glyphs by nearest-pattern match. Empty optional when no box exists.
std::optional<TextBox> find_text_box(const Raster& img);

}  // namespace font
}  // namespace di3po
