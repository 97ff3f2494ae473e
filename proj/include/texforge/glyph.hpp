#pragma once

#include "texforge/image.hpp"

#include <stdexcept>
#include <string>
#include <string_view>

namespace texforge {

// Raised for input the typesetter cannot lay out (the analogue of a TeX
// compile error).
class GlyphLayoutError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kGlyphBackendVersion = "glyph-1";

// Deterministic schematic typesetter. It lays out fractions, scripts,
// radicals, accents, \left/\right pairs, text groups and array-like
// environments with block glyphs derived from each lexeme and the font
// preamble, so equal (latex, font, dpi) give bit-identical rasters and
// different formulas give different ones. It is not typographically faithful;
// point renderer.command at a TeX toolchain for real glyphs.
GrayImage glyph_typeset(std::string_view latex, std::string_view font_preamble, int dpi);

}  // namespace texforge
