// Standalone renderer that follows the external command contract:
//   texforge-glyph-render INPUT.tex OUTPUT.png [DPI]
// It reads the formula and font snippet back out of the generated document
// and typesets them with the built-in glyph engine.

#include "texforge/glyph.hpp"
#include "texforge/image.hpp"
#include "texforge/render.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

int main(int argc, char** argv) {
    if (argc < 3 || argc > 4) {
        std::cerr << "usage: texforge-glyph-render INPUT.tex OUTPUT.png [DPI]\n";
        return 64;
    }
    int dpi = 200;
    if (argc == 4) {
        try {
            dpi = std::stoi(argv[3]);
        } catch (const std::exception&) {
            std::cerr << "invalid dpi: " << argv[3] << "\n";
            return 64;
        }
    }
    std::ifstream in(argv[1], std::ios::binary);
    if (!in) {
        std::cerr << "cannot read " << argv[1] << "\n";
        return 66;
    }
    std::stringstream doc;
    doc << in.rdbuf();
    const auto parts = texforge::parse_standalone_document(doc.str());
    try {
        texforge::write_png(argv[2], texforge::glyph_typeset(parts.latex, parts.font_preamble, dpi));
    } catch (const std::exception& e) {
        std::cerr << "! " << e.what() << "\n";
        return 1;
    }
    return 0;
}
