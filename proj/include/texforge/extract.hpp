#pragma once

#include "texforge/latex.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace texforge {

struct MarkdownDoc {
    std::filesystem::path path;
    std::string text;
    std::string id;  // corpus-relative path
};

struct ExtractedUnit {
    enum class Kind { Inline, Display };
    LatexFormula formula;
    Kind kind = Kind::Inline;
    std::string doc_id;
    // Byte offsets of the fenced content within the document text.
    std::size_t span_begin = 0;
    std::size_t span_end = 0;
};

struct ExtractDrop {
    std::string doc_id;
    std::size_t span_begin = 0;
    std::size_t span_end = 0;
    std::string reason;
};

struct ExtractResult {
    std::vector<ExtractedUnit> units;
    std::vector<ExtractDrop> drops;
};

inline constexpr std::size_t kMaxUnitChars = 2000;
inline constexpr std::size_t kMaxInlineDollarChars = 200;

// Finds math in \( \), \[ \], $ $, $$ $$ fences and bare equation/align/gather
// environments. Units that fail validation or are too long are dropped and
// reported; unterminated fences are reported as "UnterminatedFence" and tables
// inside inline fences as "InlineTable".
ExtractResult extract_units(const MarkdownDoc& doc);

// Prose outside math, split at sentence ends and math fences into chunks of at
// most max_words words; trailing chunks shorter than min_words are discarded.
std::vector<std::string> harvest_text_snippets(const MarkdownDoc& doc, int min_words, int max_words);

// All .md / .mmd files under dir, sorted by relative path.
std::vector<MarkdownDoc> load_corpus(const std::filesystem::path& dir);

const char* to_string(ExtractedUnit::Kind k);

}  // namespace texforge
