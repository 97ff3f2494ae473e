#pragma once

#include "texforge/image.hpp"
#include "texforge/latex.hpp"
#include "texforge/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace texforge::testing {

std::filesystem::path data_path(const std::string& name);
std::vector<std::string> read_lines(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);
std::vector<std::string> golden_formulas();

// Temporary directory removed on destruction.
class ScratchDir {
public:
    ScratchDir();
    ~ScratchDir();
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Oracles. Each is a plain transcription of a definition, with no shortcuts
// shared with the library.
std::size_t oracle_edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b);
std::vector<std::string> lexemes(const std::string& latex);  // significant token texts

struct OracleEpmr {
    std::uint64_t inter = 0;
    std::uint64_t uni = 0;
    double score = 0.0;
};
OracleEpmr oracle_epmr(const BinaryImage& pred, const BinaryImage& ref, int offset, int dil);
double oracle_overlap(const BinaryImage& a, const BinaryImage& b);

// Earliest-wins dedup comparing every later item with every kept item.
std::vector<std::size_t> oracle_dedup(const std::vector<std::string>& formulas, double threshold);

// Generators.
BinaryImage random_mask(Rng& rng, int w, int h, double density);
// Mask with a few filled rectangles, leaving a blank border of `pad` pixels.
BinaryImage blob_mask(Rng& rng, int w, int h, int pad);
GrayImage random_gray(Rng& rng, int w, int h);
std::vector<std::string> random_lexemes(Rng& rng, std::size_t max_len, std::size_t alphabet);

// Random valid formula. kind: "symbol", "inline", "display", "matrix",
// "multiline", "text", "table", "long".
std::string random_formula(Rng& rng, const std::string& kind);
// Markdown corpus of `docs` files with prose, every fence style and a few
// malformed fences. Deterministic for a seed.
void write_synthetic_corpus(const std::filesystem::path& dir, int docs, std::uint64_t seed);

std::string file_sha256(const std::filesystem::path& path);
// Digest over sorted relative paths and file contents.
std::string tree_digest(const std::filesystem::path& dir);

}  // namespace texforge::testing
