#pragma once

#include "texforge/image.hpp"
#include "texforge/latex.hpp"

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace texforge {

struct DedupConfig {
    double normalized_threshold = 0.10;
    int bucket_width = 16;  // in significant tokens
    void check() const;
};

enum class DropReason { AspectRatio, BoundaryOverflow, NotCentered, Repetition, RenderFail, Duplicate, Surplus };
const char* to_string(DropReason r);
std::optional<DropReason> drop_reason_from_string(std::string_view s);

struct FilterReport {
    std::string record_id;
    bool keep = true;
    std::set<DropReason> reasons;
};

// Unit-cost Levenshtein distance over tokens, computed in a band of width
// 2*cap+1. nullopt means the distance is larger than cap.
std::optional<std::size_t> edit_distance(std::span<const Token> a, std::span<const Token> b, std::size_t cap);
std::size_t edit_distance(std::span<const Token> a, std::span<const Token> b);

// d / max_len <= threshold, decided exactly as the double comparison.
bool within_threshold(std::size_t distance, std::size_t max_len, double threshold);
// Largest distance that still satisfies within_threshold for max_len.
std::size_t threshold_cap(std::size_t max_len, double threshold);

struct DedupResult {
    std::vector<std::size_t> kept;     // input indices, ascending
    std::vector<std::size_t> dropped;  // input indices, ascending
    // For every dropped index, the kept index it duplicates.
    std::vector<std::pair<std::size_t, std::size_t>> duplicate_of;
};

// Exact whitespace-normalized duplicates first, then near duplicates by
// token edit distance between items in the same or an adjacent length
// bucket. The earliest item always wins.
DedupResult dedup(const std::vector<LatexFormula>& formulas, const DedupConfig& cfg);

// nullopt = pass. A blank image fails with RenderFail.
std::optional<DropReason> check_aspect_ratio(const GrayImage& img, double min_ratio, double max_ratio);
// Empty = pass; otherwise BoundaryOverflow and/or NotCentered.
std::vector<DropReason> check_bounds_and_centering(const GrayImage& img, int margin, double center_tol);

}  // namespace texforge
