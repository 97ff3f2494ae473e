#include "texforge/curate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace texforge {

void DedupConfig::check() const {
    if (!(normalized_threshold >= 0.0 && normalized_threshold <= 1.0))
        throw std::invalid_argument("curate.normalized_threshold must lie in [0, 1]");
    if (bucket_width < 1) throw std::invalid_argument("curate.bucket_width must be >= 1");
}

const char* to_string(DropReason r) {
    switch (r) {
        case DropReason::AspectRatio: return "AspectRatio";
        case DropReason::BoundaryOverflow: return "BoundaryOverflow";
        case DropReason::NotCentered: return "NotCentered";
        case DropReason::Repetition: return "Repetition";
        case DropReason::RenderFail: return "RenderFail";
        case DropReason::Duplicate: return "Duplicate";
        case DropReason::Surplus: return "Surplus";
    }
    return "?";
}

std::optional<DropReason> drop_reason_from_string(std::string_view s) {
    for (auto r : {DropReason::AspectRatio, DropReason::BoundaryOverflow, DropReason::NotCentered,
                   DropReason::Repetition, DropReason::RenderFail, DropReason::Duplicate, DropReason::Surplus})
        if (s == to_string(r)) return r;
    return std::nullopt;
}

std::optional<std::size_t> edit_distance(std::span<const Token> a, std::span<const Token> b, std::size_t cap) {
    const std::size_t n = a.size(), m = b.size();
    if ((n > m ? n - m : m - n) > cap) return std::nullopt;
    if (n == 0 || m == 0) return std::max(n, m);
    const std::size_t inf = std::numeric_limits<std::size_t>::max() / 2;
    std::vector<std::size_t> prev(m + 1, inf), cur(m + 1, inf);
    for (std::size_t j = 0; j <= std::min(m, cap); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        const std::size_t lo = i > cap ? i - cap : 0;
        const std::size_t hi = std::min(m, i + cap);
        std::fill(cur.begin(), cur.end(), inf);
        if (lo == 0) cur[0] = i;
        std::size_t row_min = lo == 0 ? i : inf;
        for (std::size_t j = std::max<std::size_t>(lo, 1); j <= hi; ++j) {
            std::size_t best = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            best = std::min(best, prev[j] + 1);
            best = std::min(best, cur[j - 1] + 1);
            cur[j] = best;
            row_min = std::min(row_min, best);
        }
        if (row_min > cap) return std::nullopt;
        std::swap(prev, cur);
    }
    if (prev[m] > cap) return std::nullopt;
    return prev[m];
}

std::size_t edit_distance(std::span<const Token> a, std::span<const Token> b) {
    return *edit_distance(a, b, std::max(a.size(), b.size()));
}

bool within_threshold(std::size_t distance, std::size_t max_len, double threshold) {
    if (max_len == 0) return distance == 0;
    return static_cast<double>(distance) / static_cast<double>(max_len) <= threshold;
}

std::size_t threshold_cap(std::size_t max_len, double threshold) {
    if (max_len == 0) return 0;
    auto cap = static_cast<std::size_t>(std::floor(threshold * static_cast<double>(max_len)));
    cap = std::min(cap, max_len);
    while (cap < max_len && within_threshold(cap + 1, max_len, threshold)) ++cap;
    while (cap > 0 && !within_threshold(cap, max_len, threshold)) --cap;
    return cap;
}

DedupResult dedup(const std::vector<LatexFormula>& formulas, const DedupConfig& cfg) {
    cfg.check();
    DedupResult result;
    const std::size_t n = formulas.size();

    // Pass 1: exact duplicates of the whitespace-normalized source.
    std::unordered_map<std::string, std::size_t> first_seen;
    std::vector<std::optional<std::size_t>> exact_of(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto [it, inserted] = first_seen.emplace(normalize_whitespace(formulas[i].source), i);
        if (!inserted) exact_of[i] = it->second;
    }

    // Pass 2: near duplicates among the survivors.
    std::vector<TokenSeq> sig(n);
    std::size_t max_len = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (exact_of[i]) continue;
        sig[i] = significant(formulas[i].tokens);
        max_len = std::max(max_len, sig[i].size());
    }
    // Widen buckets so that any pair within threshold lies in the same or an
    // adjacent bucket.
    const auto needed = static_cast<std::size_t>(std::ceil(cfg.normalized_threshold * static_cast<double>(max_len)));
    const std::size_t width = std::max<std::size_t>({static_cast<std::size_t>(cfg.bucket_width), needed, 1});

    std::unordered_map<std::size_t, std::vector<std::size_t>> buckets;  // bucket -> kept indices
    std::vector<std::optional<std::size_t>> near_of(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (exact_of[i]) continue;
        const std::size_t len = sig[i].size();
        const std::size_t b = len / width;
        std::optional<std::size_t> match;
        for (std::size_t nb = b == 0 ? 0 : b - 1; nb <= b + 1 && !match; ++nb) {
            auto it = buckets.find(nb);
            if (it == buckets.end()) continue;
            for (std::size_t k : it->second) {
                const std::size_t other = sig[k].size();
                const std::size_t longest = std::max(len, other);
                const std::size_t cap = threshold_cap(longest, cfg.normalized_threshold);
                if ((len > other ? len - other : other - len) > cap) continue;
                auto d = edit_distance(sig[i], sig[k], cap);
                if (d && within_threshold(*d, longest, cfg.normalized_threshold) && (!match || k < *match)) match = k;
            }
        }
        if (match) near_of[i] = match;
        else buckets[b].push_back(i);
    }

    for (std::size_t i = 0; i < n; ++i) {
        std::optional<std::size_t> of = exact_of[i] ? exact_of[i] : near_of[i];
        if (!of) {
            result.kept.push_back(i);
            continue;
        }
        // An exact copy of a dropped item resolves to that item's keeper.
        std::size_t root = *of;
        while (exact_of[root] || near_of[root]) root = exact_of[root] ? *exact_of[root] : *near_of[root];
        result.dropped.push_back(i);
        result.duplicate_of.emplace_back(i, root);
    }
    return result;
}

std::optional<DropReason> check_aspect_ratio(const GrayImage& img, double min_ratio, double max_ratio) {
    if (!(min_ratio > 0.0 && min_ratio <= max_ratio))
        throw std::invalid_argument("check_aspect_ratio: need 0 < min_ratio <= max_ratio");
    auto box = ink_bbox(img);
    if (!box) return DropReason::RenderFail;
    const double ratio = static_cast<double>(box->width()) / box->height();
    if (ratio < min_ratio || ratio > max_ratio) return DropReason::AspectRatio;
    return std::nullopt;
}

std::vector<DropReason> check_bounds_and_centering(const GrayImage& img, int margin, double center_tol) {
    if (margin < 0) throw std::invalid_argument("check_bounds_and_centering: margin must be >= 0");
    if (!(center_tol >= 0.0 && center_tol <= 0.5))
        throw std::invalid_argument("check_bounds_and_centering: center_tol must lie in [0, 0.5]");
    auto box = ink_bbox(img);
    if (!box) return {DropReason::RenderFail};
    std::vector<DropReason> out;
    if (box->x0 < margin || box->y0 < margin || box->x1 > img.width - margin || box->y1 > img.height - margin)
        out.push_back(DropReason::BoundaryOverflow);
    const double cx = (box->x0 + box->x1) / 2.0, cy = (box->y0 + box->y1) / 2.0;
    if (std::abs(cx - img.width / 2.0) > center_tol * img.width ||
        std::abs(cy - img.height / 2.0) > center_tol * img.height)
        out.push_back(DropReason::NotCentered);
    return out;
}

}  // namespace texforge
