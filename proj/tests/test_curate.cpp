#include "doctest.h"
#include "support.hpp"

#include "texforge/curate.hpp"

using namespace texforge;
namespace tt = texforge::testing;

namespace {

TokenSeq chars(const std::string& s) {
    TokenSeq out;
    for (char c : s) out.push_back({TokenKind::Symbol, std::string(1, c)});
    return out;
}

TokenSeq as_tokens(const std::vector<std::string>& lex) {
    TokenSeq out;
    for (const auto& l : lex) out.push_back({TokenKind::Symbol, l});
    return out;
}

std::vector<LatexFormula> formulas_of(const std::vector<std::string>& v) {
    std::vector<LatexFormula> out;
    for (const auto& s : v) out.push_back(make_formula(s));
    return out;
}

GrayImage with_box(int w, int h, int x0, int y0, int bw, int bh) {
    GrayImage img(w, h, 255);
    for (int y = y0; y < y0 + bh; ++y)
        for (int x = x0; x < x0 + bw; ++x) img.at(x, y) = 0;
    return img;
}

}  // namespace

TEST_SUITE("curate") {

TEST_CASE("edit distance examples") {
    CHECK(edit_distance(chars("abc"), chars("abc")) == 0);
    CHECK(edit_distance(chars("kitten"), chars("sitting")) ==
          tt::oracle_edit_distance({"k", "i", "t", "t", "e", "n"}, {"s", "i", "t", "t", "i", "n", "g"}));
    CHECK(edit_distance(chars("kitten"), chars("sitting")) == 3);
    CHECK_FALSE(edit_distance(chars("a"), chars("b"), 0));
    CHECK(edit_distance(chars("kitten"), chars("sitting"), 3) == 3u);
    CHECK_FALSE(edit_distance(chars("kitten"), chars("sitting"), 2));
    CHECK(edit_distance(chars(""), chars("abc")) == 3);
}

TEST_CASE("banded distance agrees with the full table") {
    Rng rng(31);
    for (int i = 0; i < 400; ++i) {
        auto a = tt::random_lexemes(rng, 40, 4), b = tt::random_lexemes(rng, 40, 4);
        const auto want = tt::oracle_edit_distance(a, b);
        CHECK(edit_distance(as_tokens(a), as_tokens(b)) == want);
        const std::size_t cap = rng.index(45);
        auto banded = edit_distance(as_tokens(a), as_tokens(b), cap);
        if (want <= cap) CHECK(banded == want);
        else CHECK_FALSE(banded);
    }
}

TEST_CASE("edit distance is a metric") {
    Rng rng(32);
    for (int i = 0; i < 300; ++i) {
        auto a = as_tokens(tt::random_lexemes(rng, 20, 5));
        auto b = as_tokens(tt::random_lexemes(rng, 20, 5));
        auto c = as_tokens(tt::random_lexemes(rng, 20, 5));
        CHECK(edit_distance(a, b) == edit_distance(b, a));
        CHECK(edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c));
        CHECK((edit_distance(a, b) == 0) == (a == b));
    }
}

TEST_CASE("threshold helpers") {
    CHECK(within_threshold(1, 10, 0.1));
    CHECK_FALSE(within_threshold(1, 5, 0.1));
    CHECK(within_threshold(0, 0, 0.0));
    for (std::size_t len = 0; len < 300; ++len)
        for (double t : {0.0, 0.05, 0.1, 0.3, 1.0}) {
            const auto cap = threshold_cap(len, t);
            CHECK(within_threshold(cap, len, t));
            if (cap < len) CHECK_FALSE(within_threshold(cap + 1, len, t));
        }
}

TEST_CASE("dedup examples") {
    DedupConfig cfg;
    auto same = dedup(formulas_of({"x+y", "x + y"}), cfg);
    CHECK(same.kept == std::vector<std::size_t>{0});
    CHECK(same.dropped == std::vector<std::size_t>{1});
    REQUIRE(same.duplicate_of.size() == 1);
    CHECK(same.duplicate_of[0] == std::pair<std::size_t, std::size_t>{1, 0});

    auto close = dedup(formulas_of({"a+b+c", "a+b+d"}), cfg);
    CHECK(close.kept.size() == 2);
    CHECK(tt::oracle_edit_distance(tt::lexemes("a+b+c"), tt::lexemes("a+b+d")) == 1);

    auto loose = formulas_of({"a+b+c+d+e+f+g+h+i+j", "a+b+c+d+e+f+g+h+i+k"});
    CHECK(dedup(loose, cfg).kept == std::vector<std::size_t>{0});
}

TEST_CASE("threshold 1 keeps one formula per connected component") {
    DedupConfig cfg;
    cfg.normalized_threshold = 1.0;
    Rng rng(2);
    std::vector<std::string> v;
    for (int i = 0; i < 150; ++i) v.push_back(tt::random_formula(rng, i % 2 ? "inline" : "symbol"));
    auto r = dedup(formulas_of(v), cfg);
    CHECK(r.kept == tt::oracle_dedup(v, 1.0));
    CHECK(r.kept.size() == 1);
}

TEST_CASE("bucketed dedup matches the all-pairs oracle") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        Rng rng(seed);
        std::vector<std::string> v;
        for (int i = 0; i < 120; ++i) {
            if (!v.empty() && rng.bernoulli(0.3)) {
                // Near copy: one token changed in a random earlier formula.
                auto lex = tt::lexemes(v[rng.index(v.size())]);
                lex[rng.index(lex.size())] = "q";
                std::string s;
                for (const auto& l : lex) s += l + " ";
                v.push_back(s);
            } else {
                v.push_back(tt::random_formula(rng, rng.bernoulli(0.5) ? "display" : "inline"));
            }
        }
        for (double t : {0.0, 0.05, 0.1, 0.25}) {
            for (int width : {1, 4, 16}) {
                DedupConfig cfg;
                cfg.normalized_threshold = t;
                cfg.bucket_width = width;
                auto r = dedup(formulas_of(v), cfg);
                CHECK(r.kept == tt::oracle_dedup(v, t));
                CHECK(r.kept.size() + r.dropped.size() == v.size());
                for (auto [d, k] : r.duplicate_of) CHECK(std::find(r.kept.begin(), r.kept.end(), k) != r.kept.end());
            }
        }
    }
}

TEST_CASE("dedup is idempotent and order preserving") {
    Rng rng(12);
    std::vector<std::string> v;
    for (int i = 0; i < 200; ++i) v.push_back(tt::random_formula(rng, i % 3 ? "inline" : "symbol"));
    DedupConfig cfg;
    cfg.normalized_threshold = 0.2;
    auto r = dedup(formulas_of(v), cfg);
    std::vector<std::string> kept;
    for (auto k : r.kept) kept.push_back(v[k]);
    CHECK(std::is_sorted(r.kept.begin(), r.kept.end()));
    auto again = dedup(formulas_of(kept), cfg);
    CHECK(again.dropped.empty());
}

TEST_CASE("aspect ratio bounds are inclusive") {
    CHECK_FALSE(check_aspect_ratio(with_box(120, 30, 10, 10, 100, 10), 0.2, 20));
    CHECK(check_aspect_ratio(with_box(520, 30, 10, 10, 500, 10), 0.2, 20) == DropReason::AspectRatio);
    CHECK_FALSE(check_aspect_ratio(with_box(30, 30, 5, 5, 10, 10), 1.0, 1.0));
    CHECK(check_aspect_ratio(GrayImage(10, 10), 0.1, 10) == DropReason::RenderFail);
}

TEST_CASE("bounds and centering") {
    CHECK(check_bounds_and_centering(with_box(36, 36, 8, 8, 20, 20), 4, 0.1).empty());
    auto top = check_bounds_and_centering(with_box(20, 20, 5, 0, 10, 5), 1, 0.5);
    CHECK(top == std::vector<DropReason>{DropReason::BoundaryOverflow});
    // Box center at 0.9 of the width.
    auto off = check_bounds_and_centering(with_box(100, 20, 86, 8, 8, 4), 0, 0.2);
    CHECK(off == std::vector<DropReason>{DropReason::NotCentered});
    auto both = check_bounds_and_centering(with_box(100, 20, 90, 8, 10, 4), 2, 0.2);
    CHECK(both.size() == 2);
}

TEST_CASE("drop reason names round-trip") {
    for (auto r : {DropReason::AspectRatio, DropReason::BoundaryOverflow, DropReason::NotCentered, DropReason::Repetition,
                   DropReason::RenderFail, DropReason::Duplicate, DropReason::Surplus})
        CHECK(drop_reason_from_string(to_string(r)) == r);
    CHECK_FALSE(drop_reason_from_string("Other"));
    DedupConfig bad;
    bad.normalized_threshold = 1.5;
    CHECK_THROWS(bad.check());
}

}  // TEST_SUITE
