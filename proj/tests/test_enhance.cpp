#include "doctest.h"
#include "support.hpp"

#include "texforge/enhance.hpp"
#include "texforge/render.hpp"

#include <set>

using namespace texforge;
namespace tt = texforge::testing;

namespace {

std::vector<LatexFormula> golden_units() {
    std::vector<LatexFormula> out;
    for (const auto& s : tt::golden_formulas()) out.push_back(make_formula(s));
    return out;
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + needle.size())) ++n;
    return n;
}

}  // namespace

TEST_SUITE("enhance") {

TEST_CASE("concat_horizontal joins with the separator") {
    auto f = concat_horizontal({make_formula("a=b"), make_formula("c=d")}, ",\\quad");
    CHECK(f.source == "a=b ,\\quad c=d");
    CHECK(f.provenance == Provenance::Enhanced);
    CHECK_THROWS_AS(concat_horizontal({make_formula("a")}, ",\\quad"), EnhanceError);
    CHECK_THROWS_AS(concat_horizontal({make_formula("a"), make_formula("x \\\\ y")}, "\\;"), EnhanceError);
    CHECK_THROWS_AS(concat_horizontal({make_formula("a"), make_formula("b"), make_formula("c"), make_formula("d")}, "\\;", 3),
                    EnhanceError);
    CHECK_THROWS_AS(concat_horizontal({make_formula("a"), make_formula("\\frac{")}, "\\;"), EnhanceError);
}

TEST_CASE("three symbol units give one SingleLine formula with two separators") {
    for (std::uint64_t s = 0; s < 100; ++s) {
        Rng rng(s);
        std::vector<LatexFormula> units;
        for (int i = 0; i < 3; ++i) units.push_back(gen_short_formula(rng));
        auto f = concat_horizontal(units, rng, 3);
        CHECK(f.category == Category::SingleLine);
        std::size_t seps = 0;
        for (auto sep : kHorizontalSeparators) seps = std::max(seps, count_of(f.source, " " + std::string(sep) + " "));
        CHECK(seps == 2);
    }
}

TEST_CASE("concat_vertical wraps rows") {
    auto f = concat_vertical({make_formula("x=1"), make_formula("y=2")}, "aligned");
    CHECK(f.source == "\\begin{aligned} x=1 \\\\ y=2 \\end{aligned}");
    CHECK(f.category == Category::MultiLine);
    CHECK(f.token_length >= 6);
    auto nested = concat_vertical({make_formula("\\begin{aligned} a&=b \\end{aligned}"), make_formula("c")}, "aligned");
    CHECK(nested.source.starts_with("\\begin{gathered}"));
    CHECK_FALSE(validate(nested.tokens));
    CHECK_THROWS_AS(concat_vertical({make_formula("x"), make_formula("\\begin{tabular}{c} a \\end{tabular}")}, "aligned"),
                    EnhanceError);
}

TEST_CASE("vertical concatenation renders") {
    Renderer r(RendererConfig{});
    auto units = golden_units();
    std::vector<LatexFormula> pool;
    for (const auto& u : units)
        if (u.category != Category::Table) pool.push_back(u);
    for (std::uint64_t s = 0; s < 50; ++s) {
        Rng rng(s);
        std::vector<LatexFormula> parts{pool[rng.index(pool.size())], pool[rng.index(pool.size())]};
        auto f = concat_vertical(parts, rng);
        REQUIRE_FALSE(validate(f.tokens));
        CHECK(f.token_length >= parts[0].token_length + parts[1].token_length);
        INFO(f.source);
        CHECK(r.render({f.source, 0, 200, 30000}).ok());
    }
}

TEST_CASE("substitute") {
    auto table = SubstitutionTable::defaults();
    Rng rng(1);
    auto f = make_formula("a+b\\cdot(c)");
    CHECK(substitute(f, table, 0.0, rng).source == f.source);

    SubstitutionTable plus;
    plus.operator_classes = {{"+", "-", "\\pm"}};
    for (int i = 0; i < 200; ++i) {
        auto g = substitute(make_formula("a+b"), plus, 1.0, rng);
        CHECK((g.source == "a-b" || g.source == "a\\pm b"));
    }

    std::set<std::string> seen;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        Rng r2(s);
        auto g = substitute(make_formula("(a)"), table, 1.0, r2);
        CHECK((g.source == "[a]" || g.source == "\\{a\\}" || g.source == "\\langle a\\rangle"));
        seen.insert(g.source);
    }
    CHECK(seen.size() == 3);
}

TEST_CASE("substitution keeps bracket counts paired per class") {
    auto table = SubstitutionTable::defaults();
    auto units = golden_units();
    for (std::uint64_t s = 0; s < 300; ++s) {
        Rng rng(s);
        const auto& u = units[rng.index(units.size())];
        auto g = substitute(u, table, 0.7, rng);
        REQUIRE_FALSE(validate(g.tokens));
        for (const auto& cls : table.bracket_classes)
            for (const auto& [open, close] : cls) {
                auto count = [&](const LatexFormula& f, const std::string& t) {
                    return std::count_if(f.tokens.begin(), f.tokens.end(), [&](const Token& k) { return k.text == t; });
                };
                // Only pairs the input balanced are swapped, so the difference is preserved.
                CHECK(count(g, open) - count(g, close) == count(u, open) - count(u, close));
            }
    }
}

TEST_CASE("inject_text") {
    auto f = inject_text(make_formula("x=y"), std::vector<std::string>{"where"}, InjectPosition::Prefix);
    CHECK(f.source == "\\text{where}\\; x=y");
    auto g = inject_text(make_formula("x=y"), std::vector<std::string>{"a", "b"}, InjectPosition::Suffix);
    CHECK(g.source == "x=y\\; \\text{a b}");
    auto h = inject_text(make_formula("a \\quad b"), std::vector<std::string>{"and"}, InjectPosition::Between);
    CHECK(h.source == "a \\quad \\text{and}\\; b");
    Rng rng(2);
    CHECK_THROWS_AS(inject_text(make_formula("x"), std::vector<std::string>{}, rng), EnhanceError);
}

TEST_CASE("CJK text injection validates and renders") {
    auto lexicon = load_lexicon(tt::data_path("cjk_lexicon.txt"));
    REQUIRE(lexicon.size() == 12);
    Renderer r(RendererConfig{});
    auto units = golden_units();
    for (std::uint64_t s = 0; s < 50; ++s) {
        Rng rng(s);
        auto u = units[rng.index(units.size())];
        if (u.category == Category::Table) continue;
        auto f = inject_text(u, lexicon, rng);
        REQUIRE_FALSE(validate(f.tokens));
        CHECK(f.source.find("\\text{") != std::string::npos);
        CHECK(f.char_length < f.source.size());  // multi-byte codepoints
        INFO(f.source);
        CHECK(r.render({f.source, 0, 200, 30000}).ok());
    }
}

TEST_CASE("sanitize_lexicon strips group-breaking characters") {
    CHECK(sanitize_lexicon({"a{b}", "  ", "x_y", "ok"}) == std::vector<std::string>{"ab", "xy", "ok"});
    tt::ScratchDir dir;
    tt::write_file(dir / "lex.txt", "alpha\n\nbeta}\n");
    CHECK(load_lexicon(dir / "lex.txt") == std::vector<std::string>{"alpha", "beta"});
}

TEST_CASE("short formulas are valid Symbol formulas that render") {
    Renderer r(RendererConfig{});
    Rng rng(123);
    std::set<std::string> distinct;
    for (int i = 0; i < 10000; ++i) {
        auto f = gen_short_formula(rng);
        REQUIRE_FALSE(validate(f.tokens));
        CHECK(f.category == Category::Symbol);
        CHECK(f.token_length <= 6);
        CHECK(f.provenance == Provenance::Generated);
        distinct.insert(f.source);
    }
    CHECK(distinct.size() > 1000);
    std::size_t failures = 0;
    for (const auto& s : distinct)
        if (!r.render({s, 0, 200, 30000}).ok()) ++failures;
    CHECK(failures == 0);
}

TEST_CASE("enhancement is closed over valid units and deterministic") {
    auto units = golden_units();
    EnhanceConfig cfg;
    cfg.p_hcat = 0.5;
    cfg.p_vcat = 0.3;
    cfg.p_subst = 0.3;
    cfg.p_text_inject = 0.3;
    cfg.lexicons["english"] = {"for", "all", "where"};
    cfg.lexicons["chinese"] = load_lexicon(tt::data_path("cjk_lexicon.txt"));
    Enhancer e(units, cfg);
    for (std::uint64_t k = 0; k < 2000; ++k) {
        Rng a(derive_seed(5, "enhance", k)), b(derive_seed(5, "enhance", k));
        auto f = e.candidate(k % units.size(), a);
        INFO(f.source);
        CHECK_FALSE(validate(f.tokens));
        CHECK(f.source == e.candidate(k % units.size(), b).source);
        if (units[k % units.size()].category == Category::Table) CHECK(f.source == units[k % units.size()].source);
    }
}

TEST_CASE("config check") {
    EnhanceConfig cfg;
    CHECK_NOTHROW(cfg.check());
    cfg.p_subst = 1.5;
    CHECK_THROWS_AS(cfg.check(), EnhanceError);
    cfg.p_subst = 0.1;
    cfg.max_units_per_formula = 0;
    CHECK_THROWS_AS(cfg.check(), EnhanceError);
}

}  // TEST_SUITE
