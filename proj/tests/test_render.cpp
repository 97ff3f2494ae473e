#include "doctest.h"
#include "support.hpp"

#include "texforge/glyph.hpp"
#include "texforge/hash.hpp"
#include "texforge/render.hpp"

#include <chrono>

using namespace texforge;
namespace tt = texforge::testing;
namespace fs = std::filesystem;

namespace {

RenderSpec spec(std::string latex, int font = 0) { return {std::move(latex), font, 200, 30000}; }

void check_margin(const GrayImage& img) {
    auto box = ink_bbox(img);
    REQUIRE(box);
    CHECK(box->x0 == Renderer::kMargin);
    CHECK(box->y0 == Renderer::kMargin);
    CHECK(img.width - box->x1 == Renderer::kMargin);
    CHECK(img.height - box->y1 == Renderer::kMargin);
}

std::string tool_command() { return std::string(TEXFORGE_GLYPH_TOOL) + " {input-file} {output-file} {dpi}"; }

}  // namespace

TEST_SUITE("render") {

TEST_CASE("successful renders are cropped with the margin") {
    Renderer r(RendererConfig{});
    auto out = r.render(spec("x^2"));
    REQUIRE(out.ok());
    check_margin(out.image());
    for (const auto& f : tt::golden_formulas()) {
        auto o = r.render(spec(f));
        REQUIRE(o.ok());
        check_margin(o.image());
    }
}

TEST_CASE("syntax errors are rejected before the backend") {
    Renderer r(RendererConfig{});
    auto out = r.render(spec("\\frac{a}{"));
    REQUIRE_FALSE(out.ok());
    CHECK(out.failure().kind == RenderFailureKind::SyntaxReject);
    CHECK(r.backend_invocations() == 0);
}

TEST_CASE("layout errors become compile errors") {
    Renderer r(RendererConfig{});
    auto out = r.render(spec("\\begin{foo} x \\end{foo}"));
    REQUIRE_FALSE(out.ok());
    CHECK(out.failure().kind == RenderFailureKind::CompileError);
    CHECK(r.backend_invocations() == 1);
}

TEST_CASE("renders are deterministic and font dependent") {
    Renderer r(RendererConfig{});
    auto a = r.render(spec("\\int_0^1 f(x)\\,dx"));
    auto b = r.render(spec("\\int_0^1 f(x)\\,dx"));
    REQUIRE(a.ok());
    CHECK(encode_png(a.image()) == encode_png(b.image()));
    auto c = r.render(spec("\\int_0^1 f(x)\\,dx", 1));
    REQUIRE(c.ok());
    CHECK_FALSE(a.image() == c.image());
    CHECK(r.fonts().size() == 4);
}

TEST_CASE("render request bounds are enforced") {
    Renderer r(RendererConfig{});
    CHECK_THROWS_AS(r.render({"x", 0, 71, 30000}), std::invalid_argument);
    CHECK_THROWS_AS(r.render({"x", 0, 200, 999}), std::invalid_argument);
    CHECK_THROWS_AS(r.render({"x", 9, 200, 30000}), std::invalid_argument);
}

TEST_CASE("standalone documents round-trip") {
    const std::string doc = standalone_document("\\frac{a}{b}", "\\usepackage{mathpazo}");
    CHECK(doc.find("\\documentclass") != std::string::npos);
    auto parts = parse_standalone_document(doc);
    CHECK(parts.latex == "\\frac{a}{b}");
    CHECK(parts.font_preamble == "\\usepackage{mathpazo}");
}

TEST_CASE("cache serves repeats without backend calls") {
    tt::ScratchDir dir;
    RendererConfig cfg;
    cfg.cache_dir = dir.path();
    Renderer r(cfg);
    auto formulas = tt::golden_formulas();
    std::vector<RenderOutcome> first;
    for (const auto& f : formulas) first.push_back(r.render_cached(spec(f)));
    const auto calls = r.backend_invocations();
    CHECK(calls == formulas.size());
    for (std::size_t i = 0; i < formulas.size(); ++i) {
        auto again = r.render_cached(spec(formulas[i]));
        REQUIRE(again.ok() == first[i].ok());
        if (again.ok()) CHECK(again.image() == first[i].image());
    }
    CHECK(r.backend_invocations() == calls);

    // Fan-out layout.
    const auto key = r.cache_key(spec(formulas[0]));
    CHECK(key.size() == 64);
    CHECK(fs::exists(dir / key.substr(0, 2) / key.substr(2, 2) / (key + ".png")));

    // Corrupt entries are misses, cleared caches re-derive.
    tt::write_file(dir / key.substr(0, 2) / key.substr(2, 2) / (key + ".png"), "garbage");
    auto redo = r.render_cached(spec(formulas[0]));
    REQUIRE(redo.ok());
    CHECK(redo.image() == first[0].image());
    CHECK(r.backend_invocations() == calls + 1);
    fs::remove_all(dir.path());
    fs::create_directories(dir.path());
    CHECK(r.render_cached(spec(formulas[1])).image() == first[1].image());
}

TEST_CASE("failures are cached too") {
    tt::ScratchDir dir;
    RendererConfig cfg;
    cfg.cache_dir = dir.path();
    Renderer r(cfg);
    auto a = r.render_cached(spec("\\begin{foo} x \\end{foo}"));
    auto b = r.render_cached(spec("\\begin{foo} x \\end{foo}"));
    CHECK(r.backend_invocations() == 1);
    REQUIRE_FALSE(b.ok());
    CHECK(b.failure().kind == a.failure().kind);
}

TEST_CASE("cache keys depend on every input") {
    Renderer r(RendererConfig{});
    auto k = r.cache_key({"x", 0, 200, 30000});
    CHECK(k != r.cache_key({"y", 0, 200, 30000}));
    CHECK(k != r.cache_key({"x", 1, 200, 30000}));
    CHECK(k != r.cache_key({"x", 0, 300, 30000}));
    CHECK(k == r.cache_key({"x", 0, 200, 5000}));
    Renderer other(make_backend("builtin", "glyph-other"), RendererConfig::default_fonts());
    CHECK(k != other.cache_key({"x", 0, 200, 30000}));
}

TEST_CASE("batch_render keeps order and counts failures") {
    Renderer r(RendererConfig{});
    auto res = r.batch_render({spec("a"), spec("\\frac{a}{"), spec("b"), spec("c")}, 2);
    CHECK(res.fail_rate == 25.0);
    REQUIRE(res.outcomes.size() == 4);
    CHECK_FALSE(res.outcomes[1].ok());
    auto empty = r.batch_render({}, 4);
    CHECK(empty.outcomes.empty());
    CHECK(empty.fail_rate == 0.0);
    CHECK_THROWS(r.batch_render({spec("a")}, 0));
}

TEST_CASE("batch_render is independent of worker count") {
    Renderer r(RendererConfig{});
    std::vector<RenderSpec> specs;
    Rng rng(4);
    for (const auto& f : tt::golden_formulas()) specs.push_back(spec(f, static_cast<int>(rng.index(4))));
    specs.push_back(spec("\\frac{"));
    specs.push_back(spec("\\begin{foo}x\\end{foo}"));
    auto one = r.batch_render(specs, 1);
    auto eight = r.batch_render(specs, 8);
    REQUIRE(one.outcomes.size() == eight.outcomes.size());
    std::size_t failures = 0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        REQUIRE(one.outcomes[i].ok() == eight.outcomes[i].ok());
        if (one.outcomes[i].ok()) CHECK(one.outcomes[i].image() == eight.outcomes[i].image());
        else ++failures;
    }
    CHECK(one.fail_rate == eight.fail_rate);
    CHECK(one.fail_rate == 100.0 * static_cast<double>(failures) / static_cast<double>(specs.size()));
}

TEST_CASE("command backend follows the external contract") {
    Renderer cmd(make_backend(tool_command()), RendererConfig::default_fonts());
    Renderer builtin(RendererConfig{});
    for (const char* f : {"x^2", "\\frac{a}{b}", "\\begin{pmatrix} 1 & 2 \\end{pmatrix}"}) {
        auto a = cmd.render(spec(f, 2));
        auto b = builtin.render(spec(f, 2));
        REQUIRE(a.ok());
        CHECK(a.image() == b.image());
    }
    auto bad = cmd.render(spec("\\begin{foo} x \\end{foo}"));
    REQUIRE_FALSE(bad.ok());
    CHECK(bad.failure().kind == RenderFailureKind::CompileError);
    CHECK(cmd.backend().version().starts_with("cmd-"));
    CHECK(cmd.probe());
}

TEST_CASE("command backend failure kinds") {
    Renderer empty(make_backend("true"), RendererConfig::default_fonts());
    auto e = empty.render(spec("x"));
    REQUIRE_FALSE(e.ok());
    CHECK(e.failure().kind == RenderFailureKind::EmptyOutput);
    CHECK_FALSE(empty.probe());

    Renderer failing(make_backend("echo boom >&2; exit 3"), RendererConfig::default_fonts());
    auto f = failing.render(spec("x"));
    REQUIRE_FALSE(f.ok());
    CHECK(f.failure().kind == RenderFailureKind::CompileError);
    CHECK(f.failure().detail.find("boom") != std::string::npos);

    // A white page has no ink.
    tt::ScratchDir dir;
    write_png(dir / "white.png", GrayImage(20, 20, 255));
    Renderer blank(make_backend("cp " + (dir / "white.png").string() + " {output-file}"), RendererConfig::default_fonts());
    auto b = blank.render(spec("x"));
    REQUIRE_FALSE(b.ok());
    CHECK(b.failure().kind == RenderFailureKind::EmptyOutput);
}

TEST_CASE("command backend enforces the timeout") {
    Renderer slow(make_backend("sleep 5"), RendererConfig::default_fonts());
    const auto t0 = std::chrono::steady_clock::now();
    auto out = slow.render({"x", 0, 200, 1000});
    const auto elapsed = std::chrono::steady_clock::now() - t0;
    REQUIRE_FALSE(out.ok());
    CHECK(out.failure().kind == RenderFailureKind::Timeout);
    CHECK(elapsed < std::chrono::seconds(4));
}

TEST_CASE("image helpers") {
    GrayImage img(10, 6, 255);
    CHECK_FALSE(ink_bbox(img));
    CHECK_FALSE(crop_to_ink(img, 2));
    img.at(3, 2) = 0;
    img.at(5, 3) = 127;
    img.at(7, 4) = 128;  // not ink at threshold 128
    auto box = ink_bbox(img);
    REQUIRE(box);
    CHECK(box->x0 == 3);
    CHECK(box->x1 == 6);
    CHECK(box->y0 == 2);
    CHECK(box->y1 == 4);
    auto c = crop_to_ink(img, 1);
    REQUIRE(c);
    CHECK(c->width == 5);
    CHECK(c->height == 4);
    CHECK(decode_png(encode_png(img)) == img);
    CHECK_THROWS_AS(decode_png({1, 2, 3}), ImageIoError);
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // TEST_SUITE
