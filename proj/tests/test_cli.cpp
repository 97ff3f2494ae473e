#include "doctest.h"
#include "support.hpp"

#include "cli_app.hpp"
#include "texforge/config.hpp"
#include "texforge/metrics.hpp"

#include <json.hpp>
#include <regex>
#include <set>
#include <sstream>

using namespace texforge;
namespace tt = texforge::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

void write_pairs(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::string text;
    int i = 0;
    for (const auto& [p, r] : pairs) text += json{{"id", "s" + std::to_string(i++)}, {"pred", p}, {"ref", r}}.dump() + "\n";
    tt::write_file(path, text);
}

std::set<std::string> flags_in(const std::string& help) {
    std::set<std::string> out;
    static const std::regex flag("--[a-z][a-z-]*");
    for (auto it = std::sregex_iterator(help.begin(), help.end(), flag); it != std::sregex_iterator(); ++it)
        out.insert(it->str());
    return out;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help and usage errors") {
    auto help = cli({"--help"});
    CHECK(help.code == 0);
    for (const char* sub : {"extract", "build", "eval", "stats", "hist", "stratify"})
        CHECK(help.out.find(sub) != std::string::npos);
    auto sub = cli({"eval", "--help"});
    CHECK(sub.code == 0);
    CHECK(sub.out.find("--dil-size") != std::string::npos);

    CHECK(cli({}).code == 1);
    CHECK(cli({"frobnicate"}).code == 1);
    CHECK(cli({"stats"}).code == 1);
    CHECK(cli({"extract", "/no/such/dir", "-o", "/tmp/x"}).code == 1);
    auto bad = cli({"--json-errors", "eval", "/no/such/pairs.jsonl"});
    CHECK(bad.code == 1);
    auto j = json::parse(bad.err);
    CHECK(j["error"]["code"] == 1);
    CHECK(j["error"]["kind"] == "usage");
}

TEST_CASE("runtime failures exit with 2") {
    tt::ScratchDir dir;
    tt::write_file(dir / "broken.jsonl", "not json\n");
    auto r = cli({"eval", (dir / "broken.jsonl").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("texforge: error:") != std::string::npos);
    auto j = cli({"--json-errors", "build", (dir / "missing").string(), "-o", (dir / "out").string()});
    CHECK(j.code == 2);
    CHECK(json::parse(j.err)["error"]["kind"] == "runtime");
}

TEST_CASE("config errors exit with 1 and name the key") {
    tt::ScratchDir dir;
    tt::write_file(dir / "c.toml", "[metrics]\nofset = 3\n");
    write_pairs(dir / "p.jsonl", {{"x", "x"}});
    auto r = cli({"--config", (dir / "c.toml").string(), "eval", (dir / "p.jsonl").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("metrics.ofset") != std::string::npos);
}

TEST_CASE("eval on identical pairs") {
    tt::ScratchDir dir;
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& f : tt::golden_formulas()) {
        pairs.emplace_back(f, f);
        if (pairs.size() == 12) break;
    }
    write_pairs(dir / "p.jsonl", pairs);
    auto r = cli({"eval", (dir / "p.jsonl").string(), "--offset", "2", "--dil-size", "1", "--csv",
                  (dir / "p.csv").string()});
    REQUIRE(r.code == 0);
    auto agg = json::parse(r.out)["aggregates"];
    CHECK(agg["FR"] == 0.0);
    CHECK(agg["EPMR"] == 100.0);
    CHECK(agg["EP@0"] == 100.0);
    CHECK(fs::exists(dir / "p.csv"));
}

TEST_CASE("eval without search matches the overlap oracle") {
    tt::ScratchDir dir;
    const std::vector<std::pair<std::string, std::string>> pairs = {
        {"x^2", "x^3"}, {"a+b", "a-b"}, {"\\frac{1}{2}", "\\frac{1}{3}"}, {"\\alpha", "\\beta"}, {"xy", "xyz"}};
    write_pairs(dir / "p.jsonl", pairs);
    auto r = cli({"eval", (dir / "p.jsonl").string(), "--offset", "0", "--dil-size", "0", "-o", (dir / "rep.json").string()});
    REQUIRE(r.code == 0);
    auto rep = json::parse(tt::read_file(dir / "rep.json"));
    Renderer renderer(RendererConfig{});
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto p = binarize(renderer.render({pairs[i].first, 0, 200, 30000}).image());
        auto q = binarize(renderer.render({pairs[i].second, 0, 200, 30000}).image());
        CHECK(rep["per_sample"][i]["epmr"].get<double>() == tt::oracle_epmr(p, q, 0, 0).score);
        if (p.width == q.width && p.height == q.height)
            CHECK(rep["per_sample"][i]["epmr"].get<double>() == tt::oracle_overlap(p, q));
    }
}

TEST_CASE("flags override the environment, which overrides the file") {
    tt::ScratchDir dir;
    write_pairs(dir / "p.jsonl", {{"x", "x"}, {"y", "y"}});
    tt::write_file(dir / "good.toml", "[renderer]\ncommand = \"builtin\"\n[metrics]\noffset = 1\n");
    tt::write_file(dir / "bad.toml", "[renderer]\ncommand = \"false\"\n[metrics]\noffset = 1\n");
    const std::string pairs = (dir / "p.jsonl").string();

    auto errors = [&](const Run& r) { return json::parse(r.out)["aggregates"]["errors"].get<int>(); };
    auto from_file = cli({"--config", (dir / "bad.toml").string(), "eval", pairs});
    REQUIRE(from_file.code == 0);
    CHECK(errors(from_file) == 2);
    auto flag = cli({"--config", (dir / "bad.toml").string(), "--renderer", "builtin", "eval", pairs});
    CHECK(errors(flag) == 0);

    setenv("TEXFORGE_RENDERER", "false", 1);
    auto env = cli({"--config", (dir / "good.toml").string(), "eval", pairs});
    auto env_flag = cli({"--config", (dir / "good.toml").string(), "--renderer", "builtin", "eval", pairs});
    unsetenv("TEXFORGE_RENDERER");
    CHECK(errors(env) == 2);
    CHECK(errors(env_flag) == 0);
}

TEST_CASE("extract, build, stats, hist and stratify end to end") {
    tt::ScratchDir corpus, out;
    tt::write_synthetic_corpus(corpus.path(), 3, 11);
    auto ex = cli({"extract", corpus.path().string(), "-o", (out / "units").string()});
    REQUIRE(ex.code == 0);
    CHECK(json::parse(ex.out)["units"].get<int>() > 10);
    CHECK(fs::exists(out / "units/units.jsonl"));

    const std::string ds = (out / "ds").string();
    auto b = cli({"--workers", "2", "build", corpus.path().string(), "-o", ds, "--seed", "7", "--size", "60"});
    REQUIRE(b.code == 0);
    CHECK(json::parse(b.out)["kept"].get<int>() == 60);

    auto table = cli({"stats", ds + "/manifest.jsonl", "--format", "table"});
    REQUIRE(table.code == 0);
    CHECK(table.out.find("Render fail (%)") != std::string::npos);
    auto st = cli({"stats", ds + "/manifest.jsonl"});
    CHECK(json::parse(st.out)["total_kept"] == 60);

    auto h = cli({"hist", ds + "/manifest.jsonl", "-o", (out / "h.csv").string()});
    REQUIRE(h.code == 0);
    CHECK(tt::read_file(out / "h.csv").starts_with("bucket,count\n0-50,"));

    auto s = cli({"stratify", ds + "/manifest.jsonl", "-o", (out / "strata").string(), "--sizes", "Symbol=5", "--seed", "3"});
    REQUIRE(s.code == 0);
    CHECK(json::parse(s.out)["Symbol"].get<int>() <= 5);
    CHECK(fs::exists(out / "strata/Complex.jsonl"));
    CHECK(cli({"stratify", ds + "/manifest.jsonl", "-o", (out / "x").string(), "--sizes", "Huge=5"}).code == 1);
}

TEST_CASE("repeated builds produce identical outputs") {
    tt::ScratchDir corpus, out;
    tt::write_synthetic_corpus(corpus.path(), 2, 4);
    for (const char* d : {"a", "b"})
        REQUIRE(cli({"build", corpus.path().string(), "-o", (out / d).string(), "--seed", "7", "--size", "40"}).code == 0);
    CHECK(tt::tree_digest(out / "a") == tt::tree_digest(out / "b"));
}

TEST_CASE("README documents every flag and config key") {
    const std::string readme = tt::read_file(TEXFORGE_README);
    std::set<std::string> flags = flags_in(cli({"--help"}).out);
    for (const char* sub : {"extract", "build", "eval", "stats", "hist", "stratify"})
        for (const auto& f : flags_in(cli({sub, "--help"}).out)) flags.insert(f);
    CHECK(flags.size() > 10);
    for (const auto& f : flags) {
        INFO(f);
        CHECK(readme.find("`" + f) != std::string::npos);
    }
    for (const auto& key : config_keys()) {
        INFO(key);
        CHECK(readme.find("`" + key + "`") != std::string::npos);
    }
}

}  // TEST_SUITE
