#include "support.hpp"

#include "texforge/hash.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#ifndef TEXFORGE_TEST_DATA
#error "TEXFORGE_TEST_DATA must name the fixture directory"
#endif

namespace texforge::testing {

namespace fs = std::filesystem;

fs::path data_path(const std::string& name) { return fs::path(TEXFORGE_TEST_DATA) / name; }

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(line);
    return out;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::vector<std::string> golden_formulas() { return read_lines(data_path("golden_formulas.txt")); }

ScratchDir::ScratchDir() {
    std::string tmpl = (fs::temp_directory_path() / "texforge-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

ScratchDir::~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::size_t oracle_edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::vector<std::size_t>> dp(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
    for (std::size_t i = 0; i <= a.size(); ++i) dp[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) dp[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            dp[i][j] = std::min({dp[i - 1][j] + 1, dp[i][j - 1] + 1, dp[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    return dp[a.size()][b.size()];
}

std::vector<std::string> lexemes(const std::string& latex) {
    std::vector<std::string> out;
    for (const Token& t : tokenize(latex))
        if (t.kind != TokenKind::Whitespace) out.push_back(t.text);
    return out;
}

OracleEpmr oracle_epmr(const BinaryImage& pred, const BinaryImage& ref, int offset, int dil) {
    const int W = std::max(pred.width, ref.width) + 2 * offset;
    const int H = std::max(pred.height, ref.height) + 2 * offset;
    auto paste = [&](const BinaryImage& m) {
        BinaryImage bg(W, H);
        const int x0 = (W - m.width) / 2, y0 = (H - m.height) / 2;
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) bg.at(x0 + x, y0 + y) = m.at(x, y);
        return bg;
    };
    const BinaryImage p = paste(pred), r = paste(ref);

    OracleEpmr best;
    for (int ox = -offset; ox <= offset; ++ox) {
        for (int oy = -offset; oy <= offset; ++oy) {
            BinaryImage shifted(W, H);
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    const int sx = x - ox, sy = y - oy;
                    if (sx >= 0 && sy >= 0 && sx < W && sy < H) shifted.at(x, y) = p.at(sx, sy);
                }
            BinaryImage dilated(W, H);
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    if (!shifted.at(x, y)) continue;
                    for (int v = std::max(0, y - dil); v <= std::min(H - 1, y + dil); ++v)
                        for (int u = std::max(0, x - dil); u <= std::min(W - 1, x + dil); ++u) dilated.at(u, v) = 1;
                }
            std::uint64_t inter = 0, uni = 0;
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    if (dilated.at(x, y) && r.at(x, y)) ++inter;
                    if (shifted.at(x, y) || r.at(x, y)) ++uni;
                }
            if (uni == 0) continue;
            const bool first = best.uni == 0;
            if (first || static_cast<unsigned __int128>(inter) * best.uni > static_cast<unsigned __int128>(best.inter) * uni) {
                best.inter = inter;
                best.uni = uni;
            }
        }
    }
    best.score = best.uni == 0 ? 0.0 : 100.0 * static_cast<double>(best.inter) / static_cast<double>(best.uni);
    return best;
}

double oracle_overlap(const BinaryImage& a, const BinaryImage& b) {
    if (a.width != b.width || a.height != b.height) throw std::invalid_argument("oracle_overlap: size mismatch");
    std::uint64_t both = 0, either = 0;
    for (std::size_t i = 0; i < a.mask.size(); ++i) {
        both += (a.mask[i] && b.mask[i]) ? 1 : 0;
        either += (a.mask[i] || b.mask[i]) ? 1 : 0;
    }
    return either == 0 ? 0.0 : 100.0 * static_cast<double>(both) / static_cast<double>(either);
}

std::vector<std::size_t> oracle_dedup(const std::vector<std::string>& formulas, double threshold) {
    std::vector<std::size_t> survivors;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < formulas.size(); ++i)
        if (seen.insert(normalize_whitespace(formulas[i])).second) survivors.push_back(i);

    std::vector<std::size_t> kept;
    for (std::size_t i : survivors) {
        const auto li = lexemes(formulas[i]);
        bool dup = false;
        for (std::size_t k : kept) {
            const auto lk = lexemes(formulas[k]);
            const std::size_t longest = std::max(li.size(), lk.size());
            const std::size_t d = oracle_edit_distance(li, lk);
            if (longest == 0 ? d == 0 : static_cast<double>(d) / static_cast<double>(longest) <= threshold) {
                dup = true;
                break;
            }
        }
        if (!dup) kept.push_back(i);
    }
    return kept;
}

BinaryImage random_mask(Rng& rng, int w, int h, double density) {
    BinaryImage m(w, h);
    for (auto& v : m.mask) v = rng.bernoulli(density) ? 1 : 0;
    return m;
}

BinaryImage blob_mask(Rng& rng, int w, int h, int pad) {
    BinaryImage m(w, h);
    const int blobs = static_cast<int>(rng.uniform_int(2, 6));
    for (int b = 0; b < blobs; ++b) {
        const int bw = static_cast<int>(rng.uniform_int(1, std::max(1, (w - 2 * pad) / 3)));
        const int bh = static_cast<int>(rng.uniform_int(1, std::max(1, (h - 2 * pad) / 2)));
        const int x0 = static_cast<int>(rng.uniform_int(pad, w - pad - bw));
        const int y0 = static_cast<int>(rng.uniform_int(pad, h - pad - bh));
        for (int y = y0; y < y0 + bh; ++y)
            for (int x = x0; x < x0 + bw; ++x) m.at(x, y) = 1;
    }
    return m;
}

GrayImage random_gray(Rng& rng, int w, int h) {
    GrayImage img(w, h);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return img;
}

std::vector<std::string> random_lexemes(Rng& rng, std::size_t max_len, std::size_t alphabet) {
    static const std::vector<std::string> pool = {"x", "y", "z", "1", "2", "+", "-", "=", "\\frac", "{", "}",
                                                  "^", "_", "\\alpha", "\\beta", "(", ")", "\\sum", "\\int", "&"};
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(max_len)));
    const std::size_t k = std::min(alphabet, pool.size());
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(pool[rng.index(k)]);
    return out;
}

namespace {

const std::vector<std::string> kLetters = {"a", "b", "c", "x", "y", "z", "n", "k", "m", "t", "u", "v", "p", "q", "r", "s",
                                           "A", "B", "F", "G", "L", "N", "P", "Q", "R", "X"};
const std::vector<std::string> kGreek = {"\\alpha", "\\beta", "\\gamma", "\\delta", "\\epsilon", "\\theta", "\\lambda",
                                         "\\mu", "\\pi", "\\sigma", "\\phi", "\\omega", "\\Gamma", "\\Omega"};
const std::vector<std::string> kOps = {"+", "-", "=", "<", ">", "\\le", "\\ge", "\\cdot", "\\times", "\\pm"};
const std::vector<std::string> kFuncs = {"\\sin", "\\cos", "\\log", "\\exp", "\\tan", "\\ln"};
const std::vector<std::string> kWords = {
    "where",  "for",     "all",      "such",  "that",    "and",     "if",    "otherwise", "holds", "we",
    "obtain", "the",     "function", "value", "is",      "bounded", "given", "by",        "then",  "each",
    "vector", "element", "of",       "set",   "integer", "real",    "prime", "order",     "when",  "thus",
    "energy", "model",   "system",   "state", "matrix",  "series",  "limit", "space",     "field", "group"};
const std::vector<std::string> kAccents = {"\\hat", "\\tilde", "\\bar", "\\vec", "\\dot"};

const std::string& pick(Rng& rng, const std::vector<std::string>& v) { return v[rng.index(v.size())]; }

std::string atom(Rng& rng) {
    const double r = rng.uniform01();
    if (r < 0.55) return pick(rng, kLetters);
    if (r < 0.8) return pick(rng, kGreek);
    return std::to_string(rng.uniform_int(0, 99));
}

std::string expr(Rng& rng, int depth, int terms);

std::string term(Rng& rng, int depth) {
    const double r = depth <= 0 ? 0.0 : rng.uniform01();
    if (r < 0.35) return atom(rng);
    if (r < 0.45) return atom(rng) + "^{" + expr(rng, depth - 1, 1) + "}";
    if (r < 0.55) return atom(rng) + "_{" + atom(rng) + "}";
    if (r < 0.65) return "\\frac{" + expr(rng, depth - 1, 2) + "}{" + expr(rng, depth - 1, 1) + "}";
    if (r < 0.72) return "\\sqrt{" + expr(rng, depth - 1, 2) + "}";
    if (r < 0.80) return pick(rng, kFuncs) + "(" + atom(rng) + ")";
    if (r < 0.86) return "\\left(" + expr(rng, depth - 1, 2) + "\\right)";
    if (r < 0.91) return "(" + expr(rng, depth - 1, 2) + ")";
    if (r < 0.96) return "\\sum_{" + atom(rng) + "=1}^{" + atom(rng) + "} " + term(rng, depth - 1);
    return "\\int_{0}^{" + atom(rng) + "} " + term(rng, depth - 1) + "\\,d" + pick(rng, kLetters);
}

std::string expr(Rng& rng, int depth, int terms) {
    std::string out = term(rng, depth);
    for (int i = 1; i < terms; ++i) out += pick(rng, kOps) + term(rng, depth);
    return out;
}

std::string words(Rng& rng, int lo, int hi) {
    std::string out;
    const auto n = rng.uniform_int(lo, hi);
    for (std::int64_t i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += pick(rng, kWords);
    }
    return out;
}

std::string sentence(Rng& rng) {
    std::string s = words(rng, 4, 12);
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s + ".";
}

}  // namespace

std::string random_formula(Rng& rng, const std::string& kind) {
    if (kind == "symbol") {
        const double r = rng.uniform01();
        if (r < 0.4) return pick(rng, kGreek);
        if (r < 0.7) return pick(rng, kAccents) + "{" + pick(rng, kLetters) + "}";
        return pick(rng, kLetters) + "_" + pick(rng, kLetters);
    }
    if (kind == "inline") return expr(rng, 2, static_cast<int>(rng.uniform_int(2, 4)));
    if (kind == "display") return expr(rng, 3, static_cast<int>(rng.uniform_int(3, 7)));
    if (kind == "long") {
        std::string out = expr(rng, 3, 8);
        while (utf8_length(out) < 520) out += pick(rng, kOps) + expr(rng, 3, 4);
        return out;
    }
    if (kind == "matrix") {
        static const std::vector<std::string> envs = {"pmatrix", "bmatrix", "vmatrix", "matrix"};
        const std::string env = pick(rng, envs);
        const auto rows = rng.uniform_int(1, 3), cols = rng.uniform_int(2, 3);
        std::string out = "\\begin{" + env + "} ";
        for (std::int64_t i = 0; i < rows; ++i) {
            if (i) out += " \\\\ ";
            for (std::int64_t j = 0; j < cols; ++j) {
                if (j) out += " & ";
                out += rng.bernoulli(0.3) ? term(rng, 1) : atom(rng);
            }
        }
        return out + " \\end{" + env + "}";
    }
    if (kind == "multiline") {
        const auto rows = rng.uniform_int(2, 3);
        std::string out = "\\begin{aligned} ";
        for (std::int64_t i = 0; i < rows; ++i) {
            if (i) out += " \\\\ ";
            out += expr(rng, 1, 2) + " &= " + expr(rng, 2, 2);
        }
        return out + " \\end{aligned}";
    }
    if (kind == "text") return expr(rng, 1, 2) + " \\text{ " + words(rng, 2, 4) + " } " + expr(rng, 1, 2);
    if (kind == "table") {
        const auto rows = rng.uniform_int(2, 4);
        std::string out = "\\begin{tabular}{|c|c|} \\hline ";
        for (std::int64_t i = 0; i < rows; ++i)
            out += pick(rng, kWords) + " & " + std::to_string(rng.uniform_int(0, 999)) + " \\\\ \\hline ";
        return out + "\\end{tabular}";
    }
    throw std::invalid_argument("random_formula: unknown kind " + kind);
}

void write_synthetic_corpus(const fs::path& dir, int docs, std::uint64_t seed) {
    fs::create_directories(dir);
    for (int d = 0; d < docs; ++d) {
        Rng rng(derive_seed(seed, "doc", static_cast<std::uint64_t>(d)));
        std::ostringstream md;
        md << "# Section " << d << "\n\n";
        const auto paragraphs = rng.uniform_int(6, 10);
        for (std::int64_t p = 0; p < paragraphs; ++p) {
            const auto pieces = rng.uniform_int(2, 4);
            for (std::int64_t k = 0; k < pieces; ++k) {
                md << sentence(rng) << ' ';
                const double r = rng.uniform01();
                if (r < 0.30) md << "Here \\(" << random_formula(rng, "inline") << "\\) ";
                else if (r < 0.45) md << "so $" << random_formula(rng, "inline") << "$ ";
                else if (r < 0.55) md << "and \\(" << random_formula(rng, "symbol") << "\\) ";
                else if (r < 0.62) md << "with \\(" << random_formula(rng, "text") << "\\) ";
            }
            md << "\n\n";
            const double r = rng.uniform01();
            if (r < 0.22) md << "\\[" << random_formula(rng, "display") << "\\]\n\n";
            else if (r < 0.34) md << "$$" << random_formula(rng, "matrix") << "$$\n\n";
            else if (r < 0.44) md << "$$" << random_formula(rng, "multiline") << "$$\n\n";
            else if (r < 0.50) md << "$$" << random_formula(rng, "table") << "$$\n\n";
            else if (r < 0.56)
                md << "\\begin{align}" << random_formula(rng, "inline") << " \\\\ " << random_formula(rng, "inline")
                   << "\\end{align}\n\n";
            else if (r < 0.62) md << "\\begin{equation}" << random_formula(rng, "display") << "\\end{equation}\n\n";
            else if (r < 0.65) md << "\\(\\frac{" << random_formula(rng, "symbol") << "}{\\)\n\n";
            else if (r < 0.67) md << "It costs $5 and $10 in total.\n\n";
        }
        char name[32];
        std::snprintf(name, sizeof name, "paper_%03d.md", d);
        write_file(dir / name, md.str());
    }
}

std::string file_sha256(const fs::path& path) { return sha256_hex(read_file(path)); }

std::string tree_digest(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).generic_string()] = file_sha256(e.path());
    std::string all;
    for (const auto& [name, digest] : files) all += name + std::string(1, '\0') + digest + "\n";
    return sha256_hex(all);
}

}  // namespace texforge::testing
