#include "texforge/glyph.hpp"

#include "texforge/latex.hpp"
#include "texforge/rng.hpp"

#include <algorithm>
#include <optional>
#include <unordered_set>
#include <vector>

namespace texforge {

namespace {

struct Box {
    int w = 0;
    int h = 0;
    int base = 0;  // baseline row, measured from the top
    std::vector<std::uint8_t> ink;

    Box() = default;
    Box(int w_, int h_, int base_) : w(w_), h(h_), base(base_), ink(static_cast<std::size_t>(w_) * h_, 0) {}

    void set(int x, int y) {
        if (x >= 0 && y >= 0 && x < w && y < h) ink[static_cast<std::size_t>(y) * w + x] = 1;
    }
    void fill(int x0, int y0, int x1, int y1) {
        for (int y = std::max(0, y0); y < std::min(h, y1); ++y)
            for (int x = std::max(0, x0); x < std::min(w, x1); ++x) ink[static_cast<std::size_t>(y) * w + x] = 1;
    }
};

struct Placed {
    Box box;
    int x;
    int baseline;  // y of the box baseline in the shared frame
};

Box compose(const std::vector<Placed>& parts) {
    if (parts.empty()) return Box(0, 0, 0);
    int top = 0, bottom = 0, left = 0, right = 0;
    bool first = true;
    for (const Placed& p : parts) {
        int t = p.baseline - p.box.base;
        int b = t + p.box.h;
        if (first) {
            top = t, bottom = b, left = p.x, right = p.x + p.box.w;
            first = false;
        } else {
            top = std::min(top, t);
            bottom = std::max(bottom, b);
            left = std::min(left, p.x);
            right = std::max(right, p.x + p.box.w);
        }
    }
    Box out(right - left, bottom - top, -top);
    for (const Placed& p : parts) {
        int ox = p.x - left;
        int oy = p.baseline - p.box.base - top;
        for (int y = 0; y < p.box.h; ++y)
            for (int x = 0; x < p.box.w; ++x)
                if (p.box.ink[static_cast<std::size_t>(y) * p.box.w + x]) out.set(ox + x, oy + y);
    }
    return out;
}

Box blank(int w, int h, int base) { return Box(std::max(0, w), std::max(0, h), base); }

const std::unordered_set<std::string_view> kBigOperators = {
    "\\sum", "\\prod", "\\coprod", "\\int", "\\iint", "\\iiint", "\\oint", "\\bigcup", "\\bigcap",
    "\\bigoplus", "\\bigotimes", "\\bigvee", "\\bigwedge", "\\bigsqcup",
};
const std::unordered_set<std::string_view> kFunctionNames = {
    "\\sin", "\\cos", "\\tan", "\\cot", "\\sec", "\\csc", "\\sinh", "\\cosh", "\\tanh", "\\coth",
    "\\arcsin", "\\arccos", "\\arctan", "\\log", "\\ln", "\\lg", "\\exp", "\\lim", "\\liminf",
    "\\limsup", "\\max", "\\min", "\\sup", "\\inf", "\\det", "\\arg", "\\dim", "\\ker", "\\deg",
    "\\gcd", "\\Pr", "\\hom", "\\mod", "\\bmod",
};
const std::unordered_set<std::string_view> kNoOps = {
    "\\displaystyle", "\\textstyle", "\\scriptstyle", "\\scriptscriptstyle", "\\limits",
    "\\nolimits", "\\nonumber", "\\notag", "\\bf", "\\it", "\\rm", "\\sf", "\\tt", "\\cal",
    "\\big", "\\Big", "\\bigg", "\\Bigg", "\\bigl", "\\bigr", "\\Bigl", "\\Bigr", "\\biggl",
    "\\biggr", "\\Biggl", "\\Biggr", "\\middle", "\\allowbreak", "\\relax", "\\centering",
};
const std::unordered_set<std::string_view> kStyleCommands = {
    "\\mathbf", "\\mathrm", "\\mathit", "\\mathcal", "\\mathbb", "\\mathfrak", "\\mathsf",
    "\\mathtt", "\\mathscr", "\\boldsymbol", "\\bm", "\\operatorname",
};
const std::unordered_set<std::string_view> kAccents = {
    "\\hat", "\\tilde", "\\bar", "\\vec", "\\dot", "\\ddot", "\\breve", "\\check", "\\acute",
    "\\grave", "\\mathring", "\\widehat", "\\widetilde", "\\overline", "\\overrightarrow",
    "\\overleftarrow", "\\overbrace", "\\underline", "\\underbrace",
};
const std::unordered_set<std::string_view> kKnownEnvs = {
    "matrix", "pmatrix", "bmatrix", "Bmatrix", "vmatrix", "Vmatrix", "smallmatrix", "cases",
    "array", "tabular", "aligned", "alignedat", "gathered", "split", "subarray", "align",
    "align*", "gather", "gather*", "multline", "multline*", "eqnarray", "eqnarray*",
};

class Typesetter {
public:
    Typesetter(std::string_view latex, std::string_view font, int dpi)
        : tokens_(significant(tokenize(latex))),
          font_seed_(fnv1a64(font)),
          unit_(std::max(1, dpi / 50)) {}

    Box run() {
        Box b = parse_rows(0);
        if (pos_ < tokens_.size()) throw GlyphLayoutError("unexpected " + tokens_[pos_].text);
        return b;
    }

private:
    TokenSeq tokens_;
    std::size_t pos_ = 0;
    std::uint64_t font_seed_;
    int unit_;
    std::uint64_t style_ = 0;
    int depth_ = 0;

    int scale(int level) const {
        int l = std::min(level, 2);
        return std::max(1, unit_ * (4 - l) / 4);
    }
    int stroke(int level) const { return std::max(1, scale(level) / 2); }

    const Token* peek() const { return pos_ < tokens_.size() ? &tokens_[pos_] : nullptr; }
    bool at(TokenKind k) const { return peek() && peek()->kind == k; }
    bool at(TokenKind k, std::string_view text) const { return at(k) && peek()->text == text; }
    const Token& take() {
        if (pos_ >= tokens_.size()) throw GlyphLayoutError("unexpected end of input");
        return tokens_[pos_++];
    }
    void expect(TokenKind k, const char* what) {
        if (!at(k)) throw GlyphLayoutError(std::string("missing ") + what);
        ++pos_;
    }

    Box glyph(std::string_view key, int level, int cols = 5, int rows = 7, int descent = 0) {
        const int sc = scale(level);
        Box b(cols * sc, rows * sc, (rows - descent) * sc);
        std::uint64_t h = splitmix64(fnv1a64(key) ^ font_seed_ ^ style_);
        bool any = false;
        for (int r = 0; r < rows; ++r) {
            std::uint64_t bits = splitmix64(h + static_cast<std::uint64_t>(r));
            for (int c = 0; c < cols; ++c) {
                if (((bits >> (c * 3)) & 7) < 4) continue;
                b.fill(c * sc, r * sc, (c + 1) * sc, (r + 1) * sc);
                any = true;
            }
        }
        if (!any) b.fill((cols / 2) * sc, 0, (cols / 2 + 1) * sc, rows * sc);
        return b;
    }

    Box hlist(std::vector<Box> atoms, int level) {
        std::vector<Placed> parts;
        int x = 0;
        const int gap = scale(level);
        for (Box& a : atoms) {
            if (a.w == 0 && a.h == 0) continue;
            parts.push_back({std::move(a), x, 0});
            x = parts.back().x + parts.back().box.w + gap;
        }
        if (parts.empty()) return blank(0, 0, 0);
        return compose(parts);
    }

    Box vstack(std::vector<Box> rows, int level) {
        if (rows.size() == 1) return std::move(rows.front());
        const int sc = scale(level);
        int width = 0;
        for (const Box& r : rows) width = std::max(width, r.w);
        std::vector<Placed> parts;
        int y = 0;
        for (Box& r : rows) {
            int baseline = y + std::max(r.base, 7 * sc);
            int x = (width - r.w) / 2;
            y = baseline + (r.h - r.base) + 2 * sc;
            parts.push_back({std::move(r), x, baseline});
        }
        Box out = compose(parts);
        out.base = out.h / 2 + 3 * sc;
        return out;
    }

    bool at_terminator() const {
        const Token* t = peek();
        if (!t) return true;
        return t->kind == TokenKind::GroupClose || t->kind == TokenKind::EnvEnd ||
               t->kind == TokenKind::Alignment || t->kind == TokenKind::LineBreak ||
               (t->kind == TokenKind::Command && (t->text == "\\right" || t->text == "\\hline"));
    }

    Box parse_sequence(int level) {
        std::vector<Box> atoms;
        while (!at_terminator()) atoms.push_back(parse_scripted(level));
        return hlist(std::move(atoms), level);
    }

    // Rows separated by \\ outside environments; & is a plain gap there.
    Box parse_rows(int level) {
        std::vector<Box> rows;
        std::vector<Box> current;
        for (;;) {
            current.push_back(parse_sequence(level));
            if (at(TokenKind::Alignment)) {
                ++pos_;
                continue;
            }
            if (at(TokenKind::Command, "\\hline")) {
                ++pos_;
                continue;
            }
            rows.push_back(hlist(std::move(current), level));
            current.clear();
            if (at(TokenKind::LineBreak)) {
                ++pos_;
                continue;
            }
            break;
        }
        return vstack(std::move(rows), level);
    }

    Box parse_group(int level) {
        expect(TokenKind::GroupOpen, "{");
        if (++depth_ > 200) throw GlyphLayoutError("nesting too deep");
        Box b = parse_rows(level);
        --depth_;
        expect(TokenKind::GroupClose, "}");
        return b;
    }

    Box parse_argument(int level) {
        const Token* t = peek();
        if (!t) throw GlyphLayoutError("missing argument");
        if (t->kind == TokenKind::GroupOpen) return parse_group(level);
        if (t->kind == TokenKind::Symbol && t->text != "^" && t->text != "_") return parse_atom(level);
        if (t->kind == TokenKind::Command && t->text != "\\right" && t->text != "\\hline") return parse_atom(level);
        throw GlyphLayoutError("missing argument");
    }

    // Skips a group without typesetting it (column specs, labels, colours).
    void skip_group_raw() {
        if (!at(TokenKind::GroupOpen)) {
            take();
            return;
        }
        int depth = 0;
        do {
            const Token& t = take();
            if (t.kind == TokenKind::GroupOpen) ++depth;
            else if (t.kind == TokenKind::GroupClose) --depth;
        } while (depth > 0);
    }

    Box parse_scripted(int level) {
        Box base;
        if (at(TokenKind::Symbol, "^") || at(TokenKind::Symbol, "_")) base = blank(0, 7 * scale(level), 7 * scale(level));
        else base = parse_atom(level);
        std::optional<Box> sup, sub;
        while (at(TokenKind::Symbol, "^") || at(TokenKind::Symbol, "_")) {
            bool is_sup = take().text == "^";
            auto& slot = is_sup ? sup : sub;
            if (slot) throw GlyphLayoutError(is_sup ? "double superscript" : "double subscript");
            slot = parse_argument(level + 1);
        }
        if (!sup && !sub) return base;
        const int sc = scale(level);
        std::vector<Placed> parts;
        int x = base.w + std::max(1, sc / 2);
        int base_top = -base.base;
        parts.push_back({std::move(base), 0, 0});
        if (sup) {
            int baseline = std::min(base_top + sup->base - 2 * sc, -3 * sc);
            baseline = std::max(baseline, base_top + sup->base / 2 - 2 * sc);
            parts.push_back({std::move(*sup), x, baseline});
        }
        if (sub) {
            int baseline = 2 * sc + sub->base / 2;
            parts.push_back({std::move(*sub), x, baseline});
        }
        return compose(parts);
    }

    Box text_box(std::string_view text, int level) {
        const std::uint64_t saved = style_;
        style_ = splitmix64(style_ ^ 0x7465787431ULL);
        std::vector<Box> glyphs;
        const int sc = scale(level);
        std::size_t i = 0;
        while (i < text.size()) {
            auto c = static_cast<unsigned char>(text[i]);
            std::size_t w = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : 4;
            std::string_view cp = text.substr(i, w);
            i += w;
            if (cp == " ") glyphs.push_back(blank(sc, 7 * sc, 7 * sc));
            else if (c >= 0x80) glyphs.push_back(glyph(cp, level, 7, 7));
            else if (cp == "\\" && i < text.size()) {
                glyphs.push_back(glyph(text.substr(i, 1), level));
                ++i;
            } else if (cp != "{" && cp != "}") {
                glyphs.push_back(glyph(cp, level));
            }
        }
        style_ = saved;
        return hlist(std::move(glyphs), level);
    }

    Box fraction(Box num, Box den, int level, bool bar) {
        const int sc = scale(level);
        const int rule_h = bar ? stroke(level) : 1;
        const int width = std::max(num.w, den.w) + 2 * sc;
        const int rule_top = num.h + sc;
        const int den_top = rule_top + rule_h + sc;
        std::vector<Placed> parts;
        int nx = (width - num.w) / 2, dx = (width - den.w) / 2;
        int num_base = num.base, den_base = den_top + den.base;
        parts.push_back({std::move(num), nx, num_base});
        Box rule(width, rule_h, 0);
        if (bar) rule.fill(0, 0, width, rule_h);
        parts.push_back({std::move(rule), 0, rule_top});
        parts.push_back({std::move(den), dx, den_base});
        Box out = compose(parts);
        // Put the rule on the maths axis.
        out.base = rule_top + rule_h / 2 + 3 * sc;
        return out;
    }

    Box delimiter(std::string_view d, int height, int level) {
        const int sc = scale(level);
        const int t = stroke(level);
        if (d == ".") return blank(0, 0, 0);
        Box b(3 * sc, std::max(height, 7 * sc), 0);
        const int h = b.h;
        auto vline = [&](int x) { b.fill(x, 0, x + t, h); };
        if (d == "(" || d == "\\lparen") {
            b.fill(sc, sc, sc + t, h - sc);
            b.fill(sc, 0, 3 * sc, t);
            b.fill(sc, h - t, 3 * sc, h);
        } else if (d == ")" || d == "\\rparen") {
            b.fill(2 * sc - t, sc, 2 * sc, h - sc);
            b.fill(0, 0, 2 * sc, t);
            b.fill(0, h - t, 2 * sc, h);
        } else if (d == "[" || d == "\\lbrack" || d == "\\lfloor" || d == "\\lceil") {
            vline(sc);
            if (d != "\\lfloor") b.fill(sc, 0, 3 * sc, t);
            if (d != "\\lceil") b.fill(sc, h - t, 3 * sc, h);
        } else if (d == "]" || d == "\\rbrack" || d == "\\rfloor" || d == "\\rceil") {
            vline(2 * sc - t);
            if (d != "\\rfloor") b.fill(0, 0, 2 * sc, t);
            if (d != "\\rceil") b.fill(0, h - t, 2 * sc, h);
        } else if (d == "\\{" || d == "\\lbrace") {
            b.fill(2 * sc, 0, 2 * sc + t, h);
            b.fill(0, h / 2 - t, 2 * sc, h / 2 + t);
        } else if (d == "\\}" || d == "\\rbrace") {
            b.fill(sc - t, 0, sc, h);
            b.fill(sc, h / 2 - t, 3 * sc, h / 2 + t);
        } else if (d == "\\langle" || d == "<") {
            for (int y = 0; y < h; ++y) {
                int x = 2 * sc - (2 * sc * std::min(y, h - 1 - y)) / std::max(1, h / 2);
                b.fill(x, y, x + t, y + 1);
            }
        } else if (d == "\\rangle" || d == ">") {
            for (int y = 0; y < h; ++y) {
                int x = sc + (2 * sc * std::min(y, h - 1 - y)) / std::max(1, h / 2) - t;
                b.fill(x, y, x + t, y + 1);
            }
        } else if (d == "\\|" || d == "\\Vert" || d == "\\lVert" || d == "\\rVert") {
            vline(sc - t);
            vline(2 * sc);
        } else {
            vline(sc + t / 2);
        }
        b.base = h / 2 + 3 * sc;
        return b;
    }

    Box accent(std::string_view name, Box body, int level) {
        const int sc = scale(level);
        const int t = stroke(level);
        int width = std::max(body.w, 3 * sc);
        Box mark(width, 2 * sc, 0);
        if (name == "\\bar" || name == "\\overline" || name == "\\underline") {
            mark.fill(0, sc - t / 2, width, sc - t / 2 + t);
        } else if (name == "\\overbrace" || name == "\\underbrace") {
            mark.fill(0, sc, width, sc + t);
            mark.fill(0, 0, t, 2 * sc);
            mark.fill(width - t, 0, width, 2 * sc);
            mark.fill(width / 2 - t, 0, width / 2 + t, 2 * sc);
        } else {
            Box g = glyph(name, level + 2, 5, 2);
            std::vector<Placed> parts{{std::move(mark), 0, 0}, {std::move(g), (width - 5 * scale(level + 2)) / 2, 0}};
            mark = compose(parts);
        }
        bool below = name == "\\underline" || name == "\\underbrace";
        std::vector<Placed> parts;
        int body_top = -body.base;
        int body_bottom = body.h - body.base;
        int bx = (width - body.w) / 2;
        parts.push_back({std::move(body), bx, 0});
        if (below) parts.push_back({std::move(mark), 0, body_bottom + sc});
        else parts.push_back({std::move(mark), 0, body_top - sc});
        return compose(parts);
    }

    Box radical(std::optional<Box> index, Box body, int level) {
        const int sc = scale(level);
        const int t = stroke(level);
        int h = body.h + 2 * sc;
        Box sign(3 * sc + body.w + sc, h, 0);
        sign.fill(0, h / 2, sc, h / 2 + t);
        sign.fill(sc, h / 2, sc + t, h);
        sign.fill(2 * sc, 0, 2 * sc + t, h);
        sign.fill(2 * sc, 0, sign.w, t);
        sign.base = h - (body.h - body.base);
        std::vector<Placed> parts;
        int sign_baseline = 0;
        parts.push_back({std::move(sign), 0, sign_baseline});
        parts.push_back({std::move(body), 3 * sc, sign_baseline});
        if (index) {
            int ib = -parts[0].box.base + h / 2 - sc;
            parts.push_back({std::move(*index), 0, ib});
        }
        return compose(parts);
    }

    Box frame(Box body, int level) {
        const int sc = scale(level);
        const int t = stroke(level);
        Box f(body.w + 2 * sc, body.h + 2 * sc, body.base + sc);
        f.fill(0, 0, f.w, t);
        f.fill(0, f.h - t, f.w, f.h);
        f.fill(0, 0, t, f.h);
        f.fill(f.w - t, 0, f.w, f.h);
        std::vector<Placed> parts{{std::move(f), 0, 0}, {std::move(body), sc, 0}};
        return compose(parts);
    }

    Box environment(int level) {
        const Token open = take();
        const std::string name = env_name(open);
        if (!kKnownEnvs.contains(name)) throw GlyphLayoutError("environment undefined: " + name);
        if (name == "array" || name == "tabular" || name == "alignedat" || name == "subarray") {
            if (!at(TokenKind::GroupOpen)) throw GlyphLayoutError("missing column specification");
            skip_group_raw();
        }
        const int sc = scale(level);
        const int cell_level = name == "smallmatrix" || name == "subarray" ? level + 1 : level;

        std::vector<std::vector<Box>> rows(1);
        std::vector<bool> rule_above(1, false);
        bool rule_at_end = false;
        for (;;) {
            while (at(TokenKind::Command, "\\hline") || at(TokenKind::Command, "\\cline")) {
                bool full = take().text == "\\hline";
                if (!full) skip_group_raw();
                if (rows.back().empty()) rule_above.back() = true;
                else rule_at_end = true;
            }
            rows.back().push_back(parse_sequence(cell_level));
            if (at(TokenKind::Alignment)) {
                ++pos_;
                continue;
            }
            if (at(TokenKind::LineBreak)) {
                ++pos_;
                rows.emplace_back();
                rule_above.push_back(false);
                continue;
            }
            if (at(TokenKind::EnvEnd)) {
                if (env_name(*peek()) != name) throw GlyphLayoutError("environment mismatch: " + name);
                ++pos_;
                break;
            }
            throw GlyphLayoutError(peek() ? "unexpected " + peek()->text : "unterminated environment " + name);
        }
        if (rows.size() > 1 && rows.back().size() == 1 && rows.back().front().w == 0) {
            if (rule_above.back()) rule_at_end = true;
            rows.pop_back();
            rule_above.pop_back();
        }

        std::size_t cols = 0;
        for (const auto& r : rows) cols = std::max(cols, r.size());
        std::vector<int> col_w(cols, 0);
        for (const auto& r : rows)
            for (std::size_t c = 0; c < r.size(); ++c) col_w[c] = std::max(col_w[c], r[c].w);
        const int col_gap = 3 * sc;
        int width = 0;
        for (int w : col_w) width += w;
        width += col_gap * static_cast<int>(cols > 0 ? cols - 1 : 0);

        std::vector<Placed> parts;
        int y = 0;
        const int t = stroke(level);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rule_above[r]) {
                Box rule(width, t, 0);
                rule.fill(0, 0, width, t);
                parts.push_back({std::move(rule), 0, y});
                y += t + sc;
            }
            int ascent = 7 * scale(cell_level), descent = 0;
            for (const Box& b : rows[r]) {
                ascent = std::max(ascent, b.base);
                descent = std::max(descent, b.h - b.base);
            }
            int baseline = y + ascent;
            int x = 0;
            for (std::size_t c = 0; c < rows[r].size(); ++c) {
                Box& b = rows[r][c];
                int offset = (col_w[c] - b.w) / 2;
                parts.push_back({std::move(b), x + offset, baseline});
                x += col_w[c] + col_gap;
            }
            y = baseline + descent + 2 * sc;
        }
        if (rule_at_end) {
            Box rule(width, t, 0);
            rule.fill(0, 0, width, t);
            parts.push_back({std::move(rule), 0, y});
        }
        Box grid = compose(parts);
        grid.base = grid.h / 2 + 3 * sc;

        std::string_view left, right;
        if (name == "pmatrix") left = "(", right = ")";
        else if (name == "bmatrix") left = "[", right = "]";
        else if (name == "Bmatrix") left = "\\{", right = "\\}";
        else if (name == "vmatrix") left = right = "|";
        else if (name == "Vmatrix") left = right = "\\|";
        else if (name == "cases") left = "\\{";
        if (left.empty() && right.empty()) return grid;
        std::vector<Placed> framed;
        int x = 0;
        int top = -grid.base;
        const int gw = grid.w, gh = grid.h;
        if (!left.empty()) {
            Box d = delimiter(left, gh, level);
            d.base = 0;
            x = d.w + sc;
            framed.push_back({std::move(d), 0, top});
        }
        framed.push_back({std::move(grid), x, 0});
        if (!right.empty()) {
            Box d = delimiter(right, gh, level);
            d.base = 0;
            framed.push_back({std::move(d), x + gw + sc, top});
        }
        return compose(framed);
    }

    Box left_right(int level) {
        take();  // \left
        const Token* d = peek();
        if (!d || (d->kind != TokenKind::Symbol && d->kind != TokenKind::Command))
            throw GlyphLayoutError("missing delimiter after \\left");
        std::string open = take().text;
        Box body = parse_sequence(level);
        if (!at(TokenKind::Command, "\\right")) throw GlyphLayoutError("missing \\right");
        take();
        d = peek();
        if (!d || (d->kind != TokenKind::Symbol && d->kind != TokenKind::Command))
            throw GlyphLayoutError("missing delimiter after \\right");
        std::string close = take().text;
        const int sc = scale(level);
        int h = std::max(body.h, 7 * sc) + sc;
        int top = -body.base - sc / 2;
        std::vector<Placed> parts;
        int x = 0;
        Box l = delimiter(open, h, level);
        if (l.w > 0) {
            l.base = 0;
            x = l.w + sc / 2;
            parts.push_back({std::move(l), 0, top});
        }
        int bw = body.w;
        parts.push_back({std::move(body), x, 0});
        Box r = delimiter(close, h, level);
        if (r.w > 0) {
            r.base = 0;
            parts.push_back({std::move(r), x + bw + sc / 2, top});
        }
        return compose(parts);
    }

    Box with_style(std::string_view command, int level) {
        const std::uint64_t saved = style_;
        style_ = splitmix64(style_ ^ fnv1a64(command));
        Box b = parse_argument(level);
        style_ = saved;
        return b;
    }

    Box parse_atom(int level) {
        const Token& t = *peek();
        const int sc = scale(level);
        switch (t.kind) {
            case TokenKind::GroupOpen: return parse_group(level);
            case TokenKind::EnvBegin: return environment(level);
            case TokenKind::Text: {
                std::string text = take().text;
                return text_box(text, level);
            }
            case TokenKind::Symbol: {
                std::string s = take().text;
                if (s == "~") return blank(2 * sc, 0, 0);
                if (s == "'") return glyph("'", level + 1, 2, 3);
                return glyph(s, level, static_cast<unsigned char>(s[0]) >= 0x80 ? 7 : 5);
            }
            case TokenKind::Command: break;
            default: throw GlyphLayoutError("unexpected " + t.text);
        }
        const std::string cmd = take().text;
        if (cmd == "\\left") {
            --pos_;
            return left_right(level);
        }
        if (cmd == "\\," || cmd == "\\thinspace") return blank(sc, 0, 0);
        if (cmd == "\\:" || cmd == "\\;" || cmd == "\\ " || cmd == "\\>") return blank(2 * sc, 0, 0);
        if (cmd == "\\quad") return blank(6 * sc, 0, 0);
        if (cmd == "\\qquad") return blank(12 * sc, 0, 0);
        if (cmd == "\\!" || cmd == "\\negthinspace") return blank(0, 0, 0);
        if (kNoOps.contains(cmd)) return blank(0, 0, 0);
        if (cmd == "\\label" || cmd == "\\tag" || cmd == "\\color" || cmd == "\\textcolor") {
            skip_group_raw();
            if (cmd == "\\textcolor") return parse_argument(level);
            return blank(0, 0, 0);
        }
        if (cmd == "\\hspace" || cmd == "\\vspace" || cmd == "\\kern" || cmd == "\\mkern") {
            skip_group_raw();
            return blank(cmd[1] == 'h' || cmd[1] == 'k' || cmd[1] == 'm' ? 2 * sc : 0, 0, 0);
        }
        if (cmd == "\\frac" || cmd == "\\dfrac" || cmd == "\\tfrac" || cmd == "\\cfrac" ||
            cmd == "\\binom" || cmd == "\\dbinom" || cmd == "\\tbinom") {
            int inner = cmd == "\\tfrac" || cmd == "\\tbinom" ? level + 1 : level;
            Box num = parse_argument(inner);
            Box den = parse_argument(inner);
            bool is_binom = cmd.find("binom") != std::string::npos;
            Box f = fraction(std::move(num), std::move(den), inner, !is_binom);
            if (!is_binom) return f;
            int h = f.h, top = -f.base;
            std::vector<Placed> parts;
            Box l = delimiter("(", h, level), r = delimiter(")", h, level);
            l.base = r.base = 0;
            int lw = l.w, fw = f.w;
            parts.push_back({std::move(l), 0, top});
            parts.push_back({std::move(f), lw, 0});
            parts.push_back({std::move(r), lw + fw, top});
            return compose(parts);
        }
        if (cmd == "\\sqrt") {
            std::optional<Box> index;
            if (at(TokenKind::Symbol, "[")) {
                take();
                std::vector<Box> atoms;
                while (!at(TokenKind::Symbol, "]")) {
                    if (at_terminator()) throw GlyphLayoutError("unterminated root index");
                    atoms.push_back(parse_scripted(level + 2));
                }
                take();
                index = hlist(std::move(atoms), level + 2);
            }
            return radical(std::move(index), parse_argument(level), level);
        }
        if (kAccents.contains(cmd)) return accent(cmd, parse_argument(level), level);
        if (kStyleCommands.contains(cmd)) return with_style(cmd, level);
        if (is_text_command(cmd)) {
            if (at(TokenKind::GroupOpen)) {
                take();
                Box b = at(TokenKind::Text) ? text_box(take().text, level) : blank(0, 0, 0);
                expect(TokenKind::GroupClose, "}");
                return b;
            }
            return parse_argument(level);
        }
        if (cmd == "\\overset" || cmd == "\\underset" || cmd == "\\stackrel") {
            Box mark = parse_argument(level + 1);
            Box body = parse_argument(level);
            int width = std::max(mark.w, body.w);
            int body_top = -body.base, body_bottom = body.h - body.base;
            bool over = cmd != "\\underset";
            std::vector<Placed> parts;
            int mx = (width - mark.w) / 2, bx = (width - body.w) / 2;
            int mark_h = mark.h, mark_base = mark.base;
            parts.push_back({std::move(body), bx, 0});
            int baseline = over ? body_top - sc - (mark_h - mark_base) : body_bottom + sc + mark_base;
            parts.push_back({std::move(mark), mx, baseline});
            return compose(parts);
        }
        if (cmd == "\\phantom") {
            Box b = parse_argument(level);
            return blank(b.w, b.h, b.base);
        }
        if (cmd == "\\boxed" || cmd == "\\fbox") return frame(parse_argument(level), level);
        if (cmd == "\\substack") return parse_argument(level + 1);
        if (cmd == "\\pmod") {
            Box arg = parse_argument(level);
            std::vector<Box> atoms;
            atoms.push_back(glyph("(", level));
            atoms.push_back(glyph("mod", level, 9));
            atoms.push_back(std::move(arg));
            atoms.push_back(glyph(")", level));
            return hlist(std::move(atoms), level);
        }
        if (cmd == "\\begin" || cmd == "\\end" || cmd == "\\right") throw GlyphLayoutError("misplaced " + cmd);
        if (kBigOperators.contains(cmd)) return glyph(cmd, level, 7, 11, 3);
        if (kFunctionNames.contains(cmd)) {
            const std::uint64_t saved = style_;
            style_ = splitmix64(style_ ^ 0x726f6d616eULL);
            std::vector<Box> letters;
            for (std::size_t i = 1; i < cmd.size(); ++i) letters.push_back(glyph(cmd.substr(i, 1), level));
            style_ = saved;
            return hlist(std::move(letters), level);
        }
        return glyph(cmd, level);
    }
};

}  // namespace

GrayImage glyph_typeset(std::string_view latex, std::string_view font_preamble, int dpi) {
    Typesetter ts(latex, font_preamble, dpi);
    Box box = ts.run();
    const long long area = static_cast<long long>(box.w) * box.h;
    if (area > 64LL * 1024 * 1024) throw GlyphLayoutError("formula too large to typeset");
    const int pad = 4;
    GrayImage img(std::max(1, box.w + 2 * pad), std::max(1, box.h + 2 * pad), 255);
    for (int y = 0; y < box.h; ++y)
        for (int x = 0; x < box.w; ++x)
            if (box.ink[static_cast<std::size_t>(y) * box.w + x]) img.at(x + pad, y + pad) = 0;
    return img;
}

}  // namespace texforge
