#include "texforge/extract.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string_view>

namespace texforge {

namespace {

struct MathRegion {
    std::size_t outer_begin = 0, outer_end = 0;  // including fences
    std::size_t inner_begin = 0, inner_end = 0;
    ExtractedUnit::Kind kind = ExtractedUnit::Kind::Inline;
    std::string env;  // bare environment name, if any
    bool terminated = true;
};

constexpr std::array<std::string_view, 6> kBareEnvs = {
    "equation", "equation*", "align", "align*", "gather", "gather*",
};

bool escaped(std::string_view s, std::size_t i) {
    std::size_t n = 0;
    while (i > n && s[i - n - 1] == '\\') ++n;
    return n % 2 == 1;
}

bool has_blank_line(std::string_view s) {
    std::size_t pos = 0;
    while ((pos = s.find('\n', pos)) != std::string_view::npos) {
        std::size_t j = pos + 1;
        while (j < s.size() && (s[j] == ' ' || s[j] == '\t' || s[j] == '\r')) ++j;
        if (j < s.size() && s[j] == '\n') return true;
        pos = j;
    }
    return false;
}

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Closing delimiter for single-dollar math opened at `open`, following the
// usual Markdown rules: no space just inside either fence, no digit right
// after the closer, no blank line, bounded length.
std::size_t find_dollar_close(std::string_view s, std::size_t open) {
    if (open + 1 >= s.size() || is_ws(s[open + 1])) return std::string_view::npos;
    for (std::size_t j = open + 1; j < s.size(); ++j) {
        if (j - open - 1 > kMaxInlineDollarChars) return std::string_view::npos;
        if (s[j] == '\n' && has_blank_line(s.substr(open, j - open + 2))) return std::string_view::npos;
        if (s[j] != '$' || escaped(s, j)) continue;
        if (j == open + 1) return std::string_view::npos;
        if (is_ws(s[j - 1])) continue;
        if (j + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[j + 1]))) continue;
        return j;
    }
    return std::string_view::npos;
}

std::size_t find_unescaped(std::string_view s, std::string_view needle, std::size_t from) {
    while ((from = s.find(needle, from)) != std::string_view::npos) {
        if (!escaped(s, from)) return from;
        ++from;
    }
    return std::string_view::npos;
}

std::vector<MathRegion> scan_math(std::string_view s) {
    std::vector<MathRegion> out;
    std::size_t i = 0;
    const std::size_t n = s.size();
    auto fence = [&](std::size_t open_len, std::string_view close, ExtractedUnit::Kind kind) {
        MathRegion r;
        r.outer_begin = i;
        r.inner_begin = i + open_len;
        r.kind = kind;
        std::size_t c = close == "$$" ? find_unescaped(s, close, r.inner_begin) : s.find(close, r.inner_begin);
        if (c == std::string_view::npos) {
            r.terminated = false;
            r.inner_end = r.outer_end = r.inner_begin;
            out.push_back(r);
            i = r.inner_begin;
            return;
        }
        r.inner_end = c;
        r.outer_end = c + close.size();
        out.push_back(r);
        i = r.outer_end;
    };

    while (i < n) {
        const char c = s[i];
        if (c == '\\' && i + 1 < n) {
            const char d = s[i + 1];
            if (d == '(') {
                fence(2, "\\)", ExtractedUnit::Kind::Inline);
                continue;
            }
            if (d == '[') {
                fence(2, "\\]", ExtractedUnit::Kind::Display);
                continue;
            }
            if (s.substr(i, 7) == "\\begin{") {
                bool matched = false;
                for (std::string_view env : kBareEnvs) {
                    std::string open = "\\begin{" + std::string(env) + "}";
                    if (s.substr(i, open.size()) != open) continue;
                    fence(open.size(), "\\end{" + std::string(env) + "}", ExtractedUnit::Kind::Display);
                    out.back().env = env;
                    matched = true;
                    break;
                }
                if (matched) continue;
            }
            i += 2;
            continue;
        }
        if (c == '$') {
            if (i + 1 < n && s[i + 1] == '$') {
                fence(2, "$$", ExtractedUnit::Kind::Display);
                continue;
            }
            std::size_t close = find_dollar_close(s, i);
            if (close != std::string_view::npos) {
                out.push_back({i, close + 1, i + 1, close, ExtractedUnit::Kind::Inline, {}, true});
                i = close + 1;
                continue;
            }
        }
        ++i;
    }
    return out;
}

// Removes equation-numbering commands that do not typeset inside display math.
std::string strip_numbering(std::string_view body) {
    TokenSeq toks = tokenize(body);
    TokenSeq kept;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        const Token& t = toks[i];
        if (t.kind == TokenKind::Command && (t.text == "\\nonumber" || t.text == "\\notag")) continue;
        if (t.kind == TokenKind::Command && (t.text == "\\label" || t.text == "\\tag" || t.text == "\\tag*")) {
            std::size_t j = i + 1;
            while (j < toks.size() && toks[j].kind == TokenKind::Whitespace) ++j;
            if (j < toks.size() && toks[j].kind == TokenKind::GroupOpen) {
                int depth = 0;
                for (; j < toks.size(); ++j) {
                    if (toks[j].kind == TokenKind::GroupOpen) ++depth;
                    else if (toks[j].kind == TokenKind::GroupClose && --depth == 0) break;
                }
                if (j < toks.size()) {
                    i = j;
                    continue;
                }
            }
        }
        kept.push_back(t);
    }
    return normalize_whitespace(detokenize(kept));
}

std::string unit_source(const MathRegion& r, std::string_view inner) {
    std::string body = strip_numbering(inner);
    if (r.env.starts_with("align")) return "\\begin{aligned} " + body + " \\end{aligned}";
    if (r.env.starts_with("gather")) return "\\begin{gathered} " + body + " \\end{gathered}";
    return body;
}

std::string sanitize_word(std::string_view w) {
    static constexpr std::string_view kDrop = "\\{}$&#^_%~*`|<>[]";
    std::string out;
    for (char c : w)
        if (kDrop.find(c) == std::string_view::npos) out += c;
    return out;
}

void split_into_snippets(std::string_view prose, int min_words, int max_words, std::vector<std::string>& out) {
    std::vector<std::string> sentence;
    auto flush = [&]() {
        for (std::size_t at = 0; at < sentence.size(); at += static_cast<std::size_t>(max_words)) {
            std::size_t end = std::min(sentence.size(), at + static_cast<std::size_t>(max_words));
            if (end - at < static_cast<std::size_t>(min_words)) break;
            std::string snippet;
            for (std::size_t k = at; k < end; ++k) {
                if (k > at) snippet += ' ';
                snippet += sentence[k];
            }
            out.push_back(std::move(snippet));
        }
        sentence.clear();
    };

    std::size_t i = 0;
    while (i < prose.size()) {
        // Paragraph breaks end a sentence.
        if (prose[i] == '\n') {
            std::size_t j = i + 1;
            while (j < prose.size() && (prose[j] == ' ' || prose[j] == '\t' || prose[j] == '\r')) ++j;
            if (j < prose.size() && prose[j] == '\n') flush();
            if (j < prose.size() && prose[j] == '#') flush();
            i = j;
            continue;
        }
        if (is_ws(prose[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < prose.size() && !is_ws(prose[j])) ++j;
        std::string_view raw = prose.substr(i, j - i);
        std::string word = sanitize_word(raw);
        bool ends_sentence = !raw.empty() && (raw.back() == '.' || raw.back() == '!' || raw.back() == '?');
        if (!word.empty()) sentence.push_back(std::move(word));
        if (ends_sentence) flush();
        i = j;
    }
    flush();
}

}  // namespace

const char* to_string(ExtractedUnit::Kind k) {
    return k == ExtractedUnit::Kind::Inline ? "Inline" : "Display";
}

ExtractResult extract_units(const MarkdownDoc& doc) {
    ExtractResult result;
    const std::string_view text = doc.text;
    for (const MathRegion& r : scan_math(text)) {
        if (!r.terminated) {
            result.drops.push_back({doc.id, r.outer_begin, r.inner_begin, "UnterminatedFence"});
            continue;
        }
        std::string_view inner = text.substr(r.inner_begin, r.inner_end - r.inner_begin);
        std::string source = unit_source(r, inner);
        if (utf8_length(source) > kMaxUnitChars) {
            result.drops.push_back({doc.id, r.inner_begin, r.inner_end, "TooLong"});
            continue;
        }
        LatexFormula f = make_formula(std::move(source), Provenance::Extracted);
        if (auto err = validate(f.tokens)) {
            result.drops.push_back({doc.id, r.inner_begin, r.inner_end, std::string("Syntax:") + to_string(err->kind)});
            continue;
        }
        // Tables are only trusted inside display fences.
        if (r.kind == ExtractedUnit::Kind::Inline && f.category == Category::Table) {
            result.drops.push_back({doc.id, r.inner_begin, r.inner_end, "InlineTable"});
            continue;
        }
        result.units.push_back({std::move(f), r.kind, doc.id, r.inner_begin, r.inner_end});
    }
    return result;
}

std::vector<std::string> harvest_text_snippets(const MarkdownDoc& doc, int min_words, int max_words) {
    if (min_words < 1 || max_words < min_words)
        throw std::invalid_argument("harvest_text_snippets: need 1 <= min_words <= max_words");
    std::vector<std::string> out;
    const std::string_view text = doc.text;
    std::size_t prose_begin = 0;
    for (const MathRegion& r : scan_math(text)) {
        split_into_snippets(text.substr(prose_begin, r.outer_begin - prose_begin), min_words, max_words, out);
        prose_begin = r.terminated ? r.outer_end : r.inner_begin;
    }
    split_into_snippets(text.substr(prose_begin), min_words, max_words, out);
    return out;
}

std::vector<MarkdownDoc> load_corpus(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw std::runtime_error("corpus directory not found: " + dir.string());
    std::vector<MarkdownDoc> docs;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        if (ext != ".md" && ext != ".mmd") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        if (!in) throw std::runtime_error("cannot read " + entry.path().string());
        MarkdownDoc doc;
        doc.path = entry.path();
        doc.id = fs::relative(entry.path(), dir).generic_string();
        doc.text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        docs.push_back(std::move(doc));
    }
    std::sort(docs.begin(), docs.end(), [](const MarkdownDoc& a, const MarkdownDoc& b) { return a.id < b.id; });
    return docs;
}

}  // namespace texforge
