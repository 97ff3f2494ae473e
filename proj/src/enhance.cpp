#include "texforge/enhance.hpp"

#include <algorithm>
#include <fstream>
#include <span>

namespace texforge {

namespace {

void require_valid(const LatexFormula& f, const char* op) {
    if (auto err = validate(f.tokens))
        throw EnhanceError(std::string(op) + ": unit fails validation (" + to_string(err->kind) + "): " + f.source);
}

bool contains_env(const LatexFormula& f, std::string_view name) {
    for (const Token& t : f.tokens)
        if (t.kind == TokenKind::EnvBegin && env_name(t) == name) return true;
    return false;
}

Token lexeme_token(const std::string& text) {
    return {text.starts_with('\\') ? TokenKind::Command : TokenKind::Symbol, text};
}

const std::vector<std::string> kGreekLower = {
    "\\alpha", "\\beta", "\\gamma", "\\delta", "\\epsilon", "\\varepsilon", "\\zeta", "\\eta",
    "\\theta", "\\vartheta", "\\iota", "\\kappa", "\\lambda", "\\mu", "\\nu", "\\xi", "\\pi",
    "\\rho", "\\sigma", "\\tau", "\\upsilon", "\\phi", "\\varphi", "\\chi", "\\psi", "\\omega",
};
const std::vector<std::string> kGreekUpper = {
    "\\Gamma", "\\Delta", "\\Theta", "\\Lambda", "\\Xi", "\\Pi", "\\Sigma", "\\Upsilon", "\\Phi", "\\Psi", "\\Omega",
};
const std::vector<std::string> kMiscSymbols = {"\\infty", "\\partial", "\\nabla", "\\hbar", "\\ell", "\\emptyset"};
const std::vector<std::string> kAccents = {"\\tilde", "\\hat", "\\bar", "\\vec", "\\dot"};
const std::vector<std::string> kLetterFonts = {"\\mathcal", "\\mathbb", "\\mathfrak"};

std::vector<std::string> latin_letters(bool lower, bool upper) {
    std::vector<std::string> out;
    if (lower)
        for (char c = 'a'; c <= 'z'; ++c) out.emplace_back(1, c);
    if (upper)
        for (char c = 'A'; c <= 'Z'; ++c) out.emplace_back(1, c);
    return out;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
    return rng.pick(std::span<const T>(v));
}

}  // namespace

void EnhanceConfig::check() const {
    const std::pair<const char*, double> probs[] = {{"p_hcat", p_hcat},
                                                    {"p_vcat", p_vcat},
                                                    {"p_subst", p_subst},
                                                    {"p_text_inject", p_text_inject},
                                                    {"short_formula_fraction", short_formula_fraction}};
    for (const auto& [name, p] : probs)
        if (!(p >= 0.0 && p <= 1.0)) throw EnhanceError(std::string("enhance.") + name + " must lie in [0, 1]");
    if (max_units_per_formula < 1) throw EnhanceError("enhance.max_units_per_formula must be >= 1");
}

SubstitutionTable SubstitutionTable::defaults() {
    SubstitutionTable t;
    t.operator_classes = {
        {"+", "-", "\\pm", "\\mp"},
        {"\\times", "\\cdot", "\\ast"},
        {"<", "\\le", "\\prec"},
        {">", "\\ge", "\\succ"},
    };
    t.bracket_classes = {
        {{"(", ")"}, {"[", "]"}, {"\\{", "\\}"}, {"\\langle", "\\rangle"}},
        {{"\\lvert", "\\rvert"}, {"\\lVert", "\\rVert"}},
    };
    return t;
}

LatexFormula concat_horizontal(const std::vector<LatexFormula>& units, std::string_view separator, int max_units) {
    if (units.size() < 2) throw EnhanceError("concat_horizontal: needs at least two units");
    if (units.size() > static_cast<std::size_t>(max_units))
        throw EnhanceError("concat_horizontal: more units than max_units_per_formula");
    std::string source;
    for (std::size_t i = 0; i < units.size(); ++i) {
        const LatexFormula& u = units[i];
        require_valid(u, "concat_horizontal");
        if (u.category == Category::MultiLine || u.category == Category::Table)
            throw EnhanceError("concat_horizontal: cannot inline a " + std::string(to_string(u.category)) + " unit");
        if (i > 0) {
            source += ' ';
            source += separator;
            source += ' ';
        }
        source += normalize_whitespace(u.source);
    }
    return make_formula(std::move(source), Provenance::Enhanced);
}

LatexFormula concat_horizontal(const std::vector<LatexFormula>& units, Rng& rng, int max_units) {
    std::string_view sep = kHorizontalSeparators[rng.index(std::size(kHorizontalSeparators))];
    return concat_horizontal(units, sep, max_units);
}

LatexFormula concat_vertical(const std::vector<LatexFormula>& units, std::string_view wrapper) {
    if (units.size() < 2) throw EnhanceError("concat_vertical: needs at least two units");
    bool nested_aligned = false;
    for (const LatexFormula& u : units) {
        require_valid(u, "concat_vertical");
        if (u.category == Category::Table) throw EnhanceError("concat_vertical: cannot stack a Table unit");
        nested_aligned = nested_aligned || contains_env(u, "aligned");
    }
    std::string env(nested_aligned ? "gathered" : wrapper);
    std::string source = "\\begin{" + env + "} ";
    for (std::size_t i = 0; i < units.size(); ++i) {
        if (i > 0) source += " \\\\ ";
        source += normalize_whitespace(units[i].source);
    }
    source += " \\end{" + env + "}";
    return make_formula(std::move(source), Provenance::Enhanced);
}

LatexFormula concat_vertical(const std::vector<LatexFormula>& units, Rng& rng) {
    return concat_vertical(units, kVerticalWrappers[rng.index(std::size(kVerticalWrappers))]);
}

LatexFormula substitute(const LatexFormula& formula, const SubstitutionTable& table, double p_subst, Rng& rng) {
    require_valid(formula, "substitute");
    TokenSeq tokens = formula.tokens;

    // Brackets right after \sqrt delimit its optional argument.
    std::vector<bool> frozen(tokens.size(), false);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].kind != TokenKind::Command || tokens[i].text != "\\sqrt") continue;
        std::size_t j = i + 1;
        while (j < tokens.size() && tokens[j].kind == TokenKind::Whitespace) ++j;
        if (j >= tokens.size() || tokens[j].text != "[") continue;
        frozen[j] = true;
        int depth = 0;
        for (std::size_t k = j + 1; k < tokens.size(); ++k) {
            if (tokens[k].kind == TokenKind::GroupOpen) ++depth;
            else if (tokens[k].kind == TokenKind::GroupClose) --depth;
            else if (depth == 0 && tokens[k].text == "]") {
                frozen[k] = true;
                break;
            }
        }
    }

    struct Pair {
        std::size_t open, close, cls, member;
    };
    std::vector<Pair> pairs;
    {
        struct Open {
            std::size_t pos, cls, member;
        };
        std::vector<Open> stack;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (frozen[i] || (tokens[i].kind != TokenKind::Symbol && tokens[i].kind != TokenKind::Command)) continue;
            for (std::size_t c = 0; c < table.bracket_classes.size(); ++c) {
                const auto& cls = table.bracket_classes[c];
                for (std::size_t m = 0; m < cls.size(); ++m) {
                    if (tokens[i].text == cls[m].first) {
                        stack.push_back({i, c, m});
                    } else if (tokens[i].text == cls[m].second && !stack.empty() &&
                               stack.back().cls == c && stack.back().member == m) {
                        pairs.push_back({stack.back().pos, i, c, m});
                        stack.pop_back();
                    }
                }
            }
        }
        std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.open < b.open; });
    }

    bool changed = false;
    std::size_t next_pair = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (next_pair < pairs.size() && pairs[next_pair].open == i) {
            const Pair& p = pairs[next_pair++];
            const auto& cls = table.bracket_classes[p.cls];
            if (cls.size() < 2 || !rng.bernoulli(p_subst)) continue;
            std::size_t pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cls.size()) - 2));
            if (pick >= p.member) ++pick;
            tokens[p.open] = lexeme_token(cls[pick].first);
            tokens[p.close] = lexeme_token(cls[pick].second);
            changed = true;
            continue;
        }
        if (frozen[i] || (tokens[i].kind != TokenKind::Symbol && tokens[i].kind != TokenKind::Command)) continue;
        for (const auto& cls : table.operator_classes) {
            auto it = std::find(cls.begin(), cls.end(), tokens[i].text);
            if (it == cls.end()) continue;
            if (cls.size() >= 2 && rng.bernoulli(p_subst)) {
                std::size_t member = static_cast<std::size_t>(it - cls.begin());
                std::size_t pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cls.size()) - 2));
                if (pick >= member) ++pick;
                tokens[i] = lexeme_token(cls[pick]);
                changed = true;
            }
            break;
        }
    }
    if (!changed) return formula;
    LatexFormula out = make_formula(detokenize(tokens), Provenance::Enhanced);
    return out;
}

LatexFormula inject_text(const LatexFormula& formula, const std::vector<std::string>& words, InjectPosition position) {
    require_valid(formula, "inject_text");
    if (words.empty()) throw EnhanceError("inject_text: empty word list");
    std::string group = "\\text{";
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i > 0) group += ' ';
        group += words[i];
    }
    group += '}';

    std::string body = normalize_whitespace(formula.source);
    switch (position) {
        case InjectPosition::Prefix: return make_formula(group + "\\; " + body, Provenance::Enhanced);
        case InjectPosition::Suffix: return make_formula(body + "\\; " + group, Provenance::Enhanced);
        case InjectPosition::Between: break;
    }
    // After the first top-level separator; falls back to suffix.
    int depth = 0;
    for (std::size_t i = 0; i < formula.tokens.size(); ++i) {
        const Token& t = formula.tokens[i];
        if (t.kind == TokenKind::GroupOpen || t.kind == TokenKind::EnvBegin) ++depth;
        else if (t.kind == TokenKind::GroupClose || t.kind == TokenKind::EnvEnd) --depth;
        else if (depth == 0 && t.kind == TokenKind::Command &&
                 (t.text == "\\quad" || t.text == "\\qquad" || t.text == "\\;")) {
            std::span<const Token> all(formula.tokens);
            std::string head = normalize_whitespace(detokenize(all.first(i + 1)));
            std::string tail = normalize_whitespace(detokenize(all.subspan(i + 1)));
            return make_formula(head + " " + group + "\\; " + tail, Provenance::Enhanced);
        }
    }
    return make_formula(body + "\\; " + group, Provenance::Enhanced);
}

LatexFormula inject_text(const LatexFormula& formula, const std::vector<std::string>& lexicon, Rng& rng) {
    if (lexicon.empty()) throw EnhanceError("inject_text: empty lexicon");
    std::size_t k = static_cast<std::size_t>(rng.uniform_int(1, 6));
    std::vector<std::string> words;
    for (std::size_t i = 0; i < k; ++i) words.push_back(pick(rng, lexicon));

    bool has_separator = false;
    int depth = 0;
    for (const Token& t : formula.tokens) {
        if (t.kind == TokenKind::GroupOpen || t.kind == TokenKind::EnvBegin) ++depth;
        else if (t.kind == TokenKind::GroupClose || t.kind == TokenKind::EnvEnd) --depth;
        else if (depth == 0 && t.kind == TokenKind::Command &&
                 (t.text == "\\quad" || t.text == "\\qquad" || t.text == "\\;"))
            has_separator = true;
    }
    auto choice = rng.uniform_int(0, has_separator ? 2 : 1);
    auto position = choice == 0 ? InjectPosition::Prefix : choice == 1 ? InjectPosition::Suffix : InjectPosition::Between;
    return inject_text(formula, words, position);
}

LatexFormula gen_short_formula(Rng& rng) {
    static const std::vector<std::string> bases = [] {
        std::vector<std::string> v = latin_letters(true, true);
        v.insert(v.end(), kGreekLower.begin(), kGreekLower.end());
        v.insert(v.end(), kGreekUpper.begin(), kGreekUpper.end());
        v.insert(v.end(), kMiscSymbols.begin(), kMiscSymbols.end());
        return v;
    }();
    static const std::vector<std::string> scripts = [] {
        std::vector<std::string> v = latin_letters(true, false);
        for (char c = '0'; c <= '9'; ++c) v.emplace_back(1, c);
        v.insert(v.end(), {"\\alpha", "\\beta", "\\mu", "\\nu", "\\infty", "\\prime"});
        return v;
    }();
    static const std::vector<std::string> capitals = latin_letters(false, true);
    static const std::vector<std::string> lower = latin_letters(true, false);

    std::string source;
    const double form = rng.uniform01();
    if (form < 0.30) {
        source = pick(rng, bases);
    } else if (form < 0.50) {
        source = pick(rng, kAccents) + "{" + pick(rng, bases) + "}";
    } else if (form < 0.68) {
        source = pick(rng, bases) + "_" + pick(rng, scripts);
    } else if (form < 0.83) {
        source = pick(rng, bases) + "^" + pick(rng, scripts);
    } else if (form < 0.93) {
        source = pick(rng, bases) + "(" + pick(rng, lower) + ")";
    } else {
        source = pick(rng, kLetterFonts) + "{" + pick(rng, capitals) + "}";
    }
    // Letter commands need a separator before a following letter.
    LatexFormula f = make_formula(detokenize(tokenize(source)), Provenance::Generated);
    return f;
}

std::vector<std::string> sanitize_lexicon(const std::vector<std::string>& entries) {
    static constexpr std::string_view kDrop = "\\{}$&#^_%~";
    std::vector<std::string> out;
    for (const std::string& e : entries) {
        std::string clean;
        for (char c : e)
            if (kDrop.find(c) == std::string_view::npos) clean += c;
        clean = normalize_whitespace(clean);
        if (!clean.empty()) out.push_back(std::move(clean));
    }
    return out;
}

std::vector<std::string> load_lexicon(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw EnhanceError("cannot read lexicon " + path.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return sanitize_lexicon(lines);
}

Enhancer::Enhancer(std::vector<LatexFormula> units, EnhanceConfig config, SubstitutionTable table)
    : units_(std::move(units)), config_(std::move(config)), table_(std::move(table)) {
    config_.check();
    for (std::size_t i = 0; i < units_.size(); ++i) {
        Category c = units_[i].category;
        if (c != Category::Table) vertical_ok_.push_back(i);
        if (c != Category::Table && c != Category::MultiLine) inline_ok_.push_back(i);
    }
}

LatexFormula Enhancer::candidate(std::size_t base, Rng& rng) const {
    const LatexFormula& unit = units_.at(base);
    if (unit.category == Category::Table) return unit;

    LatexFormula f = unit;
    const int max_units = config_.max_units_per_formula;
    const bool can_inline = unit.category != Category::MultiLine && !inline_ok_.empty();
    if (max_units >= 2 && can_inline && rng.bernoulli(config_.p_hcat)) {
        std::vector<LatexFormula> parts{unit};
        auto k = rng.uniform_int(2, max_units);
        for (std::int64_t j = 1; j < k; ++j) parts.push_back(units_[inline_ok_[rng.index(inline_ok_.size())]]);
        f = concat_horizontal(parts, rng, max_units);
    } else if (max_units >= 2 && !vertical_ok_.empty() && rng.bernoulli(config_.p_vcat)) {
        std::vector<LatexFormula> parts{unit};
        auto k = rng.uniform_int(2, max_units);
        for (std::int64_t j = 1; j < k; ++j) parts.push_back(units_[vertical_ok_[rng.index(vertical_ok_.size())]]);
        f = concat_vertical(parts, rng);
    }

    f = substitute(f, table_, config_.p_subst, rng);

    if (!config_.lexicons.empty() && rng.bernoulli(config_.p_text_inject)) {
        auto it = config_.lexicons.begin();
        std::advance(it, static_cast<std::ptrdiff_t>(rng.index(config_.lexicons.size())));
        if (!it->second.empty()) f = inject_text(f, it->second, rng);
    }
    if (f.source != unit.source) f.provenance = Provenance::Enhanced;
    return f;
}

}  // namespace texforge
