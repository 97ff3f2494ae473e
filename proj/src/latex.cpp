#include "texforge/latex.hpp"

#include <algorithm>
#include <array>
#include <unordered_map>
#include <unordered_set>

namespace texforge {

namespace {

bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Byte length of the UTF-8 sequence starting with lead byte c.
std::size_t utf8_width(unsigned char c) {
    if (c < 0x80) return 1;
    if ((c >> 5) == 0x6) return 2;
    if ((c >> 4) == 0xE) return 3;
    if ((c >> 3) == 0x1E) return 4;
    return 1;
}

std::size_t codepoint_end(std::string_view s, std::size_t i) {
    return std::min(s.size(), i + utf8_width(static_cast<unsigned char>(s[i])));
}

const std::unordered_set<std::string_view> kTextCommands = {
    "\\text", "\\mbox", "\\textrm", "\\textbf", "\\textit", "\\texttt",
    "\\textsf", "\\textup", "\\textnormal", "\\hbox",
};

const std::unordered_map<std::string_view, int> kArity = {
    {"\\frac", 2},      {"\\dfrac", 2},      {"\\tfrac", 2},       {"\\cfrac", 2},
    {"\\binom", 2},     {"\\dbinom", 2},     {"\\tbinom", 2},      {"\\overset", 2},
    {"\\underset", 2},  {"\\stackrel", 2},   {"\\sqrt", 1},        {"\\hat", 1},
    {"\\tilde", 1},     {"\\bar", 1},        {"\\vec", 1},         {"\\dot", 1},
    {"\\ddot", 1},      {"\\breve", 1},      {"\\check", 1},       {"\\acute", 1},
    {"\\grave", 1},     {"\\mathring", 1},   {"\\widehat", 1},     {"\\widetilde", 1},
    {"\\overline", 1},  {"\\underline", 1},  {"\\overbrace", 1},   {"\\underbrace", 1},
    {"\\overrightarrow", 1}, {"\\overleftarrow", 1}, {"\\mathbf", 1}, {"\\mathrm", 1},
    {"\\mathit", 1},    {"\\mathcal", 1},    {"\\mathbb", 1},      {"\\mathfrak", 1},
    {"\\mathsf", 1},    {"\\mathtt", 1},     {"\\mathscr", 1},     {"\\boldsymbol", 1},
    {"\\bm", 1},        {"\\operatorname", 1}, {"\\pmod", 1},      {"\\substack", 1},
    {"\\hspace", 1},    {"\\vspace", 1},     {"\\phantom", 1},     {"\\boxed", 1},
    {"\\text", 1},      {"\\mbox", 1},       {"\\textrm", 1},      {"\\textbf", 1},
    {"\\textit", 1},    {"\\texttt", 1},     {"\\textsf", 1},      {"\\textup", 1},
    {"\\textnormal", 1}, {"\\hbox", 1},
};

const std::unordered_set<std::string_view> kOperatorSymbols = {"+", "-", "=", "<", ">", "*", "/"};

const std::unordered_set<std::string_view> kOperatorCommands = {
    "\\times", "\\cdot", "\\div", "\\pm", "\\mp", "\\le", "\\leq", "\\ge", "\\geq",
    "\\ne", "\\neq", "\\approx", "\\equiv", "\\sim", "\\simeq", "\\cong", "\\propto",
    "\\in", "\\notin", "\\ni", "\\subset", "\\subseteq", "\\supset", "\\supseteq",
    "\\cup", "\\cap", "\\to", "\\rightarrow", "\\leftarrow", "\\Rightarrow",
    "\\Leftarrow", "\\leftrightarrow", "\\Leftrightarrow", "\\mapsto", "\\ll", "\\gg",
    "\\prec", "\\succ", "\\preceq", "\\succeq", "\\ast", "\\oplus", "\\otimes",
    "\\wedge", "\\vee", "\\setminus", "\\circ", "\\bullet", "\\star", "\\mid",
    "\\parallel", "\\perp", "\\land", "\\lor", "\\implies", "\\iff", "\\coloneqq",
    "\\leqslant", "\\geqslant", "\\lesssim", "\\gtrsim",
};

const std::unordered_set<std::string_view> kMatrixEnvs = {
    "matrix", "pmatrix", "bmatrix", "Bmatrix", "vmatrix", "Vmatrix", "smallmatrix", "cases",
};
const std::unordered_set<std::string_view> kMultiLineEnvs = {
    "aligned", "align", "align*", "alignedat", "gathered", "gather", "gather*",
    "split", "multline", "multline*", "eqnarray", "eqnarray*",
};

bool is_letter_command(const Token& t) {
    return t.kind == TokenKind::Command && t.text.size() >= 2 && is_ascii_alpha(t.text[1]);
}

std::size_t next_significant(std::span<const Token> tokens, std::size_t i) {
    while (i < tokens.size() && tokens[i].kind == TokenKind::Whitespace) ++i;
    return i;
}

// Index one past the group opened at `open`, or tokens.size() if unclosed.
std::size_t skip_group(std::span<const Token> tokens, std::size_t open) {
    int depth = 0;
    for (std::size_t i = open; i < tokens.size(); ++i) {
        if (tokens[i].kind == TokenKind::GroupOpen) ++depth;
        else if (tokens[i].kind == TokenKind::GroupClose && --depth == 0) return i + 1;
    }
    return tokens.size();
}

// Consumes one macro argument starting at i. Returns the index after it, or
// nullopt when no argument is available. An unclosed group still counts as an
// argument; the balance check reports it.
std::optional<std::size_t> take_argument(std::span<const Token> tokens, std::size_t i) {
    i = next_significant(tokens, i);
    if (i >= tokens.size()) return std::nullopt;
    const Token& t = tokens[i];
    switch (t.kind) {
        case TokenKind::GroupOpen: return skip_group(tokens, i);
        case TokenKind::Symbol:
            if (t.text == "^" || t.text == "_") return std::nullopt;
            return i + 1;
        case TokenKind::Command:
        case TokenKind::Text: return i + 1;
        default: return std::nullopt;
    }
}

// Skips a bracketed optional argument ("[n]") if present.
std::size_t skip_optional(std::span<const Token> tokens, std::size_t i) {
    std::size_t j = next_significant(tokens, i);
    if (j >= tokens.size() || tokens[j].kind != TokenKind::Symbol || tokens[j].text != "[") return i;
    int depth = 0;
    for (std::size_t k = j + 1; k < tokens.size(); ++k) {
        const Token& t = tokens[k];
        if (t.kind == TokenKind::GroupOpen) ++depth;
        else if (t.kind == TokenKind::GroupClose) --depth;
        else if (depth == 0 && t.kind == TokenKind::Symbol && t.text == "]") return k + 1;
    }
    return i;
}

bool count_words_at_least(std::string_view text, int n) {
    int words = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        bool alpha = false;
        while (i < text.size() && !is_space(text[i])) {
            auto c = static_cast<unsigned char>(text[i]);
            if (is_ascii_alpha(text[i]) || c >= 0x80) alpha = true;
            ++i;
        }
        if (alpha && ++words >= n) return true;
    }
    return false;
}

}  // namespace

const char* to_string(TokenKind k) {
    switch (k) {
        case TokenKind::Command: return "Command";
        case TokenKind::Symbol: return "Symbol";
        case TokenKind::GroupOpen: return "GroupOpen";
        case TokenKind::GroupClose: return "GroupClose";
        case TokenKind::EnvBegin: return "EnvBegin";
        case TokenKind::EnvEnd: return "EnvEnd";
        case TokenKind::Alignment: return "Alignment";
        case TokenKind::LineBreak: return "LineBreak";
        case TokenKind::Text: return "Text";
        case TokenKind::Whitespace: return "Whitespace";
    }
    return "?";
}

const char* to_string(Category c) {
    switch (c) {
        case Category::SingleLine: return "SingleLine";
        case Category::MultiLine: return "MultiLine";
        case Category::Symbol: return "Symbol";
        case Category::TextHybrid: return "TextHybrid";
        case Category::Matrix: return "Matrix";
        case Category::Table: return "Table";
    }
    return "?";
}

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::Extracted: return "Extracted";
        case Provenance::Enhanced: return "Enhanced";
        case Provenance::Generated: return "Generated";
    }
    return "?";
}

const char* to_string(SyntaxError::Kind k) {
    switch (k) {
        case SyntaxError::Kind::UnbalancedBraces: return "UnbalancedBraces";
        case SyntaxError::Kind::EnvironmentMismatch: return "EnvironmentMismatch";
        case SyntaxError::Kind::DanglingCommand: return "DanglingCommand";
        case SyntaxError::Kind::EmptyInput: return "EmptyInput";
    }
    return "?";
}

std::optional<Category> category_from_string(std::string_view s) {
    for (Category c : kAllCategories)
        if (s == to_string(c)) return c;
    return std::nullopt;
}

std::optional<Provenance> provenance_from_string(std::string_view s) {
    for (Provenance p : {Provenance::Extracted, Provenance::Enhanced, Provenance::Generated})
        if (s == to_string(p)) return p;
    return std::nullopt;
}

int command_arity(std::string_view command) {
    auto it = kArity.find(command);
    return it == kArity.end() ? 0 : it->second;
}

bool is_text_command(std::string_view command) { return kTextCommands.contains(command); }

bool is_operator_token(const Token& t) {
    if (t.kind == TokenKind::Symbol) return kOperatorSymbols.contains(t.text);
    if (t.kind == TokenKind::Command) return kOperatorCommands.contains(t.text);
    return false;
}

std::string env_name(const Token& t) {
    auto open = t.text.find('{');
    auto close = t.text.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close <= open) return {};
    return t.text.substr(open + 1, close - open - 1);
}

TokenSeq tokenize(std::string_view s) {
    TokenSeq out;
    std::size_t i = 0;
    const std::size_t n = s.size();
    while (i < n) {
        const char c = s[i];
        if (is_space(c)) {
            while (i < n && is_space(s[i])) ++i;
            out.push_back({TokenKind::Whitespace, " "});
            continue;
        }
        if (c == '\\') {
            if (i + 1 >= n) {
                out.push_back({TokenKind::Symbol, "\\"});
                ++i;
                continue;
            }
            const char next = s[i + 1];
            if (next == '\\') {
                out.push_back({TokenKind::LineBreak, "\\\\"});
                i += 2;
                continue;
            }
            if (!is_ascii_alpha(next)) {
                std::size_t end = codepoint_end(s, i + 1);
                out.push_back({TokenKind::Command, std::string(s.substr(i, end - i))});
                i = end;
                continue;
            }
            std::size_t j = i + 1;
            while (j < n && is_ascii_alpha(s[j])) ++j;
            std::string_view name = s.substr(i, j - i);
            if ((name == "\\begin" || name == "\\end") && j < n && s[j] == '{') {
                std::size_t k = j + 1;
                while (k < n && (is_ascii_alpha(s[k]) || s[k] == '*')) ++k;
                if (k < n && s[k] == '}' && k > j + 1) {
                    out.push_back({name == "\\begin" ? TokenKind::EnvBegin : TokenKind::EnvEnd,
                                   std::string(s.substr(i, k + 1 - i))});
                    i = k + 1;
                    continue;
                }
            }
            out.push_back({TokenKind::Command, std::string(name)});
            i = j;
            if (is_text_command(name) && i < n && s[i] == '{') {
                // Keep the text argument verbatim as one token.
                int depth = 0;
                std::size_t k = i;
                for (; k < n; ++k) {
                    if (s[k] == '\\' && k + 1 < n) {
                        ++k;
                        continue;
                    }
                    if (s[k] == '{') ++depth;
                    else if (s[k] == '}' && --depth == 0) break;
                }
                if (k < n) {
                    out.push_back({TokenKind::GroupOpen, "{"});
                    // Runs collapse to one space; edge spaces are visible in text mode.
                    std::string body;
                    for (char ch : s.substr(i + 1, k - i - 1)) {
                        if (is_space(ch)) {
                            if (body.empty() || body.back() != ' ') body += ' ';
                        } else {
                            body += ch;
                        }
                    }
                    if (!body.empty()) out.push_back({TokenKind::Text, std::move(body)});
                    out.push_back({TokenKind::GroupClose, "}"});
                    i = k + 1;
                }
            }
            continue;
        }
        if (c == '{') {
            out.push_back({TokenKind::GroupOpen, "{"});
            ++i;
        } else if (c == '}') {
            out.push_back({TokenKind::GroupClose, "}"});
            ++i;
        } else if (c == '&') {
            out.push_back({TokenKind::Alignment, "&"});
            ++i;
        } else {
            std::size_t end = codepoint_end(s, i);
            out.push_back({TokenKind::Symbol, std::string(s.substr(i, end - i))});
            i = end;
        }
    }
    return out;
}

std::string detokenize(std::span<const Token> tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const Token& t = tokens[i];
        if (i > 0 && is_letter_command(tokens[i - 1]) && !t.text.empty() && is_ascii_alpha(t.text[0]))
            out += ' ';
        out += t.text;
    }
    return out;
}

TokenSeq significant(std::span<const Token> tokens) {
    TokenSeq out;
    out.reserve(tokens.size());
    for (const Token& t : tokens)
        if (t.kind != TokenKind::Whitespace) out.push_back(t);
    return out;
}

std::optional<SyntaxError> validate(std::span<const Token> tokens) {
    using Kind = SyntaxError::Kind;
    if (next_significant(tokens, 0) >= tokens.size()) return SyntaxError{Kind::EmptyInput, 0};

    enum class Frame { Group, Env, Left };
    struct Open {
        Frame frame;
        std::size_t position;
        std::string name;
    };
    std::vector<Open> stack;
    std::optional<SyntaxError> structural;
    std::optional<SyntaxError> dangling;

    auto note_dangling = [&](std::size_t pos) {
        if (!dangling) dangling = SyntaxError{Kind::DanglingCommand, pos};
    };

    for (std::size_t i = 0; i < tokens.size() && !structural; ++i) {
        const Token& t = tokens[i];
        switch (t.kind) {
            case TokenKind::GroupOpen: stack.push_back({Frame::Group, i, {}}); break;
            case TokenKind::GroupClose:
                if (stack.empty() || stack.back().frame != Frame::Group)
                    structural = SyntaxError{Kind::UnbalancedBraces,
                                             stack.empty() || stack.back().frame == Frame::Env
                                                 ? i
                                                 : stack.back().position};
                else
                    stack.pop_back();
                break;
            case TokenKind::EnvBegin: stack.push_back({Frame::Env, i, env_name(t)}); break;
            case TokenKind::EnvEnd:
                if (stack.empty()) {
                    structural = SyntaxError{Kind::EnvironmentMismatch, i};
                } else if (stack.back().frame != Frame::Env) {
                    structural = SyntaxError{Kind::UnbalancedBraces, stack.back().position};
                } else if (stack.back().name != env_name(t)) {
                    structural = SyntaxError{Kind::EnvironmentMismatch, i};
                } else {
                    stack.pop_back();
                }
                break;
            case TokenKind::Symbol:
                if ((t.text == "^" || t.text == "_") && !take_argument(tokens, i + 1)) note_dangling(i);
                break;
            case TokenKind::Command: {
                if (t.text == "\\left" || t.text == "\\right") {
                    std::size_t d = next_significant(tokens, i + 1);
                    bool has_delim = d < tokens.size() && (tokens[d].kind == TokenKind::Symbol ||
                                                           tokens[d].kind == TokenKind::Command);
                    if (!has_delim) {
                        note_dangling(i);
                    } else if (t.text == "\\left") {
                        stack.push_back({Frame::Left, i, {}});
                    } else if (stack.empty() || stack.back().frame != Frame::Left) {
                        structural = SyntaxError{Kind::UnbalancedBraces,
                                                 stack.empty() || stack.back().frame == Frame::Env
                                                     ? i
                                                     : stack.back().position};
                    } else {
                        stack.pop_back();
                    }
                    break;
                }
                if (t.text == "\\begin" || t.text == "\\end") {
                    note_dangling(i);
                    break;
                }
                int arity = command_arity(t.text);
                std::size_t j = i + 1;
                if (t.text == "\\sqrt") j = skip_optional(tokens, j);
                for (int a = 0; a < arity; ++a) {
                    auto next = take_argument(tokens, j);
                    if (!next) {
                        note_dangling(i);
                        break;
                    }
                    j = *next;
                }
                break;
            }
            default: break;
        }
    }

    std::optional<SyntaxError> result = structural;
    if (!structural && !stack.empty()) {
        const Open& first = stack.front();
        result = SyntaxError{first.frame == Frame::Env ? Kind::EnvironmentMismatch : Kind::UnbalancedBraces,
                             first.position};
    }
    if (dangling && (!result || dangling->position < result->position)) result = dangling;
    return result;
}

Category classify(std::span<const Token> tokens) {
    bool table = false, matrix = false, multiline = false, text_hybrid = false;
    bool has_operator = false;
    std::size_t sig = 0;

    struct EnvState {
        std::string name;
        bool hline = false;
        bool line_break = false;
    };
    std::vector<EnvState> envs;

    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const Token& t = tokens[i];
        if (t.kind != TokenKind::Whitespace) ++sig;
        if (is_operator_token(t)) has_operator = true;
        switch (t.kind) {
            case TokenKind::EnvBegin: {
                std::string name = env_name(t);
                if (name == "tabular" || name == "tabular*") table = true;
                if (kMatrixEnvs.contains(name)) matrix = true;
                if (kMultiLineEnvs.contains(name)) multiline = true;
                envs.push_back({std::move(name)});
                break;
            }
            case TokenKind::EnvEnd:
                if (!envs.empty()) {
                    const EnvState& e = envs.back();
                    if (e.name == "array") {
                        if (e.hline) table = true;
                        else if (e.line_break) matrix = true;
                    }
                    envs.pop_back();
                }
                break;
            case TokenKind::LineBreak:
                if (envs.empty()) multiline = true;
                else envs.back().line_break = true;
                break;
            case TokenKind::Command:
                if (t.text == "\\hline" && !envs.empty()) envs.back().hline = true;
                if (t.text == "\\text" || t.text == "\\mbox" || t.text == "\\textrm") {
                    std::size_t j = next_significant(tokens, i + 1);
                    if (j + 1 < tokens.size() && tokens[j].kind == TokenKind::GroupOpen &&
                        tokens[j + 1].kind == TokenKind::Text && count_words_at_least(tokens[j + 1].text, 2))
                        text_hybrid = true;
                }
                break;
            default: break;
        }
    }
    // Unterminated arrays (invalid input) still count by their contents.
    for (const EnvState& e : envs) {
        if (e.name == "array") {
            if (e.hline) table = true;
            else if (e.line_break) matrix = true;
        }
    }

    if (table) return Category::Table;
    if (matrix) return Category::Matrix;
    if (multiline) return Category::MultiLine;
    if (text_hybrid) return Category::TextHybrid;
    if (sig <= 4 && !has_operator) return Category::Symbol;
    return Category::SingleLine;
}

TokenSeq normalize_style(std::span<const Token> tokens) {
    static const std::unordered_set<std::string_view> kUnwrap = {"\\mathbf", "\\boldsymbol", "\\mathit", "\\bm"};
    static const std::unordered_set<std::string_view> kDrop = {
        "\\bf", "\\it", "\\displaystyle", "\\!", "\\,", "\\;", "\\:", "\\quad", "\\qquad",
    };

    TokenSeq out;
    auto push = [&out](const Token& t) {
        if (t.kind == TokenKind::Whitespace &&
            (out.empty() || out.back().kind == TokenKind::Whitespace))
            return;
        out.push_back(t);
    };

    std::size_t i = 0;
    while (i < tokens.size()) {
        const Token& t = tokens[i];
        if (t.kind == TokenKind::Command && kDrop.contains(t.text)) {
            ++i;
            continue;
        }
        bool unwrap = t.kind == TokenKind::Command && kUnwrap.contains(t.text);
        bool mathrm = t.kind == TokenKind::Command && t.text == "\\mathrm";
        if (unwrap || mathrm) {
            std::size_t a = next_significant(tokens, i + 1);
            if (a < tokens.size() && tokens[a].kind == TokenKind::GroupOpen) {
                std::size_t end = skip_group(tokens, a);
                if (end <= tokens.size() && end > a + 1 && tokens[end - 1].kind == TokenKind::GroupClose) {
                    TokenSeq inner = normalize_style(tokens.subspan(a + 1, end - a - 2));
                    TokenSeq inner_sig = significant(inner);
                    bool single = inner_sig.size() == 1;
                    bool single_letter = single && inner_sig[0].kind == TokenKind::Symbol &&
                                         inner_sig[0].text.size() == 1 && is_ascii_alpha(inner_sig[0].text[0]);
                    if (unwrap || single_letter) {
                        if (single) {
                            push(inner_sig[0]);
                        } else {
                            out.push_back({TokenKind::GroupOpen, "{"});
                            for (const Token& x : inner) push(x);
                            if (out.back().kind == TokenKind::Whitespace) out.pop_back();
                            out.push_back({TokenKind::GroupClose, "}"});
                        }
                        i = end;
                        continue;
                    }
                }
            } else if (unwrap && a < tokens.size() && tokens[a].kind == TokenKind::Command &&
                       (kUnwrap.contains(tokens[a].text) || kDrop.contains(tokens[a].text) || tokens[a].text == "\\mathrm")) {
                i = a;
                continue;
            } else if (unwrap && a < tokens.size() &&
                       (tokens[a].kind == TokenKind::Symbol || tokens[a].kind == TokenKind::Command)) {
                push(tokens[a]);
                i = a + 1;
                continue;
            }
        }
        push(t);
        ++i;
    }
    while (!out.empty() && out.back().kind == TokenKind::Whitespace) out.pop_back();
    if (!out.empty() && out.front().kind == TokenKind::Whitespace) out.erase(out.begin());
    return out;
}

bool detect_repetition(std::span<const Token> tokens, int max_repeats) {
    TokenSeq s = significant(tokens);
    const std::size_t len = s.size();
    for (std::size_t n = 1; n <= 8 && n < len; ++n) {
        // A block repeated r times back-to-back is a run of (r-1)*n positions
        // where s[i] == s[i+n].
        std::size_t run = 0;
        for (std::size_t i = 0; i + n < len; ++i) {
            run = s[i] == s[i + n] ? run + 1 : 0;
            if (static_cast<long long>(1 + run / n) > max_repeats) return true;
        }
    }
    return false;
}

std::string normalize_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending = false;
    for (char c : s) {
        if (is_space(c)) {
            pending = !out.empty();
            continue;
        }
        if (pending) out += ' ';
        pending = false;
        out += c;
    }
    return out;
}

std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (char c : s)
        if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
    return n;
}

LatexFormula make_formula(std::string source, Provenance provenance) {
    LatexFormula f;
    f.tokens = tokenize(source);
    f.category = classify(f.tokens);
    f.char_length = utf8_length(normalize_whitespace(source));
    f.token_length = significant(f.tokens).size();
    f.provenance = provenance;
    f.source = std::move(source);
    return f;
}

}  // namespace texforge
