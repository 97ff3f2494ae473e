#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace texforge {

enum class TokenKind {
    Command,
    Symbol,
    GroupOpen,
    GroupClose,
    EnvBegin,
    EnvEnd,
    Alignment,
    LineBreak,
    Text,
    Whitespace,
};

struct Token {
    TokenKind kind = TokenKind::Symbol;
    std::string text;

    friend bool operator==(const Token&, const Token&) = default;
};

using TokenSeq = std::vector<Token>;

enum class Category { SingleLine, MultiLine, Symbol, TextHybrid, Matrix, Table };
enum class Provenance { Extracted, Enhanced, Generated };

inline constexpr Category kAllCategories[] = {
    Category::SingleLine, Category::MultiLine, Category::Symbol,
    Category::TextHybrid, Category::Matrix,    Category::Table,
};

struct LatexFormula {
    std::string source;
    TokenSeq tokens;
    Category category = Category::SingleLine;
    std::size_t char_length = 0;
    std::size_t token_length = 0;
    Provenance provenance = Provenance::Extracted;
};

struct SyntaxError {
    enum class Kind { UnbalancedBraces, EnvironmentMismatch, DanglingCommand, EmptyInput };
    Kind kind;
    std::size_t position;  // index into the validated token sequence
};

const char* to_string(TokenKind k);
const char* to_string(Category c);
const char* to_string(Provenance p);
const char* to_string(SyntaxError::Kind k);
std::optional<Category> category_from_string(std::string_view s);
std::optional<Provenance> provenance_from_string(std::string_view s);

// Lexes a LaTeX math string. Runs of whitespace become a single Whitespace
// token " "; \begin{name} / \end{name} are single EnvBegin/EnvEnd lexemes;
// the braced argument of a text-mode command (\text, \mbox, ...) is kept as
// one Text token. Never fails: anything unrecognised is a Symbol.
TokenSeq tokenize(std::string_view source);

// Inverse of tokenize up to whitespace collapsing. A space is inserted after
// a letter command when the next lexeme begins with a letter, so sequences
// produced by editing tokens still re-lex to the same tokens.
std::string detokenize(std::span<const Token> tokens);

// Tokens with Whitespace removed; the unit of comparison for edit distance.
TokenSeq significant(std::span<const Token> tokens);

// First syntax error in token order, or nullopt when the sequence is
// structurally sound.
std::optional<SyntaxError> validate(std::span<const Token> tokens);

// Priority: Table > Matrix > MultiLine > TextHybrid > Symbol > SingleLine.
Category classify(std::span<const Token> tokens);

// Drops bold/italic/spacing decorations. Idempotent.
TokenSeq normalize_style(std::span<const Token> tokens);

// True iff some n-gram (1 <= n <= 8) of significant tokens repeats
// back-to-back more than max_repeats times.
bool detect_repetition(std::span<const Token> tokens, int max_repeats);

// Collapses whitespace runs to one space and trims both ends.
std::string normalize_whitespace(std::string_view s);
std::size_t utf8_length(std::string_view s);

LatexFormula make_formula(std::string source, Provenance provenance = Provenance::Extracted);

// Commands that take a mandatory argument and how many.
int command_arity(std::string_view command);
bool is_text_command(std::string_view command);
bool is_operator_token(const Token& t);
// Environment name of an EnvBegin/EnvEnd lexeme ("\begin{pmatrix}" -> "pmatrix").
std::string env_name(const Token& t);

}  // namespace texforge
