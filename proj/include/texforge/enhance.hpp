#pragma once

#include "texforge/latex.hpp"
#include "texforge/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace texforge {

class EnhanceError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct EnhanceConfig {
    double p_hcat = 0.3;
    double p_vcat = 0.15;
    double p_subst = 0.1;
    double p_text_inject = 0.1;
    int max_units_per_formula = 3;
    double short_formula_fraction = 0.20;
    std::map<std::string, std::vector<std::string>> lexicons;
    std::uint64_t seed = 0;

    // Throws EnhanceError on out-of-range values.
    void check() const;
};

// Interchangeable lexemes. Operators swap one token at a time; bracket pairs
// swap open and close together so the result stays balanced.
struct SubstitutionTable {
    std::vector<std::vector<std::string>> operator_classes;
    std::vector<std::vector<std::pair<std::string, std::string>>> bracket_classes;

    static SubstitutionTable defaults();
};

inline constexpr std::string_view kHorizontalSeparators[] = {",\\;", ",\\quad", "\\;", "\\qquad"};
inline constexpr std::string_view kVerticalWrappers[] = {"aligned", "gathered"};

LatexFormula concat_horizontal(const std::vector<LatexFormula>& units, std::string_view separator,
                               int max_units = 3);
LatexFormula concat_horizontal(const std::vector<LatexFormula>& units, Rng& rng, int max_units = 3);

// Rows joined by "\\" inside `wrapper`; units that already contain an aligned
// block are nested under gathered instead.
LatexFormula concat_vertical(const std::vector<LatexFormula>& units, std::string_view wrapper);
LatexFormula concat_vertical(const std::vector<LatexFormula>& units, Rng& rng);

LatexFormula substitute(const LatexFormula& formula, const SubstitutionTable& table, double p_subst, Rng& rng);

enum class InjectPosition { Prefix, Suffix, Between };

LatexFormula inject_text(const LatexFormula& formula, const std::vector<std::string>& words,
                         InjectPosition position);
// Draws 1-6 words with replacement and a position (between units only when
// the formula has top-level separators).
LatexFormula inject_text(const LatexFormula& formula, const std::vector<std::string>& lexicon, Rng& rng);

// A Symbol-category formula of at most four tokens.
LatexFormula gen_short_formula(Rng& rng);

// Reads a lexicon file: one entry per line, characters that would break a
// \text group stripped, blank lines skipped.
std::vector<std::string> load_lexicon(const std::filesystem::path& path);
std::vector<std::string> sanitize_lexicon(const std::vector<std::string>& entries);

// Applies the enhancement chain to unit `base` of a fixed pool.
class Enhancer {
public:
    Enhancer(std::vector<LatexFormula> units, EnhanceConfig config,
             SubstitutionTable table = SubstitutionTable::defaults());

    LatexFormula candidate(std::size_t base, Rng& rng) const;
    const std::vector<LatexFormula>& units() const { return units_; }
    const EnhanceConfig& config() const { return config_; }

private:
    std::vector<LatexFormula> units_;
    EnhanceConfig config_;
    SubstitutionTable table_;
    std::vector<std::size_t> inline_ok_;    // not MultiLine / Table
    std::vector<std::size_t> vertical_ok_;  // not Table
};

}  // namespace texforge
