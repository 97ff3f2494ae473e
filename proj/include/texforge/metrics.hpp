#pragma once

#include "texforge/image.hpp"
#include "texforge/latex.hpp"
#include "texforge/render.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace texforge {

struct EpmrConfig {
    int offset = 20;
    int dil_size = 2;
    int binarize_threshold = 128;
    // Stride-4 search, then exhaustive refinement of every block whose upper
    // bound could still beat the best score. Same result as the full grid.
    bool coarse_to_fine = false;
    void check() const;
};

// Raised when the reference itself does not render.
class ReferenceRenderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

BinaryImage binarize(const GrayImage& img, int threshold = 128);
// Square (2r+1)^2 structuring element, clipped at the borders.
BinaryImage dilate(const BinaryImage& img, int radius);

struct EpmrDetail {
    double score = 0.0;  // 0..100
    std::uint64_t inter = 0;
    std::uint64_t uni = 0;
    int dx = 0, dy = 0;  // best pred shift
    std::size_t evaluations = 0;
};

// Both masks are pasted centered on a background of
// (max h + 2*offset) x (max w + 2*offset); every pred shift in
// [-offset, offset]^2 is scored as |dilate(shift(pred)) & ref| /
// |shift(pred) | ref| and the maximum is reported on a 0..100 scale.
// An empty union scores 0.
EpmrDetail epmr_detail(const BinaryImage& pred, const BinaryImage& ref, const EpmrConfig& cfg);
double epmr_masks(const BinaryImage& pred, const BinaryImage& ref, const EpmrConfig& cfg);
double epmr_images(const GrayImage& pred, const GrayImage& ref, const EpmrConfig& cfg);

struct RenderProfile {
    const Renderer* renderer = nullptr;
    int font_id = 0;
    int dpi = 200;
    int timeout_ms = 30000;
};

// Renders both formulas with the same profile. A pred that fails to render
// scores 0; a reference that fails throws ReferenceRenderError.
double epmr(const std::string& pred_tex, const std::string& ref_tex, const EpmrConfig& cfg,
            const RenderProfile& profile);

// Percentage of scores >= 100 - n; 0 for an empty input.
double ep_at_n(std::span<const double> scores, double n);

// Whitespace tokens are ignored; true iff the edit distance is <= max_edits.
bool exprate(std::span<const Token> pred, std::span<const Token> ref, std::size_t max_edits);

struct EvalPair {
    std::string id;
    std::string pred;
    std::string ref;
};

struct ScorePair {
    std::string id;
    double epmr = 0.0;
    bool render_failed = false;
    bool exprate_exact = false;
    bool exprate_le1 = false;
    bool exprate_le2 = false;
    std::string error;  // set when the sample could not be scored
};

struct EvalAggregates {
    std::size_t count = 0;
    std::size_t errors = 0;
    double fr = 0.0;
    double mean_epmr = 0.0;
    double ep0 = 0.0;
    double exprate = 0.0;
    double exprate_le1 = 0.0;
    double exprate_le2 = 0.0;
};

struct EvalConfig {
    EpmrConfig epmr;
    bool normalize = false;  // strip style commands before scoring
    int font_id = 0;
    int dpi = 200;
    int timeout_ms = 30000;
    int workers = 1;
};

struct EvalReport {
    std::vector<ScorePair> per_sample;
    EvalAggregates aggregates;
};

// count covers every sample; the rates cover samples without an error.
EvalAggregates aggregate(std::span<const ScorePair> samples);
EvalReport evaluate_set(const std::vector<EvalPair>& pairs, const EvalConfig& cfg, const Renderer& renderer);

std::vector<EvalPair> read_pairs_jsonl(const std::filesystem::path& path);
std::string report_json(const EvalReport& report);
std::string report_csv(const EvalReport& report);

}  // namespace texforge
