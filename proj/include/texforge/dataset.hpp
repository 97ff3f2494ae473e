#pragma once

#include "texforge/augment.hpp"
#include "texforge/curate.hpp"
#include "texforge/enhance.hpp"
#include "texforge/extract.hpp"
#include "texforge/latex.hpp"
#include "texforge/render.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace texforge {

class BuildError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CurateConfig {
    DedupConfig dedup;
    double min_aspect = 0.05;
    double max_aspect = 40.0;
    int boundary_margin = 2;
    double center_tol = 0.1;
    int max_repeats = 5;
    void check() const;
};

struct BuildConfig {
    std::uint64_t seed = 0;
    // Target record count; 0 keeps one enhanced candidate per extracted unit
    // plus the matching share of short formulas.
    std::size_t size = 0;
    // Candidates generated per wanted record, to absorb drops.
    double oversample = 1.3;
    int workers = 0;  // 0 = logical cores
    // Adds a "corpus" lexicon of prose words harvested from the documents.
    bool harvest_text = true;
    int snippet_min_words = 1;
    int snippet_max_words = 6;
    bool round_robin_fonts = false;  // default: seeded-uniform per record
    void check() const;
};

struct PipelineConfig {
    RendererConfig renderer;
    EnhanceConfig enhance;
    SubstitutionTable substitutions = SubstitutionTable::defaults();
    AugmentConfig augment;
    CurateConfig curate;
    BuildConfig build;
};

struct DatasetRecord {
    std::string id;
    std::string latex;
    Category category = Category::SingleLine;
    std::size_t char_length = 0;
    std::size_t token_length = 0;
    std::string image_path;
    int font_id = 0;
    std::uint64_t seed = 0;
    Provenance provenance = Provenance::Extracted;
    std::vector<std::string> augment_applied;
};

struct DropRecord {
    std::size_t candidate = 0;  // index in candidate order
    std::string latex;
    Category category = Category::SingleLine;
    Provenance provenance = Provenance::Extracted;
    std::size_t char_length = 0;
    std::vector<DropReason> reasons;
    std::string detail;
};

struct CategoryStats {
    std::size_t count = 0;
    double proportion = 0.0;        // percent of kept records
    std::size_t render_attempts = 0;
    std::size_t render_failures = 0;
    double render_fail_rate = 0.0;  // percent of render attempts
    double avg_char_length = 0.0;
};

struct HistogramBucket {
    std::size_t lo = 0;
    std::optional<std::size_t> hi;  // exclusive; nullopt = open ended
    std::size_t count = 0;
    std::string label() const;
};

struct BuildStats {
    std::map<Category, CategoryStats> per_category;  // all six categories
    std::size_t total_kept = 0;
    std::size_t total_dropped = 0;
    std::map<std::string, std::size_t> drop_reasons;
    std::vector<HistogramBucket> length_histogram;
};

// Edges 0, 50, ..., 1000 and an open bucket above.
std::vector<HistogramBucket> length_histogram(const std::vector<DatasetRecord>& records);
// Counts over kept records; render failure rates need the drop list.
BuildStats compute_stats(const std::vector<DatasetRecord>& records, const std::vector<DropRecord>& drops = {});

struct BuildResult {
    std::vector<DatasetRecord> manifest;  // sorted by id
    std::vector<DropRecord> drops;        // sorted by candidate index
    std::vector<ExtractDrop> extract_drops;
    std::size_t units = 0;
    std::size_t candidates = 0;
    BuildStats stats;
};

using ProgressFn = std::function<void(const std::string&)>;

// extract -> enhance (+ short formulas) -> dedup -> repetition filter ->
// render -> image filters -> quota assembly -> augment -> write. Output
// files: manifest.jsonl, drops.jsonl, extract_drops.jsonl, stats.json,
// histogram.csv and images/<id>.png. Nothing is written when the renderer
// fails its probe.
BuildResult build(const std::filesystem::path& corpus_dir, const std::filesystem::path& out_dir,
                  const PipelineConfig& cfg, const ProgressFn& progress = {});

std::string record_id(const std::string& latex, int font_id, std::uint64_t seed);

std::string record_to_json(const DatasetRecord& r);
DatasetRecord record_from_json(const std::string& line);
std::vector<DatasetRecord> read_manifest(const std::filesystem::path& path);
// Sorted by id; throws BuildError on an id collision.
void write_manifest(const std::filesystem::path& path, std::vector<DatasetRecord> records);
std::vector<DropRecord> read_drops(const std::filesystem::path& path);
void write_drops(const std::filesystem::path& path, const std::vector<DropRecord>& drops);

std::string stats_json(const BuildStats& stats);
std::string stats_table(const BuildStats& stats);
std::string histogram_csv(const std::vector<HistogramBucket>& buckets);

inline constexpr std::size_t kComplexCharLength = 500;
inline constexpr const char* kStrata[] = {"Symbol", "Ordinary", "TextHybrid", "Matrix", "Complex"};

// Stratum name for one record: Complex by length first, then by category.
std::string stratum_of(const DatasetRecord& r);

struct Stratification {
    std::map<std::string, std::vector<DatasetRecord>> subsets;
    std::vector<std::string> warnings;  // strata smaller than requested
};

// Seeded-uniform sample of each stratum; a missing or zero size keeps the
// whole stratum. Each subset is sorted by id.
Stratification stratify_benchmark(const std::vector<DatasetRecord>& records,
                                  const std::map<std::string, std::size_t>& sizes, std::uint64_t seed);

}  // namespace texforge
