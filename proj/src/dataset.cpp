#include "texforge/dataset.hpp"

#include "texforge/hash.hpp"
#include "texforge/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

namespace texforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kHistogramStep = 50;
constexpr std::size_t kHistogramTop = 1000;

int resolve_workers(int workers) {
    if (workers > 0) return workers;
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = n;
            }
        }
    };
    const auto threads = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw BuildError("cannot write " + path.string());
}

std::string truncate(std::string s, std::size_t n) {
    if (s.size() > n) s.resize(n);
    return s;
}

bool has_reason(const DropRecord& d, DropReason r) {
    return std::find(d.reasons.begin(), d.reasons.end(), r) != d.reasons.end();
}

// Largest total T (<= upper) whose short share round(f*T) and remainder both
// fit in what survived the filters.
std::pair<std::size_t, std::size_t> assemble_quota(std::size_t avail_short, std::size_t avail_other, double fraction,
                                                   std::size_t upper) {
    for (std::size_t total = upper; total > 0; --total) {
        const auto shorts = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
        if (shorts <= avail_short && total - shorts <= avail_other) return {shorts, total - shorts};
    }
    return {0, 0};
}

struct Candidate {
    LatexFormula formula;
    std::uint64_t seed = 0;
    int font_id = 0;
    bool generated = false;
};

}  // namespace

void CurateConfig::check() const {
    dedup.check();
    if (!(min_aspect > 0.0 && min_aspect <= max_aspect))
        throw std::invalid_argument("curate aspect bounds must satisfy 0 < min_aspect <= max_aspect");
    if (boundary_margin < 0) throw std::invalid_argument("curate.boundary_margin must be >= 0");
    if (!(center_tol >= 0.0 && center_tol <= 0.5)) throw std::invalid_argument("curate.center_tol must lie in [0, 0.5]");
    if (max_repeats < 1) throw std::invalid_argument("curate.max_repeats must be >= 1");
}

void BuildConfig::check() const {
    if (!(oversample >= 1.0)) throw std::invalid_argument("build.oversample must be >= 1");
    if (workers < 0) throw std::invalid_argument("build.workers must be >= 0");
    if (snippet_min_words < 1 || snippet_min_words > snippet_max_words)
        throw std::invalid_argument("build snippet word bounds must satisfy 1 <= min <= max");
}

std::string HistogramBucket::label() const {
    return hi ? std::to_string(lo) + "-" + std::to_string(*hi) : std::to_string(lo) + "+";
}

std::vector<HistogramBucket> length_histogram(const std::vector<DatasetRecord>& records) {
    std::vector<HistogramBucket> buckets;
    for (std::size_t lo = 0; lo < kHistogramTop; lo += kHistogramStep) buckets.push_back({lo, lo + kHistogramStep, 0});
    buckets.push_back({kHistogramTop, std::nullopt, 0});
    for (const auto& r : records) {
        const std::size_t i = std::min(r.char_length / kHistogramStep, buckets.size() - 1);
        ++buckets[i].count;
    }
    return buckets;
}

BuildStats compute_stats(const std::vector<DatasetRecord>& records, const std::vector<DropRecord>& drops) {
    BuildStats s;
    for (Category c : kAllCategories) s.per_category[c] = {};
    std::map<Category, std::size_t> length_sum;
    for (const auto& r : records) {
        auto& cs = s.per_category[r.category];
        ++cs.count;
        ++cs.render_attempts;
        length_sum[r.category] += r.char_length;
    }
    for (const auto& d : drops) {
        for (DropReason reason : d.reasons) ++s.drop_reasons[to_string(reason)];
        if (has_reason(d, DropReason::Duplicate) || has_reason(d, DropReason::Repetition)) continue;
        auto& cs = s.per_category[d.category];
        ++cs.render_attempts;
        if (has_reason(d, DropReason::RenderFail)) ++cs.render_failures;
    }
    s.total_kept = records.size();
    s.total_dropped = drops.size();
    for (auto& [c, cs] : s.per_category) {
        if (s.total_kept) cs.proportion = 100.0 * static_cast<double>(cs.count) / static_cast<double>(s.total_kept);
        if (cs.render_attempts)
            cs.render_fail_rate =
                100.0 * static_cast<double>(cs.render_failures) / static_cast<double>(cs.render_attempts);
        if (cs.count) cs.avg_char_length = static_cast<double>(length_sum[c]) / static_cast<double>(cs.count);
    }
    s.length_histogram = length_histogram(records);
    return s;
}

std::string record_id(const std::string& latex, int font_id, std::uint64_t seed) {
    std::string material = latex;
    material += '\0';
    material += std::to_string(font_id);
    material += '\0';
    material += std::to_string(seed);
    return sha256_hex(material).substr(0, 20);
}

std::string record_to_json(const DatasetRecord& r) {
    json j = {{"id", r.id},
              {"latex", r.latex},
              {"category", to_string(r.category)},
              {"char_length", r.char_length},
              {"token_length", r.token_length},
              {"image_path", r.image_path},
              {"font_id", r.font_id},
              {"seed", r.seed},
              {"provenance", to_string(r.provenance)},
              {"augment_applied", r.augment_applied}};
    return j.dump();
}

DatasetRecord record_from_json(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw BuildError(std::string("malformed manifest line: ") + e.what());
    }
    try {
        DatasetRecord r;
        r.id = j.at("id").get<std::string>();
        r.latex = j.at("latex").get<std::string>();
        const auto cat = category_from_string(j.at("category").get<std::string>());
        if (!cat) throw BuildError("unknown category in record " + r.id);
        r.category = *cat;
        r.char_length = j.at("char_length").get<std::size_t>();
        r.token_length = j.at("token_length").get<std::size_t>();
        r.image_path = j.value("image_path", std::string{});
        r.font_id = j.value("font_id", 0);
        r.seed = j.value("seed", std::uint64_t{0});
        const auto prov = provenance_from_string(j.value("provenance", std::string("Extracted")));
        if (!prov) throw BuildError("unknown provenance in record " + r.id);
        r.provenance = *prov;
        r.augment_applied = j.value("augment_applied", std::vector<std::string>{});
        return r;
    } catch (const json::exception& e) {
        throw BuildError(std::string("invalid manifest record: ") + e.what());
    }
}

std::vector<DatasetRecord> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw BuildError("cannot open manifest " + path.string());
    std::vector<DatasetRecord> out;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (normalize_whitespace(line).empty()) continue;
        try {
            out.push_back(record_from_json(line));
        } catch (const BuildError& e) {
            throw BuildError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

void write_manifest(const fs::path& path, std::vector<DatasetRecord> records) {
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < records.size(); ++i)
        if (records[i].id == records[i - 1].id) throw BuildError("manifest id collision: " + records[i].id);
    std::string text;
    for (const auto& r : records) text += record_to_json(r) + "\n";
    write_text(path, text);
}

std::vector<DropRecord> read_drops(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw BuildError("cannot open drop log " + path.string());
    std::vector<DropRecord> out;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (normalize_whitespace(line).empty()) continue;
        try {
            const json j = json::parse(line);
            DropRecord d;
            d.candidate = j.at("candidate").get<std::size_t>();
            d.latex = j.at("latex").get<std::string>();
            d.category = category_from_string(j.at("category").get<std::string>()).value();
            d.provenance = provenance_from_string(j.at("provenance").get<std::string>()).value();
            d.char_length = j.value("char_length", std::size_t{0});
            for (const auto& r : j.at("reasons")) d.reasons.push_back(drop_reason_from_string(r.get<std::string>()).value());
            d.detail = j.value("detail", std::string{});
            out.push_back(std::move(d));
        } catch (const std::exception& e) {
            throw BuildError(path.string() + ":" + std::to_string(n) + ": invalid drop record: " + e.what());
        }
    }
    return out;
}

void write_drops(const fs::path& path, const std::vector<DropRecord>& drops) {
    std::string text;
    for (const auto& d : drops) {
        json reasons = json::array();
        for (DropReason r : d.reasons) reasons.push_back(to_string(r));
        json j = {{"candidate", d.candidate},
                  {"latex", d.latex},
                  {"category", to_string(d.category)},
                  {"provenance", to_string(d.provenance)},
                  {"char_length", d.char_length},
                  {"reasons", reasons}};
        if (!d.detail.empty()) j["detail"] = d.detail;
        text += j.dump() + "\n";
    }
    write_text(path, text);
}

std::string stats_json(const BuildStats& stats) {
    json cats = json::object();
    for (const auto& [c, cs] : stats.per_category)
        cats[to_string(c)] = {{"count", cs.count},
                              {"proportion", cs.proportion},
                              {"render_attempts", cs.render_attempts},
                              {"render_failures", cs.render_failures},
                              {"render_fail_rate", cs.render_fail_rate},
                              {"avg_char_length", cs.avg_char_length}};
    json hist = json::array();
    for (const auto& b : stats.length_histogram) {
        json row = {{"bucket", b.label()}, {"lo", b.lo}, {"count", b.count}};
        row["hi"] = b.hi ? json(*b.hi) : json(nullptr);
        hist.push_back(std::move(row));
    }
    json j = {{"categories", cats},
              {"total_kept", stats.total_kept},
              {"total_dropped", stats.total_dropped},
              {"drop_reasons", stats.drop_reasons},
              {"length_histogram", hist}};
    return j.dump(2) + "\n";
}

std::string stats_table(const BuildStats& stats) {
    std::ostringstream out;
    char buf[64];
    out << "Category          ";
    for (Category c : kAllCategories) {
        std::snprintf(buf, sizeof buf, "%12s", to_string(c));
        out << buf;
    }
    out << '\n';
    auto row = [&](const char* name, auto value) {
        std::snprintf(buf, sizeof buf, "%-18s", name);
        out << buf;
        for (Category c : kAllCategories) {
            std::snprintf(buf, sizeof buf, "%12.2f", value(stats.per_category.at(c)));
            out << buf;
        }
        out << '\n';
    };
    row("Proportion (%)", [](const CategoryStats& s) { return s.proportion; });
    row("Render fail (%)", [](const CategoryStats& s) { return s.render_fail_rate; });
    row("Average length", [](const CategoryStats& s) { return s.avg_char_length; });
    out << "kept " << stats.total_kept << ", dropped " << stats.total_dropped << '\n';
    return out.str();
}

std::string histogram_csv(const std::vector<HistogramBucket>& buckets) {
    std::string out = "bucket,count\n";
    for (const auto& b : buckets) out += b.label() + "," + std::to_string(b.count) + "\n";
    return out;
}

std::string stratum_of(const DatasetRecord& r) {
    if (r.char_length >= kComplexCharLength) return "Complex";
    switch (r.category) {
        case Category::Symbol: return "Symbol";
        case Category::Matrix:
        case Category::Table: return "Matrix";
        case Category::TextHybrid: return "TextHybrid";
        case Category::SingleLine:
        case Category::MultiLine: return "Ordinary";
    }
    return "Ordinary";
}

Stratification stratify_benchmark(const std::vector<DatasetRecord>& records,
                                  const std::map<std::string, std::size_t>& sizes, std::uint64_t seed) {
    for (const auto& [name, size] : sizes)
        if (std::find_if(std::begin(kStrata), std::end(kStrata), [&](const char* s) { return name == s; }) ==
            std::end(kStrata))
            throw std::invalid_argument("unknown stratum '" + name + "'");

    std::vector<const DatasetRecord*> sorted;
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });

    std::map<std::string, std::vector<DatasetRecord>> pools;
    for (const char* s : kStrata) pools[s];
    for (const auto* r : sorted) pools[stratum_of(*r)].push_back(*r);

    Stratification out;
    for (auto& [name, pool] : pools) {
        auto it = sizes.find(name);
        const std::size_t want = it == sizes.end() ? 0 : it->second;
        if (want > pool.size())
            out.warnings.push_back("stratum " + name + " has " + std::to_string(pool.size()) + " records, " +
                                   std::to_string(want) + " requested");
        if (want > 0 && want < pool.size()) {
            Rng rng(derive_seed(seed, name));
            for (std::size_t i = 0; i < want; ++i) std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
            pool.resize(want);
            std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
        }
        out.subsets[name] = std::move(pool);
    }
    return out;
}

BuildResult build(const fs::path& corpus_dir, const fs::path& out_dir, const PipelineConfig& cfg,
                  const ProgressFn& progress) {
    cfg.enhance.check();
    cfg.augment.check();
    cfg.curate.check();
    cfg.build.check();
    const int workers = resolve_workers(cfg.build.workers);
    const std::uint64_t seed = cfg.build.seed;
    auto note = [&](const std::string& msg) {
        if (progress) progress(msg);
    };

    if (!fs::is_directory(corpus_dir)) throw BuildError("corpus directory not found: " + corpus_dir.string());
    const Renderer renderer(cfg.renderer);
    if (!renderer.probe(cfg.renderer.dpi, cfg.renderer.timeout_ms))
        throw BuildError("renderer '" + cfg.renderer.command + "' failed to render a probe formula");

    BuildResult result;

    // Extract.
    const auto docs = load_corpus(corpus_dir);
    std::vector<LatexFormula> units;
    std::vector<std::string> prose_words;
    std::unordered_set<std::string> seen_words;
    for (const auto& doc : docs) {
        auto ex = extract_units(doc);
        for (auto& u : ex.units) units.push_back(std::move(u.formula));
        for (auto& d : ex.drops) result.extract_drops.push_back(std::move(d));
        if (cfg.build.harvest_text) {
            for (const auto& snippet :
                 harvest_text_snippets(doc, cfg.build.snippet_min_words, cfg.build.snippet_max_words)) {
                std::istringstream words(snippet);
                for (std::string w; words >> w;) {
                    const bool wordlike = std::any_of(w.begin(), w.end(), [](unsigned char ch) {
                        return std::isalpha(ch) || ch >= 0x80;
                    });
                    if (wordlike && seen_words.insert(w).second) prose_words.push_back(w);
                }
            }
        }
    }
    result.units = units.size();
    note("extracted " + std::to_string(units.size()) + " units from " + std::to_string(docs.size()) + " documents");

    // Enhance.
    EnhanceConfig enhance = cfg.enhance;
    if (!prose_words.empty() && !enhance.lexicons.count("corpus")) enhance.lexicons["corpus"] = sanitize_lexicon(prose_words);
    const double f = enhance.short_formula_fraction;
    std::size_t other_target = 0, short_target = 0;
    if (cfg.build.size > 0) {
        short_target = static_cast<std::size_t>(std::llround(f * static_cast<double>(cfg.build.size)));
        other_target = units.empty() ? 0 : cfg.build.size - short_target;
    } else {
        other_target = units.size();
        short_target = f < 1.0 ? static_cast<std::size_t>(std::llround(f / (1.0 - f) * static_cast<double>(other_target))) : 0;
    }

    std::vector<Candidate> candidates;
    if (!units.empty() && other_target > 0) {
        const std::size_t count =
            cfg.build.size > 0 ? static_cast<std::size_t>(std::ceil(static_cast<double>(other_target) * cfg.build.oversample))
                               : units.size();
        const Enhancer enhancer(units, enhance, cfg.substitutions);
        candidates.resize(count);
        parallel_for(count, workers, [&](std::size_t k) {
            Rng rng(derive_seed(seed, "enhance", k));
            candidates[k].formula = enhancer.candidate(k % units.size(), rng);
        });
    }
    if (short_target > 0) {
        const auto want = static_cast<std::size_t>(std::ceil(static_cast<double>(short_target) * cfg.build.oversample));
        std::unordered_set<std::string> seen;
        for (std::size_t k = 0; seen.size() < want && k < 50 * want + 100; ++k) {
            Rng rng(derive_seed(seed, "short", k));
            LatexFormula g = gen_short_formula(rng);
            if (!seen.insert(g.source).second) continue;
            Candidate c;
            c.formula = std::move(g);
            c.generated = true;
            candidates.push_back(std::move(c));
        }
    }
    const int n_fonts = static_cast<int>(renderer.fonts().size());
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        auto& c = candidates[k];
        c.seed = derive_seed(seed, c.formula.source);
        c.font_id = cfg.build.round_robin_fonts ? static_cast<int>(k % static_cast<std::size_t>(n_fonts))
                                                : static_cast<int>(Rng(derive_seed(c.seed, "font", 0)).index(
                                                      static_cast<std::size_t>(n_fonts)));
    }
    result.candidates = candidates.size();
    note("generated " + std::to_string(candidates.size()) + " candidates");

    std::vector<DropRecord> drops;
    auto drop = [&](std::size_t k, std::vector<DropReason> reasons, std::string detail = {}) {
        const auto& fm = candidates[k].formula;
        drops.push_back({k, fm.source, fm.category, fm.provenance, fm.char_length, std::move(reasons),
                         truncate(std::move(detail), 300)});
    };

    // Dedup.
    std::vector<LatexFormula> formulas;
    formulas.reserve(candidates.size());
    for (const auto& c : candidates) formulas.push_back(c.formula);
    const DedupResult dd = dedup(formulas, cfg.curate.dedup);
    for (auto [k, of] : dd.duplicate_of) drop(k, {DropReason::Duplicate}, "duplicate of candidate " + std::to_string(of));
    note("dedup kept " + std::to_string(dd.kept.size()) + " of " + std::to_string(candidates.size()));

    // Repetition filter.
    std::vector<std::size_t> to_render;
    for (std::size_t k : dd.kept) {
        if (detect_repetition(candidates[k].formula.tokens, cfg.curate.max_repeats)) drop(k, {DropReason::Repetition});
        else to_render.push_back(k);
    }

    // Render.
    std::vector<RenderSpec> specs;
    for (std::size_t k : to_render)
        specs.push_back({candidates[k].formula.source, candidates[k].font_id, cfg.renderer.dpi, cfg.renderer.timeout_ms});
    note("rendering " + std::to_string(specs.size()) + " formulas");
    BatchRenderResult rendered = renderer.batch_render(specs, workers);

    // Image filters.
    std::vector<std::size_t> passed_short, passed_other;
    std::map<std::size_t, std::size_t> outcome_of;  // candidate -> index in rendered
    for (std::size_t i = 0; i < to_render.size(); ++i) {
        const std::size_t k = to_render[i];
        const RenderOutcome& o = rendered.outcomes[i];
        if (!o.ok()) {
            drop(k, {DropReason::RenderFail}, std::string(to_string(o.failure().kind)) + ": " + o.failure().detail);
            continue;
        }
        std::vector<DropReason> reasons;
        if (auto r = check_aspect_ratio(o.image(), cfg.curate.min_aspect, cfg.curate.max_aspect)) reasons.push_back(*r);
        for (DropReason r : check_bounds_and_centering(o.image(), cfg.curate.boundary_margin, cfg.curate.center_tol))
            reasons.push_back(r);
        if (!reasons.empty()) {
            drop(k, std::move(reasons));
            continue;
        }
        outcome_of[k] = i;
        (candidates[k].generated ? passed_short : passed_other).push_back(k);
    }

    // Quota assembly at the configured short-formula share.
    const std::size_t upper = cfg.build.size > 0 ? cfg.build.size : passed_short.size() + passed_other.size();
    const auto [n_short, n_other] = assemble_quota(passed_short.size(), passed_other.size(), f, upper);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < passed_short.size(); ++i)
        (i < n_short ? keep.push_back(passed_short[i]) : drop(passed_short[i], {DropReason::Surplus}));
    for (std::size_t i = 0; i < passed_other.size(); ++i)
        (i < n_other ? keep.push_back(passed_other[i]) : drop(passed_other[i], {DropReason::Surplus}));
    std::sort(keep.begin(), keep.end());
    note("assembled " + std::to_string(keep.size()) + " records (" + std::to_string(n_short) + " short)");

    // Augment and write.
    fs::create_directories(out_dir / "images");
    std::vector<DatasetRecord> records(keep.size());
    parallel_for(keep.size(), workers, [&](std::size_t i) {
        const std::size_t k = keep[i];
        const Candidate& c = candidates[k];
        DatasetRecord& r = records[i];
        r.latex = c.formula.source;
        r.category = c.formula.category;
        r.char_length = c.formula.char_length;
        r.token_length = c.formula.token_length;
        r.font_id = c.font_id;
        r.seed = c.seed;
        r.provenance = c.formula.provenance;
        r.id = record_id(r.latex, r.font_id, r.seed);
        r.image_path = "images/" + r.id + ".png";
        Rng rng(derive_seed(c.seed, "augment", 0));
        AugmentResult aug = augment(rendered.outcomes[outcome_of.at(k)].image(), cfg.augment, rng);
        r.augment_applied = std::move(aug.applied);
        write_png(out_dir / r.image_path, aug.image);
    });

    std::sort(drops.begin(), drops.end(), [](const auto& a, const auto& b) { return a.candidate < b.candidate; });
    result.stats = compute_stats(records, drops);
    write_manifest(out_dir / "manifest.jsonl", records);
    write_drops(out_dir / "drops.jsonl", drops);
    {
        std::string text;
        for (const auto& d : result.extract_drops)
            text += json{{"doc_id", d.doc_id}, {"span", {d.span_begin, d.span_end}}, {"reason", d.reason}}.dump() + "\n";
        write_text(out_dir / "extract_drops.jsonl", text);
    }
    write_text(out_dir / "stats.json", stats_json(result.stats));
    write_text(out_dir / "histogram.csv", histogram_csv(result.stats.length_histogram));

    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    result.manifest = std::move(records);
    result.drops = std::move(drops);
    if (result.manifest.size() + result.drops.size() != result.candidates)
        throw BuildError("internal error: record conservation violated");
    note("wrote " + std::to_string(result.manifest.size()) + " records to " + out_dir.string());
    return result;
}

}  // namespace texforge
