#include "texforge/metrics.hpp"

#include "texforge/curate.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <bit>
#include <fstream>
#include <sstream>
#include <thread>

namespace texforge {

namespace {

using Word = std::uint64_t;

int words_for(int bits) { return (bits + 63) / 64; }

int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// Dilation without clipping: the result grows by `radius` on every side.
BinaryImage dilate_padded(const BinaryImage& img, int radius) {
    if (radius == 0) return img;
    BinaryImage padded(img.width + 2 * radius, img.height + 2 * radius);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) padded.at(x + radius, y + radius) = img.at(x, y);
    return dilate(padded, radius);
}

// A mask whose top-left corner sits at (ox, oy) on the background when the
// shift is zero. Rows shifted horizontally by dx are packed lazily.
class ShiftedMask {
public:
    ShiftedMask(const BinaryImage& mask, int ox, int oy, int bg_width, int min_dx, int max_dx)
        : ox_(ox), oy_(oy), h_(mask.height), bg_width_(bg_width), bg_words_(words_for(bg_width)),
          src_words_(words_for(mask.width)), min_dx_(min_dx),
          src_(static_cast<std::size_t>(mask.height) * src_words_, 0),
          by_dx_(static_cast<std::size_t>(max_dx - min_dx + 1)) {
        for (int y = 0; y < mask.height; ++y)
            for (int x = 0; x < mask.width; ++x)
                if (mask.at(x, y)) src_[static_cast<std::size_t>(y) * src_words_ + x / 64] |= Word{1} << (x % 64);
    }

    int oy() const { return oy_; }
    int height() const { return h_; }

    const std::vector<Word>& rows(int dx) {
        auto& slot = by_dx_[static_cast<std::size_t>(dx - min_dx_)];
        if (slot.empty()) {
            slot.assign(static_cast<std::size_t>(h_) * bg_words_, 0);
            const int shift = ox_ + dx;
            for (int y = 0; y < h_; ++y) {
                const Word* src = &src_[static_cast<std::size_t>(y) * src_words_];
                Word* dst = &slot[static_cast<std::size_t>(y) * bg_words_];
                for (int i = 0; i < src_words_; ++i) {
                    const Word v = src[i];
                    if (!v) continue;
                    const int base = i * 64 + shift;
                    const int q = floor_div(base, 64);
                    const int b = base - q * 64;
                    if (q >= 0 && q < bg_words_) dst[q] |= v << b;
                    if (b > 0 && q + 1 >= 0 && q + 1 < bg_words_) dst[q + 1] |= v >> (64 - b);
                }
            }
        }
        return slot;
    }

    int bg_words() const { return bg_words_; }

private:
    int ox_, oy_, h_, bg_width_, bg_words_, src_words_, min_dx_;
    std::vector<Word> src_;
    std::vector<std::vector<Word>> by_dx_;
};

struct Background {
    int width = 0, height = 0, words = 0;
    std::vector<Word> rows;
};

std::uint64_t and_count(ShiftedMask& m, int dx, int dy, const Background& bg) {
    const auto& rows = m.rows(dx);
    const int start = m.oy() + dy;
    const int r0 = std::max(0, -start);
    const int r1 = std::min(m.height(), bg.height - start);
    const int words = bg.words;
    std::uint64_t total = 0;
    for (int r = r0; r < r1; ++r) {
        const Word* a = &rows[static_cast<std::size_t>(r) * words];
        const Word* b = &bg.rows[static_cast<std::size_t>(start + r) * words];
        for (int k = 0; k < words; ++k) total += static_cast<std::uint64_t>(std::popcount(a[k] & b[k]));
    }
    return total;
}

// inter_a / uni_a > inter_b / uni_b, both unions positive.
bool better(std::uint64_t inter_a, std::uint64_t uni_a, std::uint64_t inter_b, std::uint64_t uni_b) {
    return static_cast<unsigned __int128>(inter_a) * uni_b > static_cast<unsigned __int128>(inter_b) * uni_a;
}

class EpmrSearch {
public:
    EpmrSearch(const BinaryImage& pred, const BinaryImage& ref, const EpmrConfig& cfg)
        : cfg_(cfg), pred_(pred), pred_count_(pred.count()), ref_count_(ref.count()) {
        const int o = cfg.offset;
        bg_.width = std::max(pred.width, ref.width) + 2 * o;
        bg_.height = std::max(pred.height, ref.height) + 2 * o;
        bg_.words = words_for(bg_.width);
        bg_.rows.assign(static_cast<std::size_t>(bg_.height) * bg_.words, 0);
        const int rx = (bg_.width - ref.width) / 2, ry = (bg_.height - ref.height) / 2;
        for (int y = 0; y < ref.height; ++y)
            for (int x = 0; x < ref.width; ++x)
                if (ref.at(x, y))
                    bg_.rows[static_cast<std::size_t>(ry + y) * bg_.words + (rx + x) / 64] |= Word{1} << ((rx + x) % 64);
        px_ = (bg_.width - pred.width) / 2;
        py_ = (bg_.height - pred.height) / 2;
        plain_.emplace(pred, px_, py_, bg_.width, -o, o);
        const int d = cfg.dil_size;
        dilated_.emplace(dilate_padded(pred, d), px_ - d, py_ - d, bg_.width, -o, o);
    }

    EpmrDetail exact() {
        EpmrDetail best;
        const int o = cfg_.offset;
        for (int dx = -o; dx <= o; ++dx)
            for (int dy = -o; dy <= o; ++dy) consider(best, dx, dy);
        return finish(best);
    }

    EpmrDetail coarse_to_fine() {
        constexpr int kStride = 4;
        constexpr int kRadius = 2;  // every shift in a block is within 2 of its center
        constexpr int kRefine = 3;
        const int o = cfg_.offset;

        struct Block {
            int x0, x1, y0, y1, cx, cy;
        };
        std::vector<std::pair<int, int>> spans;  // inclusive [lo, hi] per axis
        for (int a = -o; a <= o; a += kStride) spans.emplace_back(a, std::min(a + kStride - 1, o));
        std::vector<Block> blocks;
        for (auto [x0, x1] : spans)
            for (auto [y0, y1] : spans) blocks.push_back({x0, x1, y0, y1, x0 + (x1 - x0) / 2, y0 + (y1 - y0) / 2});

        EpmrDetail best;
        for (const auto& b : blocks) consider(best, b.cx, b.cy);
        const int bx = best.dx, by = best.dy;
        for (int dx = std::max(-o, bx - kRefine); dx <= std::min(o, bx + kRefine); ++dx)
            for (int dy = std::max(-o, by - kRefine); dy <= std::min(o, by + kRefine); ++dy) consider(best, dx, dy);

        // Certify: any block whose bound could beat the best is searched fully.
        const int d = cfg_.dil_size;
        ShiftedMask grown_dilated(dilate_padded(pred_, d + kRadius), px_ - d - kRadius, py_ - d - kRadius, bg_.width,
                                  -o, o);
        ShiftedMask grown(dilate_padded(pred_, kRadius), px_ - kRadius, py_ - kRadius, bg_.width, -o, o);
        struct Bound {
            std::uint64_t inter, uni;
            std::size_t block;
        };
        std::vector<Bound> bounds;
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const auto& b = blocks[i];
            const std::uint64_t inter_ub = and_count(grown_dilated, b.cx, b.cy, bg_);
            const std::uint64_t overlap_ub = and_count(grown, b.cx, b.cy, bg_);
            std::uint64_t uni_lb = std::max<std::uint64_t>(pred_count_, ref_count_);
            if (pred_count_ + ref_count_ > overlap_ub) uni_lb = std::max(uni_lb, pred_count_ + ref_count_ - overlap_ub);
            if (uni_lb == 0 || inter_ub == 0) continue;
            bounds.push_back({std::min(inter_ub, uni_lb), uni_lb, i});
        }
        std::sort(bounds.begin(), bounds.end(), [](const Bound& a, const Bound& b) {
            if (better(a.inter, a.uni, b.inter, b.uni)) return true;
            if (better(b.inter, b.uni, a.inter, a.uni)) return false;
            return a.block < b.block;
        });
        for (const auto& bd : bounds) {
            if (best.uni > 0 && !better(bd.inter, bd.uni, best.inter, best.uni)) break;
            const auto& b = blocks[bd.block];
            for (int dx = b.x0; dx <= b.x1; ++dx)
                for (int dy = b.y0; dy <= b.y1; ++dy) consider(best, dx, dy);
        }
        return finish(best);
    }

private:
    void consider(EpmrDetail& best, int dx, int dy) {
        ++evaluations_;
        const std::uint64_t inter = and_count(*dilated_, dx, dy, bg_);
        const std::uint64_t overlap = and_count(*plain_, dx, dy, bg_);
        const std::uint64_t uni = pred_count_ + ref_count_ - overlap;
        if (uni == 0) return;
        if (best.uni == 0 || better(inter, uni, best.inter, best.uni)) {
            best.inter = inter;
            best.uni = uni;
            best.dx = dx;
            best.dy = dy;
        }
    }

    EpmrDetail finish(EpmrDetail best) const {
        best.score = best.uni == 0 ? 0.0 : 100.0 * static_cast<double>(best.inter) / static_cast<double>(best.uni);
        best.evaluations = evaluations_;
        return best;
    }

    EpmrConfig cfg_;
    const BinaryImage& pred_;
    std::uint64_t pred_count_, ref_count_;
    Background bg_;
    int px_ = 0, py_ = 0;
    std::optional<ShiftedMask> plain_, dilated_;
    std::size_t evaluations_ = 0;
};

std::string style_normalized(const std::string& tex) { return detokenize(normalize_style(tokenize(tex))); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace

void EpmrConfig::check() const {
    if (offset < 0) throw std::invalid_argument("metrics.offset must be >= 0");
    if (dil_size < 0) throw std::invalid_argument("metrics.dil_size must be >= 0");
    if (binarize_threshold < 0 || binarize_threshold > 255)
        throw std::invalid_argument("metrics.binarize_threshold must lie in [0, 255]");
}

BinaryImage binarize(const GrayImage& img, int threshold) {
    BinaryImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) out.mask[i] = img.pixels[i] < threshold ? 1 : 0;
    return out;
}

BinaryImage dilate(const BinaryImage& img, int radius) {
    if (radius < 0) throw std::invalid_argument("dilate: radius must be >= 0");
    if (radius == 0) return img;
    const int w = img.width, h = img.height;
    BinaryImage tmp(w, h), out(w, h);
    for (int y = 0; y < h; ++y) {
        // running count of set pixels in the horizontal window
        int run = 0;
        for (int x = 0; x <= std::min(radius - 1, w - 1); ++x) run += img.at(x, y);
        for (int x = 0; x < w; ++x) {
            if (x + radius < w) run += img.at(x + radius, y);
            if (x - radius - 1 >= 0) run -= img.at(x - radius - 1, y);
            tmp.at(x, y) = run > 0;
        }
    }
    for (int x = 0; x < w; ++x) {
        int run = 0;
        for (int y = 0; y <= std::min(radius - 1, h - 1); ++y) run += tmp.at(x, y);
        for (int y = 0; y < h; ++y) {
            if (y + radius < h) run += tmp.at(x, y + radius);
            if (y - radius - 1 >= 0) run -= tmp.at(x, y - radius - 1);
            out.at(x, y) = run > 0;
        }
    }
    return out;
}

EpmrDetail epmr_detail(const BinaryImage& pred, const BinaryImage& ref, const EpmrConfig& cfg) {
    cfg.check();
    if (pred.count() == 0 || ref.count() == 0) return {};
    EpmrSearch search(pred, ref, cfg);
    return cfg.coarse_to_fine ? search.coarse_to_fine() : search.exact();
}

double epmr_masks(const BinaryImage& pred, const BinaryImage& ref, const EpmrConfig& cfg) {
    return epmr_detail(pred, ref, cfg).score;
}

double epmr_images(const GrayImage& pred, const GrayImage& ref, const EpmrConfig& cfg) {
    return epmr_masks(binarize(pred, cfg.binarize_threshold), binarize(ref, cfg.binarize_threshold), cfg);
}

double epmr(const std::string& pred_tex, const std::string& ref_tex, const EpmrConfig& cfg,
            const RenderProfile& profile) {
    if (!profile.renderer) throw std::invalid_argument("epmr: render profile has no renderer");
    const RenderSpec ref_spec{ref_tex, profile.font_id, profile.dpi, profile.timeout_ms};
    const RenderOutcome ref = profile.renderer->render_cached(ref_spec);
    if (!ref.ok())
        throw ReferenceRenderError(std::string("reference failed to render (") + to_string(ref.failure().kind) +
                                   "): " + ref.failure().detail);
    const RenderOutcome pred =
        profile.renderer->render_cached(RenderSpec{pred_tex, profile.font_id, profile.dpi, profile.timeout_ms});
    if (!pred.ok()) return 0.0;
    return epmr_images(pred.image(), ref.image(), cfg);
}

double ep_at_n(std::span<const double> scores, double n) {
    if (n < 0) throw std::invalid_argument("ep_at_n: n must be >= 0");
    if (scores.empty()) return 0.0;
    const auto hits = std::count_if(scores.begin(), scores.end(), [&](double s) { return s >= 100.0 - n; });
    return 100.0 * static_cast<double>(hits) / static_cast<double>(scores.size());
}

bool exprate(std::span<const Token> pred, std::span<const Token> ref, std::size_t max_edits) {
    return edit_distance(significant(pred), significant(ref), max_edits).has_value();
}

EvalAggregates aggregate(std::span<const ScorePair> samples) {
    EvalAggregates a;
    a.count = samples.size();
    // Samples with an unusable reference carry no score.
    std::size_t failed = 0, exact = 0, le1 = 0, le2 = 0;
    double sum = 0.0;
    std::vector<double> scores;
    scores.reserve(samples.size());
    for (const auto& s : samples) {
        if (!s.error.empty()) {
            ++a.errors;
            continue;
        }
        failed += s.render_failed;
        exact += s.exprate_exact;
        le1 += s.exprate_le1;
        le2 += s.exprate_le2;
        sum += s.epmr;
        scores.push_back(s.epmr);
    }
    if (scores.empty()) return a;
    const double n = static_cast<double>(scores.size());
    a.fr = 100.0 * static_cast<double>(failed) / n;
    a.mean_epmr = sum / n;
    a.ep0 = ep_at_n(scores, 0);
    a.exprate = 100.0 * static_cast<double>(exact) / n;
    a.exprate_le1 = 100.0 * static_cast<double>(le1) / n;
    a.exprate_le2 = 100.0 * static_cast<double>(le2) / n;
    return a;
}

EvalReport evaluate_set(const std::vector<EvalPair>& pairs, const EvalConfig& cfg, const Renderer& renderer) {
    cfg.epmr.check();
    if (cfg.workers < 1) throw std::invalid_argument("evaluate_set: workers must be >= 1");
    EvalReport report;
    report.per_sample.resize(pairs.size());

    auto score_one = [&](const EvalPair& p) {
        ScorePair s;
        s.id = p.id;
        const std::string pred = cfg.normalize ? style_normalized(p.pred) : p.pred;
        const std::string ref = cfg.normalize ? style_normalized(p.ref) : p.ref;
        const TokenSeq pt = tokenize(pred), rt = tokenize(ref);
        if (auto d = edit_distance(significant(pt), significant(rt), 2)) {
            s.exprate_exact = *d == 0;
            s.exprate_le1 = *d <= 1;
            s.exprate_le2 = true;
        }
        try {
            const RenderOutcome po = renderer.render_cached(RenderSpec{pred, cfg.font_id, cfg.dpi, cfg.timeout_ms});
            s.render_failed = !po.ok();
            const RenderOutcome ro = renderer.render_cached(RenderSpec{ref, cfg.font_id, cfg.dpi, cfg.timeout_ms});
            if (!ro.ok()) {
                s.error = std::string("reference failed to render (") + to_string(ro.failure().kind) + ")";
            } else if (po.ok()) {
                s.epmr = epmr_images(po.image(), ro.image(), cfg.epmr);
            }
        } catch (const std::exception& e) {
            s.error = e.what();
            s.epmr = 0.0;
        }
        return s;
    };

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < pairs.size();) report.per_sample[i] = score_one(pairs[i]);
    };
    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), pairs.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    report.aggregates = aggregate(report.per_sample);
    return report;
}

std::vector<EvalPair> read_pairs_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open pairs file " + path.string());
    std::vector<EvalPair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (normalize_whitespace(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("pred") || !j.contains("ref") || !j["pred"].is_string() ||
            !j["ref"].is_string())
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": expected an object with string fields pred and ref");
        EvalPair p;
        if (j.contains("id")) p.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
        else p.id = std::to_string(line_no);
        p.pred = j["pred"].get<std::string>();
        p.ref = j["ref"].get<std::string>();
        pairs.push_back(std::move(p));
    }
    return pairs;
}

std::string report_json(const EvalReport& report) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& s : report.per_sample) {
        nlohmann::json row = {{"id", s.id},
                              {"epmr", s.epmr},
                              {"render_failed", s.render_failed},
                              {"exprate", s.exprate_exact},
                              {"exprate_le1", s.exprate_le1},
                              {"exprate_le2", s.exprate_le2}};
        if (!s.error.empty()) row["error"] = s.error;
        per.push_back(std::move(row));
    }
    const auto& a = report.aggregates;
    nlohmann::json agg = {{"count", a.count},         {"errors", a.errors},
                          {"FR", a.fr},               {"EPMR", a.mean_epmr},
                          {"EP@0", a.ep0},            {"ExpRate", a.exprate},
                          {"ExpRate<=1", a.exprate_le1}, {"ExpRate<=2", a.exprate_le2}};
    return nlohmann::json{{"per_sample", per}, {"aggregates", agg}}.dump(2) + "\n";
}

std::string report_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "id,epmr,render_failed,exprate,exprate_le1,exprate_le2,error\n";
    for (const auto& s : report.per_sample)
        out << csv_field(s.id) << ',' << s.epmr << ',' << s.render_failed << ',' << s.exprate_exact << ','
            << s.exprate_le1 << ',' << s.exprate_le2 << ',' << csv_field(s.error) << '\n';
    return out.str();
}

}  // namespace texforge
