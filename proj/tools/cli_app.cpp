#include "cli_app.hpp"

#include "texforge/config.hpp"
#include "texforge/dataset.hpp"
#include "texforge/extract.hpp"
#include "texforge/metrics.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace texforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string config_path;
    bool json_errors = false;
    int workers = 0;
    std::string renderer;
    int dpi = 0;
    std::string cache_dir;

    std::string input;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t size = 0;
    int offset = 0;
    int dil_size = 0;
    bool normalize = false;
    bool coarse_to_fine = false;
    std::string csv;
    std::string format = "json";
    std::string drops;
    std::string sizes;
};

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    f << text;
    if (!f) throw std::runtime_error("cannot write " + path);
}

std::map<std::string, std::size_t> parse_sizes(const std::string& spec) {
    std::map<std::string, std::size_t> out;
    auto parse_count = [&](const std::string& s) {
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(s, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != s.size() || s.empty() || s[0] == '-') throw UsageError("invalid size '" + s + "' in --sizes");
        return static_cast<std::size_t>(v);
    };
    if (spec.find('=') == std::string::npos) {
        const std::size_t n = parse_count(spec);
        for (const char* s : kStrata) out[s] = n;
        return out;
    }
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, ',');) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw UsageError("expected Stratum=N in --sizes, got '" + item + "'");
        const std::string name = item.substr(0, eq);
        if (std::find_if(std::begin(kStrata), std::end(kStrata), [&](const char* s) { return name == s; }) ==
            std::end(kStrata))
            throw UsageError("unknown stratum '" + name + "' in --sizes");
        out[name] = parse_count(item.substr(eq + 1));
    }
    return out;
}

int resolved_workers(int w) { return w > 0 ? w : static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

int cmd_extract(const Options& o, std::ostream& out, std::ostream& err) {
    const auto docs = load_corpus(o.input);
    std::string units_text, drops_text;
    std::size_t n_units = 0, n_drops = 0;
    for (const auto& doc : docs) {
        const auto r = extract_units(doc);
        for (const auto& u : r.units) {
            units_text += json{{"doc_id", u.doc_id},
                               {"kind", to_string(u.kind)},
                               {"span", {u.span_begin, u.span_end}},
                               {"latex", u.formula.source},
                               {"category", to_string(u.formula.category)},
                               {"char_length", u.formula.char_length},
                               {"token_length", u.formula.token_length}}
                              .dump() +
                          "\n";
            ++n_units;
        }
        for (const auto& d : r.drops) {
            drops_text += json{{"doc_id", d.doc_id}, {"span", {d.span_begin, d.span_end}}, {"reason", d.reason}}.dump() + "\n";
            ++n_drops;
        }
    }
    fs::create_directories(o.out);
    write_output((fs::path(o.out) / "units.jsonl").string(), units_text, out);
    write_output((fs::path(o.out) / "extract_drops.jsonl").string(), drops_text, out);
    err << "extracted " << n_units << " units from " << docs.size() << " documents (" << n_drops << " dropped)\n";
    out << json{{"documents", docs.size()}, {"units", n_units}, {"dropped", n_drops}}.dump() << "\n";
    return 0;
}

int cmd_build(const Options& o, const Config& cfg, std::ostream& out, std::ostream& err) {
    const BuildResult r = build(o.input, o.out, cfg.pipeline, [&](const std::string& msg) { err << msg << "\n"; });
    out << json{{"units", r.units},
                {"candidates", r.candidates},
                {"kept", r.manifest.size()},
                {"dropped", r.drops.size()},
                {"out", o.out}}
               .dump()
        << "\n";
    return 0;
}

int cmd_eval(const Options& o, const Config& cfg, std::ostream& out, std::ostream& err) {
    const auto pairs = read_pairs_jsonl(o.input);
    EvalConfig ec;
    ec.epmr = cfg.metrics.epmr;
    ec.normalize = cfg.metrics.normalize;
    ec.dpi = cfg.pipeline.renderer.dpi;
    ec.timeout_ms = cfg.pipeline.renderer.timeout_ms;
    ec.workers = resolved_workers(cfg.pipeline.build.workers);
    const Renderer renderer(cfg.pipeline.renderer);
    err << "evaluating " << pairs.size() << " pairs (offset " << ec.epmr.offset << ", dil_size " << ec.epmr.dil_size
        << ")\n";
    const EvalReport report = evaluate_set(pairs, ec, renderer);
    write_output(o.out, report_json(report), out);
    if (!o.csv.empty()) write_output(o.csv, report_csv(report), out);
    if (report.aggregates.errors) err << report.aggregates.errors << " samples could not be scored\n";
    return 0;
}

int cmd_stats(const Options& o, std::ostream& out, std::ostream& err) {
    const auto records = read_manifest(o.input);
    std::vector<DropRecord> drops;
    fs::path drops_path = o.drops;
    if (drops_path.empty()) {
        fs::path sibling = fs::path(o.input).parent_path() / "drops.jsonl";
        if (fs::exists(sibling)) drops_path = sibling;
    }
    if (!drops_path.empty()) {
        drops = read_drops(drops_path);
        err << "using drop log " << drops_path.string() << "\n";
    }
    const BuildStats stats = compute_stats(records, drops);
    if (o.format == "table") write_output(o.out, stats_table(stats), out);
    else write_output(o.out, stats_json(stats), out);
    return 0;
}

int cmd_hist(const Options& o, std::ostream& out) {
    write_output(o.out, histogram_csv(length_histogram(read_manifest(o.input))), out);
    return 0;
}

int cmd_stratify(const Options& o, const Config& cfg, std::ostream& out, std::ostream& err) {
    const auto records = read_manifest(o.input);
    const Stratification s = stratify_benchmark(records, cfg.strata, cfg.pipeline.build.seed);
    fs::create_directories(o.out);
    json summary = json::object();
    for (const auto& [name, subset] : s.subsets) {
        write_manifest(fs::path(o.out) / (name + ".jsonl"), subset);
        summary[name] = subset.size();
    }
    for (const auto& w : s.warnings) err << "warning: " << w << "\n";
    out << summary.dump() << "\n";
    return 0;
}

void report_error(std::ostream& err, bool json_errors, int code, const std::string& kind, const std::string& msg) {
    if (json_errors) err << json{{"error", {{"code", code}, {"kind", kind}, {"message", msg}}}}.dump() << "\n";
    else err << "texforge: " << (kind == "usage" ? "usage error: " : "error: ") << msg << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    o.json_errors = std::find(args.begin(), args.end(), "--json-errors") != args.end();

    CLI::App app{"Formula dataset synthesis and image-based evaluation", "texforge"};
    app.fallthrough();
    app.require_subcommand(1);
    app.add_option("--config", o.config_path, "TOML configuration file")->check(CLI::ExistingFile);
    app.add_flag("--json-errors", o.json_errors, "Report errors as JSON on stderr");
    auto* workers = app.add_option("--workers", o.workers, "Worker threads (build.workers; 0 = logical cores)")
                        ->check(CLI::NonNegativeNumber);
    auto* renderer = app.add_option("--renderer", o.renderer, "Renderer command or \"builtin\" (renderer.command)");
    auto* dpi = app.add_option("--dpi", o.dpi, "Render resolution (renderer.dpi)")->check(CLI::Range(72, 4800));
    auto* cache = app.add_option("--cache-dir", o.cache_dir, "Render cache directory (renderer.cache_dir)");

    auto* extract = app.add_subcommand("extract", "Extract unit formulas from a Markdown corpus");
    extract->add_option("corpus", o.input, "Corpus directory")->required()->check(CLI::ExistingDirectory);
    extract->add_option("-o,--out", o.out, "Output directory")->required();

    auto* build_cmd = app.add_subcommand("build", "Run the full dataset pipeline");
    build_cmd->add_option("corpus", o.input, "Corpus directory")->required();
    build_cmd->add_option("-o,--out", o.out, "Output directory")->required();
    auto* seed = build_cmd->add_option("--seed", o.seed, "Global seed (build.seed)");
    auto* size = build_cmd->add_option("--size", o.size, "Target record count (build.size; 0 = corpus-driven)");

    auto* eval = app.add_subcommand("eval", "Score prediction/reference pairs");
    eval->add_option("pairs", o.input, "JSON Lines file of {id, pred, ref}")->required()->check(CLI::ExistingFile);
    eval->add_option("-o,--out", o.out, "Report path (default stdout)");
    auto* offset = eval->add_option("--offset", o.offset, "EPMR shift radius in pixels (metrics.offset)")
                       ->check(CLI::NonNegativeNumber);
    auto* dil = eval->add_option("--dil-size", o.dil_size, "EPMR dilation radius in pixels (metrics.dil_size)")
                    ->check(CLI::NonNegativeNumber);
    auto* normalize = eval->add_flag("--normalize", o.normalize, "Strip bold/italic/spacing before scoring (metrics.normalize)");
    auto* c2f = eval->add_flag("--coarse-to-fine", o.coarse_to_fine, "Bound-pruned shift search (metrics.coarse_to_fine)");
    eval->add_option("--csv", o.csv, "Also write per-sample rows as CSV");

    auto* stats = app.add_subcommand("stats", "Per-category statistics of a manifest");
    stats->add_option("manifest", o.input, "manifest.jsonl")->required()->check(CLI::ExistingFile);
    stats->add_option("-o,--out", o.out, "Output path (default stdout)");
    stats->add_option("--format", o.format, "json or table")->check(CLI::IsMember({"json", "table"}));
    stats->add_option("--drops", o.drops, "Drop log for render failure rates (default: drops.jsonl beside the manifest)");

    auto* hist = app.add_subcommand("hist", "Character-length histogram of a manifest as CSV");
    hist->add_option("manifest", o.input, "manifest.jsonl")->required()->check(CLI::ExistingFile);
    hist->add_option("-o,--out", o.out, "Output path (default stdout)");

    auto* strat = app.add_subcommand("stratify", "Split a manifest into benchmark subsets");
    strat->add_option("manifest", o.input, "manifest.jsonl")->required()->check(CLI::ExistingFile);
    strat->add_option("-o,--out", o.out, "Output directory")->required();
    auto* sizes = strat->add_option("--sizes", o.sizes, "N for every stratum, or Stratum=N,... (build.strata)");
    auto* strat_seed = strat->add_option("--seed", o.seed, "Sampling seed (build.seed)");

    std::vector<std::string> argv_store = {"texforge"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        report_error(err, o.json_errors, 1, "usage", e.what());
        return 1;
    }

    Config cfg;
    try {
        if (!o.config_path.empty()) cfg = load_config(o.config_path);
        apply_environment(cfg);
        if (workers->count()) cfg.pipeline.build.workers = o.workers;
        if (renderer->count()) cfg.pipeline.renderer.command = o.renderer;
        if (dpi->count()) cfg.pipeline.renderer.dpi = o.dpi;
        if (cache->count()) {
            if (o.cache_dir.empty()) cfg.pipeline.renderer.cache_dir.reset();
            else cfg.pipeline.renderer.cache_dir = o.cache_dir;
        }
        if (seed->count() || strat_seed->count()) cfg.pipeline.build.seed = o.seed;
        if (size->count()) cfg.pipeline.build.size = o.size;
        if (offset->count()) cfg.metrics.epmr.offset = o.offset;
        if (dil->count()) cfg.metrics.epmr.dil_size = o.dil_size;
        if (normalize->count()) cfg.metrics.normalize = true;
        if (c2f->count()) cfg.metrics.epmr.coarse_to_fine = true;
        if (sizes->count()) cfg.strata = parse_sizes(o.sizes);
        validate_config(cfg);
    } catch (const ConfigError& e) {
        report_error(err, o.json_errors, 1, "usage", e.what());
        return 1;
    } catch (const UsageError& e) {
        report_error(err, o.json_errors, 1, "usage", e.what());
        return 1;
    }

    try {
        if (extract->parsed()) return cmd_extract(o, out, err);
        if (build_cmd->parsed()) return cmd_build(o, cfg, out, err);
        if (eval->parsed()) return cmd_eval(o, cfg, out, err);
        if (stats->parsed()) return cmd_stats(o, out, err);
        if (hist->parsed()) return cmd_hist(o, out);
        if (strat->parsed()) return cmd_stratify(o, cfg, out, err);
    } catch (const std::exception& e) {
        report_error(err, o.json_errors, 2, "runtime", e.what());
        return 2;
    }
    report_error(err, o.json_errors, 1, "usage", "no subcommand given");
    return 1;
}

}  // namespace texforge
