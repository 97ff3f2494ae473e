#include "texforge/config.hpp"

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace texforge {

namespace fs = std::filesystem;

namespace {

using Setter = std::function<void(Config&, const toml::node&, const std::string& key, const fs::path& base)>;

[[noreturn]] void type_error(const std::string& key, const char* expected) {
    throw ConfigError("config key '" + key + "' must be " + expected);
}

double as_double(const toml::node& n, const std::string& key) {
    if (auto v = n.as_floating_point()) return v->get();
    if (auto v = n.as_integer()) return static_cast<double>(v->get());
    type_error(key, "a number");
}

std::int64_t as_int(const toml::node& n, const std::string& key, std::int64_t lo = std::numeric_limits<std::int64_t>::min(),
                    std::int64_t hi = std::numeric_limits<std::int64_t>::max()) {
    auto v = n.as_integer();
    if (!v) type_error(key, "an integer");
    if (v->get() < lo || v->get() > hi)
        throw ConfigError("config key '" + key + "' is out of range: " + std::to_string(v->get()));
    return v->get();
}

int as_int32(const toml::node& n, const std::string& key) {
    return static_cast<int>(as_int(n, key, std::numeric_limits<int>::min(), std::numeric_limits<int>::max()));
}

bool as_bool(const toml::node& n, const std::string& key) {
    auto v = n.as_boolean();
    if (!v) type_error(key, "a boolean");
    return v->get();
}

std::string as_string(const toml::node& n, const std::string& key) {
    auto v = n.as_string();
    if (!v) type_error(key, "a string");
    return v->get();
}

std::vector<std::string> as_string_array(const toml::node& n, const std::string& key) {
    auto arr = n.as_array();
    if (!arr) type_error(key, "an array of strings");
    std::vector<std::string> out;
    for (const auto& el : *arr) out.push_back(as_string(el, key));
    return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

const std::map<std::string, std::map<std::string, Setter>>& registry() {
    static const std::map<std::string, std::map<std::string, Setter>> table = [] {
        std::map<std::string, std::map<std::string, Setter>> r;
        auto& rd = r["renderer"];
        rd["command"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.renderer.command = as_string(n, k);
        };
        rd["version"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.renderer.version = as_string(n, k);
        };
        rd["timeout_ms"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.renderer.timeout_ms = as_int32(n, k);
        };
        rd["dpi"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.renderer.dpi = as_int32(n, k);
        };
        rd["fonts"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.renderer.fonts = as_string_array(n, k);
        };
        rd["cache_dir"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path& base) {
            const std::string v = as_string(n, k);
            if (v.empty()) c.pipeline.renderer.cache_dir.reset();
            else c.pipeline.renderer.cache_dir = resolve(base, v);
        };

        auto& en = r["enhance"];
        auto enhance_prob = [](double EnhanceConfig::*field) -> Setter {
            return [=](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
                c.pipeline.enhance.*field = as_double(n, k);
            };
        };
        en["p_hcat"] = enhance_prob(&EnhanceConfig::p_hcat);
        en["p_vcat"] = enhance_prob(&EnhanceConfig::p_vcat);
        en["p_subst"] = enhance_prob(&EnhanceConfig::p_subst);
        en["p_text_inject"] = enhance_prob(&EnhanceConfig::p_text_inject);
        en["short_formula_fraction"] = enhance_prob(&EnhanceConfig::short_formula_fraction);
        en["max_units_per_formula"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.enhance.max_units_per_formula = as_int32(n, k);
        };
        en["lexicons"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path& base) {
            auto tbl = n.as_table();
            if (!tbl) type_error(k, "a table of name = \"path\" entries");
            c.pipeline.enhance.lexicons.clear();
            for (const auto& [name, value] : *tbl) {
                const std::string entry = k + "." + std::string(name.str());
                try {
                    c.pipeline.enhance.lexicons[std::string(name.str())] = load_lexicon(resolve(base, as_string(value, entry)));
                } catch (const EnhanceError& e) {
                    throw ConfigError("config key '" + entry + "': " + e.what());
                }
            }
        };
        en["operator_classes"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            auto arr = n.as_array();
            if (!arr) type_error(k, "an array of string arrays");
            c.pipeline.substitutions.operator_classes.clear();
            for (const auto& cls : *arr) c.pipeline.substitutions.operator_classes.push_back(as_string_array(cls, k));
        };
        en["bracket_classes"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            auto arr = n.as_array();
            if (!arr) type_error(k, "an array of classes of [open, close] pairs");
            c.pipeline.substitutions.bracket_classes.clear();
            for (const auto& cls : *arr) {
                auto pairs = cls.as_array();
                if (!pairs) type_error(k, "an array of classes of [open, close] pairs");
                std::vector<std::pair<std::string, std::string>> out;
                for (const auto& p : *pairs) {
                    auto v = as_string_array(p, k);
                    if (v.size() != 2) type_error(k, "an array of classes of [open, close] pairs");
                    out.emplace_back(v[0], v[1]);
                }
                c.pipeline.substitutions.bracket_classes.push_back(std::move(out));
            }
        };

        auto& au = r["augment"];
        auto augment_num = [](double AugmentConfig::*field) -> Setter {
            return [=](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
                c.pipeline.augment.*field = as_double(n, k);
            };
        };
        auto augment_int = [](int AugmentConfig::*field) -> Setter {
            return [=](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
                c.pipeline.augment.*field = as_int32(n, k);
            };
        };
        au["p_texture"] = augment_num(&AugmentConfig::p_texture);
        au["p_lighting"] = augment_num(&AugmentConfig::p_lighting);
        au["p_line_noise"] = augment_num(&AugmentConfig::p_line_noise);
        au["p_shadow"] = augment_num(&AugmentConfig::p_shadow);
        au["p_bleed"] = augment_num(&AugmentConfig::p_bleed);
        au["p_fade"] = augment_num(&AugmentConfig::p_fade);
        au["lighting_strength"] = augment_num(&AugmentConfig::lighting_strength);
        au["fade_gamma"] = augment_num(&AugmentConfig::fade_gamma);
        au["line_count_min"] = augment_int(&AugmentConfig::line_count_min);
        au["line_count_max"] = augment_int(&AugmentConfig::line_count_max);
        au["bleed_radius"] = augment_int(&AugmentConfig::bleed_radius);
        au["order"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.augment.order = as_string_array(n, k);
        };
        au["texture_dir"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path& base) {
            const std::string v = as_string(n, k);
            auto& t = c.pipeline.augment.texture;
            if (v.empty()) {
                t.mode = TextureSource::Mode::Procedural;
                t.dir.reset();
            } else {
                t.mode = TextureSource::Mode::Directory;
                t.dir = resolve(base, v);
            }
        };

        auto& cu = r["curate"];
        cu["normalized_threshold"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.curate.dedup.normalized_threshold = as_double(n, k);
        };
        cu["bucket_width"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.curate.dedup.bucket_width = as_int32(n, k);
        };
        cu["min_aspect"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.curate.min_aspect = as_double(n, k);
        };
        cu["max_aspect"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.curate.max_aspect = as_double(n, k);
        };
        cu["boundary_margin"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.curate.boundary_margin = as_int32(n, k);
        };
        cu["center_tol"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.curate.center_tol = as_double(n, k);
        };
        cu["max_repeats"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.curate.max_repeats = as_int32(n, k);
        };

        auto& me = r["metrics"];
        me["offset"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.metrics.epmr.offset = as_int32(n, k);
        };
        me["dil_size"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.metrics.epmr.dil_size = as_int32(n, k);
        };
        me["binarize_threshold"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.metrics.epmr.binarize_threshold = as_int32(n, k);
        };
        me["coarse_to_fine"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.metrics.epmr.coarse_to_fine = as_bool(n, k);
        };
        me["normalize"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.metrics.normalize = as_bool(n, k);
        };

        auto& bu = r["build"];
        bu["seed"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.build.seed = static_cast<std::uint64_t>(as_int(n, k, 0));
        };
        bu["size"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.build.size = static_cast<std::size_t>(as_int(n, k, 0));
        };
        bu["oversample"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.build.oversample = as_double(n, k);
        };
        bu["workers"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.build.workers = as_int32(n, k);
        };
        bu["harvest_text"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.build.harvest_text = as_bool(n, k);
        };
        bu["snippet_min_words"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.build.snippet_min_words = as_int32(n, k);
        };
        bu["snippet_max_words"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            c.pipeline.build.snippet_max_words = as_int32(n, k);
        };
        bu["font_assignment"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            const std::string v = as_string(n, k);
            if (v != "seeded" && v != "round_robin") type_error(k, "\"seeded\" or \"round_robin\"");
            c.pipeline.build.round_robin_fonts = v == "round_robin";
        };
        bu["strata"] = [](Config& c, const toml::node& n, const std::string& k, const fs::path&) {
            auto tbl = n.as_table();
            if (!tbl) type_error(k, "a table of stratum = size entries");
            c.strata.clear();
            for (const auto& [name, value] : *tbl) {
                const std::string entry = k + "." + std::string(name.str());
                const std::string stratum(name.str());
                if (std::find_if(std::begin(kStrata), std::end(kStrata), [&](const char* s) { return stratum == s; }) ==
                    std::end(kStrata))
                    throw ConfigError("unknown config key '" + entry + "'");
                c.strata[stratum] = static_cast<std::size_t>(as_int(value, entry, 0));
            }
        };
        return r;
    }();
    return table;
}

}  // namespace

Config parse_config(std::string_view text, const fs::path& base_dir) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config parse error at line " << e.source().begin.line << ": " << e.description();
        throw ConfigError(msg.str());
    }
    Config cfg;
    const auto& reg = registry();
    for (const auto& [section_name, section_node] : root) {
        const std::string section(section_name.str());
        auto sit = reg.find(section);
        if (sit == reg.end()) {
            if (section_node.is_table()) throw ConfigError("unknown config section [" + section + "]");
            throw ConfigError("unknown config key '" + section + "'");
        }
        auto tbl = section_node.as_table();
        if (!tbl) throw ConfigError("config entry '" + section + "' must be a section");
        for (const auto& [key_name, value] : *tbl) {
            const std::string qualified = section + "." + std::string(key_name.str());
            auto kit = sit->second.find(std::string(key_name.str()));
            if (kit == sit->second.end()) throw ConfigError("unknown config key '" + qualified + "'");
            kit->second(cfg, value, qualified, base_dir);
        }
    }
    return cfg;
}

Config load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.parent_path());
}

void apply_environment(Config& cfg) {
    if (const char* r = std::getenv("TEXFORGE_RENDERER"); r && *r) cfg.pipeline.renderer.command = r;
}

void validate_config(const Config& cfg) {
    const auto& rd = cfg.pipeline.renderer;
    if (rd.dpi < 72) throw ConfigError("renderer.dpi must be >= 72");
    if (rd.timeout_ms < 1000) throw ConfigError("renderer.timeout_ms must be >= 1000");
    if (rd.fonts.empty()) throw ConfigError("renderer.fonts must list at least one preamble snippet");
    if (rd.command.empty()) throw ConfigError("renderer.command must not be empty");
    try {
        cfg.pipeline.enhance.check();
        cfg.pipeline.augment.check();
        cfg.pipeline.curate.check();
        cfg.pipeline.build.check();
        cfg.metrics.epmr.check();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& [section, keys] : registry())
        for (const auto& [key, setter] : keys) out.push_back(section + "." + key);
    return out;
}

std::string default_config_toml() {
    return R"toml(# texforge configuration; every key is optional and shown with its default.

[renderer]
command = "builtin"          # "builtin" or a shell template using {input-file} {output-file} {work-dir} {dpi}
version = ""                 # cache tag for external commands; empty derives one from the command
timeout_ms = 30000
dpi = 200
fonts = ["", "\\usepackage{mathpazo}", "\\usepackage{mathptmx}", "\\usepackage{newtxtext,newtxmath}"]
cache_dir = ""               # empty disables the render cache

[enhance]
p_hcat = 0.3
p_vcat = 0.15
p_subst = 0.1
p_text_inject = 0.1
max_units_per_formula = 3
short_formula_fraction = 0.2
lexicons = {}                # name = "path/to/words.txt", one word per line
# operator_classes = [["+", "-", "\\pm", "\\mp"], ...]
# bracket_classes = [[["(", ")"], ["[", "]"]], ...]

[augment]
p_texture = 0.8
p_lighting = 0.5
p_line_noise = 0.3
p_shadow = 0.2
p_bleed = 0.3
p_fade = 0.3
lighting_strength = 0.3
line_count_min = 1
line_count_max = 3
bleed_radius = 1
fade_gamma = 0.7
order = ["compose", "ink", "paper"]
texture_dir = ""             # empty uses procedural paper textures

[curate]
normalized_threshold = 0.1
bucket_width = 16
min_aspect = 0.05
max_aspect = 40.0
boundary_margin = 2
center_tol = 0.1
max_repeats = 5

[metrics]
offset = 20
dil_size = 2
binarize_threshold = 128
coarse_to_fine = false
normalize = false

[build]
seed = 0
size = 0                     # 0 = one candidate per extracted unit
oversample = 1.3
workers = 0                  # 0 = logical cores
harvest_text = true
snippet_min_words = 1
snippet_max_words = 6
font_assignment = "seeded"   # or "round_robin"
strata = {}                  # Symbol = 5000, Ordinary = 5000, ...
)toml";
}

}  // namespace texforge
