#pragma once

#include "texforge/dataset.hpp"
#include "texforge/metrics.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace texforge {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MetricsConfig {
    EpmrConfig epmr;
    bool normalize = false;
};

struct Config {
    PipelineConfig pipeline;
    MetricsConfig metrics;
    // Requested subset sizes for stratification; 0 or missing keeps all.
    std::map<std::string, std::size_t> strata;
};

// Parses the TOML subset this tool understands. Relative paths resolve
// against base_dir. Unknown sections and keys are rejected by name.
Config parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
Config load_config(const std::filesystem::path& path);

// Applies TEXFORGE_RENDERER when set.
void apply_environment(Config& cfg);

// Validates every section; throws ConfigError naming the offending key.
void validate_config(const Config& cfg);

// Annotated file listing every key with its default value.
std::string default_config_toml();
// Every accepted "section.key".
std::vector<std::string> config_keys();

}  // namespace texforge
