#pragma once

#include "texforge/image.hpp"

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace texforge {

struct RenderSpec {
    std::string latex;
    int font_id = 0;
    int dpi = 200;
    int timeout_ms = 30000;
};

enum class RenderFailureKind { SyntaxReject, CompileError, Timeout, EmptyOutput };
const char* to_string(RenderFailureKind k);

struct RenderFailure {
    RenderFailureKind kind;
    std::string detail;
};

struct RenderOutcome {
    std::variant<GrayImage, RenderFailure> result;

    bool ok() const { return std::holds_alternative<GrayImage>(result); }
    const GrayImage& image() const { return std::get<GrayImage>(result); }
    const RenderFailure& failure() const { return std::get<RenderFailure>(result); }
};

// Thrown by a backend when it cannot produce a raster.
class BackendFailure : public std::runtime_error {
public:
    BackendFailure(RenderFailureKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    RenderFailureKind kind() const { return kind_; }

private:
    RenderFailureKind kind_;
};

class RenderBackend {
public:
    virtual ~RenderBackend() = default;
    // Rasterizes one formula. Throws BackendFailure.
    virtual GrayImage rasterize(const std::string& latex, const std::string& font_preamble, int dpi,
                                int timeout_ms) const = 0;
    // Part of every cache key; change it whenever output may change.
    virtual std::string version() const = 0;
};

// In-process schematic typesetter (see glyph.hpp).
class GlyphBackend final : public RenderBackend {
public:
    explicit GlyphBackend(std::string version_tag = {}) : version_tag_(std::move(version_tag)) {}
    GrayImage rasterize(const std::string& latex, const std::string& font_preamble, int dpi,
                        int timeout_ms) const override;
    std::string version() const override;

private:
    std::string version_tag_;
};

// Runs an external command. The template may use {input-file}, {output-file},
// {work-dir} and {dpi}; each is substituted shell-quoted. The input file is a
// standalone LaTeX document; the command must leave a PNG at {output-file}.
class CommandBackend final : public RenderBackend {
public:
    explicit CommandBackend(std::string command_template, std::string version_tag = {});
    GrayImage rasterize(const std::string& latex, const std::string& font_preamble, int dpi,
                        int timeout_ms) const override;
    std::string version() const override { return version_; }

private:
    std::string template_;
    std::string version_;
};

// Standalone document handed to external renderers. The formula and font
// snippet sit between marker comments so simple tools can recover them.
std::string standalone_document(const std::string& latex, const std::string& font_preamble);
struct DocumentParts {
    std::string latex;
    std::string font_preamble;
};
DocumentParts parse_standalone_document(const std::string& document);

struct RendererConfig {
    std::string command = "builtin";
    std::string version;  // optional override of the backend version tag
    int timeout_ms = 30000;
    int dpi = 200;
    std::vector<std::string> fonts = default_fonts();
    std::optional<std::filesystem::path> cache_dir;

    static std::vector<std::string> default_fonts();
};

std::shared_ptr<RenderBackend> make_backend(const std::string& command, const std::string& version = {});

struct BatchRenderResult {
    std::vector<RenderOutcome> outcomes;
    double fail_rate = 0.0;  // percent
};

class Renderer {
public:
    static constexpr int kMargin = 8;

    explicit Renderer(const RendererConfig& config);
    Renderer(std::shared_ptr<RenderBackend> backend, std::vector<std::string> fonts,
             std::optional<std::filesystem::path> cache_dir = std::nullopt);

    // Static syntax check, then the backend; success images are cropped to
    // the ink box plus kMargin white pixels.
    RenderOutcome render(const RenderSpec& spec) const;
    // Same result, served from the content-addressed cache when possible.
    RenderOutcome render_cached(const RenderSpec& spec) const;
    // Outcomes in input order; individual failures never stop the batch.
    BatchRenderResult batch_render(const std::vector<RenderSpec>& specs, int workers) const;

    std::string cache_key(const RenderSpec& spec) const;
    std::size_t backend_invocations() const { return invocations_->load(); }
    const std::vector<std::string>& fonts() const { return fonts_; }
    const RenderBackend& backend() const { return *backend_; }
    // True when the backend renders a trivial formula.
    bool probe(int dpi = 200, int timeout_ms = 30000) const;

private:
    std::shared_ptr<RenderBackend> backend_;
    std::vector<std::string> fonts_;
    std::optional<std::filesystem::path> cache_dir_;
    std::shared_ptr<std::atomic<std::size_t>> invocations_ = std::make_shared<std::atomic<std::size_t>>(0);

    std::filesystem::path cache_path(const std::string& key, const char* ext) const;
};

}  // namespace texforge
