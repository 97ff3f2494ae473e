#include "texforge/render.hpp"

#include "texforge/glyph.hpp"
#include "texforge/hash.hpp"
#include "texforge/latex.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <thread>

namespace texforge {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kFormulaBegin = "% texforge-formula-begin";
constexpr std::string_view kFormulaEnd = "% texforge-formula-end";
constexpr std::string_view kFontBegin = "% texforge-font-begin";
constexpr std::string_view kFontEnd = "% texforge-font-end";

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    out += '\'';
    return out;
}

void replace_all(std::string& s, std::string_view from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

std::string between(const std::string& doc, std::string_view begin, std::string_view end) {
    auto b = doc.find(begin);
    if (b == std::string::npos) return {};
    b = doc.find('\n', b);
    if (b == std::string::npos) return {};
    auto e = doc.find(end, b);
    if (e == std::string::npos) return {};
    std::string out = doc.substr(b + 1, e - b - 1);
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    return out;
}

std::string read_tail(const fs::path& p, std::size_t max_bytes = 400) {
    std::ifstream in(p, std::ios::binary);
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (s.size() > max_bytes) s = s.substr(s.size() - max_bytes);
    return s;
}

struct TempDir {
    fs::path path;
    TempDir() {
        std::string tmpl = (fs::temp_directory_path() / "texforge-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw BackendFailure(RenderFailureKind::CompileError, "mkdtemp failed");
        path = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

}  // namespace

const char* to_string(RenderFailureKind k) {
    switch (k) {
        case RenderFailureKind::SyntaxReject: return "SyntaxReject";
        case RenderFailureKind::CompileError: return "CompileError";
        case RenderFailureKind::Timeout: return "Timeout";
        case RenderFailureKind::EmptyOutput: return "EmptyOutput";
    }
    return "?";
}

std::string standalone_document(const std::string& latex, const std::string& font_preamble) {
    std::ostringstream doc;
    doc << "\\documentclass[preview,border=1pt]{standalone}\n"
        << "\\usepackage{amsmath,amssymb,amsfonts}\n"
        << kFontBegin << '\n'
        << font_preamble << '\n'
        << kFontEnd << '\n'
        << "\\begin{document}\n"
        << "$\\displaystyle\n"
        << kFormulaBegin << '\n'
        << normalize_whitespace(latex) << '\n'
        << kFormulaEnd << '\n'
        << "$\n"
        << "\\end{document}\n";
    return doc.str();
}

DocumentParts parse_standalone_document(const std::string& document) {
    return {between(document, kFormulaBegin, kFormulaEnd), between(document, kFontBegin, kFontEnd)};
}

GrayImage GlyphBackend::rasterize(const std::string& latex, const std::string& font_preamble, int dpi,
                                  int /*timeout_ms*/) const {
    try {
        return glyph_typeset(latex, font_preamble, dpi);
    } catch (const GlyphLayoutError& e) {
        throw BackendFailure(RenderFailureKind::CompileError, e.what());
    }
}

std::string GlyphBackend::version() const {
    return version_tag_.empty() ? std::string(kGlyphBackendVersion) : version_tag_;
}

CommandBackend::CommandBackend(std::string command_template, std::string version_tag)
    : template_(std::move(command_template)) {
    version_ = version_tag.empty() ? "cmd-" + sha256_hex(template_).substr(0, 16) : std::move(version_tag);
}

GrayImage CommandBackend::rasterize(const std::string& latex, const std::string& font_preamble, int dpi,
                                    int timeout_ms) const {
    TempDir dir;
    const fs::path input = dir.path / "formula.tex";
    const fs::path output = dir.path / "formula.png";
    const fs::path log = dir.path / "render.log";
    {
        std::ofstream out(input, std::ios::binary);
        out << standalone_document(latex, font_preamble);
        if (!out) throw BackendFailure(RenderFailureKind::CompileError, "cannot write " + input.string());
    }

    std::string cmd = template_;
    replace_all(cmd, "{input-file}", shell_quote(input.string()));
    replace_all(cmd, "{output-file}", shell_quote(output.string()));
    replace_all(cmd, "{work-dir}", shell_quote(dir.path.string()));
    replace_all(cmd, "{dpi}", std::to_string(dpi));

    const std::string workdir = dir.path.string();
    const std::string logfile = log.string();
    pid_t pid = fork();
    if (pid < 0) throw BackendFailure(RenderFailureKind::CompileError, "fork failed");
    if (pid == 0) {
        setpgid(0, 0);
        int fd = open(logfile.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (fd >= 0) {
            dup2(fd, STDOUT_FILENO);
            dup2(fd, STDERR_FILENO);
            close(fd);
        }
        int devnull = open("/dev/null", O_RDONLY);
        if (devnull >= 0) dup2(devnull, STDIN_FILENO);
        if (chdir(workdir.c_str()) != 0) _exit(127);
        execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    setpgid(pid, pid);

    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    int status = 0;
    for (;;) {
        pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) break;
        if (r < 0) throw BackendFailure(RenderFailureKind::CompileError, "waitpid failed");
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            throw BackendFailure(RenderFailureKind::Timeout, "renderer exceeded " + std::to_string(timeout_ms) + " ms");
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
        throw BackendFailure(RenderFailureKind::CompileError, "renderer failed: " + read_tail(log));

    std::error_code ec;
    if (!fs::exists(output, ec) || fs::file_size(output, ec) == 0)
        throw BackendFailure(RenderFailureKind::EmptyOutput, "renderer produced no image");
    try {
        return read_png(output);
    } catch (const ImageIoError& e) {
        throw BackendFailure(RenderFailureKind::CompileError, e.what());
    }
}

std::vector<std::string> RendererConfig::default_fonts() {
    return {
        "",
        "\\usepackage{mathpazo}",
        "\\usepackage{mathptmx}",
        "\\usepackage{newtxtext,newtxmath}",
    };
}

std::shared_ptr<RenderBackend> make_backend(const std::string& command, const std::string& version) {
    if (command.empty() || command == "builtin") return std::make_shared<GlyphBackend>(version);
    return std::make_shared<CommandBackend>(command, version);
}

Renderer::Renderer(const RendererConfig& config)
    : Renderer(make_backend(config.command, config.version), config.fonts, config.cache_dir) {}

Renderer::Renderer(std::shared_ptr<RenderBackend> backend, std::vector<std::string> fonts,
                   std::optional<fs::path> cache_dir)
    : backend_(std::move(backend)), fonts_(std::move(fonts)), cache_dir_(std::move(cache_dir)) {
    if (!backend_) throw std::invalid_argument("Renderer: null backend");
    if (fonts_.empty()) throw std::invalid_argument("Renderer: at least one font profile is required");
}

RenderOutcome Renderer::render(const RenderSpec& spec) const {
    if (spec.dpi < 72) throw std::invalid_argument("RenderSpec: dpi must be >= 72");
    if (spec.timeout_ms < 1000) throw std::invalid_argument("RenderSpec: timeout_ms must be >= 1000");
    if (spec.font_id < 0 || static_cast<std::size_t>(spec.font_id) >= fonts_.size())
        throw std::invalid_argument("RenderSpec: unknown font_id " + std::to_string(spec.font_id));

    if (auto err = validate(tokenize(spec.latex)))
        return {RenderFailure{RenderFailureKind::SyntaxReject, to_string(err->kind)}};

    GrayImage raw;
    try {
        ++*invocations_;
        raw = backend_->rasterize(spec.latex, fonts_[static_cast<std::size_t>(spec.font_id)], spec.dpi,
                                  spec.timeout_ms);
    } catch (const BackendFailure& e) {
        return {RenderFailure{e.kind(), e.what()}};
    }
    auto cropped = crop_to_ink(raw, kMargin);
    if (!cropped) return {RenderFailure{RenderFailureKind::EmptyOutput, "no ink in rendered image"}};
    return {std::move(*cropped)};
}

std::string Renderer::cache_key(const RenderSpec& spec) const {
    std::string material;
    material += spec.latex;
    material += '\0';
    material += fonts_.at(static_cast<std::size_t>(spec.font_id));
    material += '\0';
    material += std::to_string(spec.dpi);
    material += '\0';
    material += backend_->version();
    return sha256_hex(material);
}

fs::path Renderer::cache_path(const std::string& key, const char* ext) const {
    return *cache_dir_ / key.substr(0, 2) / key.substr(2, 2) / (key + ext);
}

RenderOutcome Renderer::render_cached(const RenderSpec& spec) const {
    if (!cache_dir_) return render(spec);
    if (spec.font_id < 0 || static_cast<std::size_t>(spec.font_id) >= fonts_.size())
        throw std::invalid_argument("RenderSpec: unknown font_id " + std::to_string(spec.font_id));

    const std::string key = cache_key(spec);
    const fs::path png = cache_path(key, ".png");
    const fs::path fail = cache_path(key, ".fail");
    std::error_code ec;
    if (fs::exists(png, ec)) {
        try {
            GrayImage img = read_png(png);
            if (ink_bbox(img)) return {std::move(img)};
        } catch (const ImageIoError&) {
            // corrupt entry: fall through and re-render
        }
    } else if (fs::exists(fail, ec)) {
        std::ifstream in(fail);
        std::string kind;
        std::getline(in, kind);
        for (auto k : {RenderFailureKind::SyntaxReject, RenderFailureKind::CompileError, RenderFailureKind::EmptyOutput})
            if (kind == to_string(k)) return {RenderFailure{k, "cached failure"}};
    }

    RenderOutcome outcome = render(spec);
    if (!outcome.ok() && outcome.failure().kind == RenderFailureKind::Timeout) return outcome;

    fs::create_directories(png.parent_path(), ec);
    const fs::path tmp = png.parent_path() /
                         (key + ".tmp." + std::to_string(getpid()) + "." +
                          std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
    try {
        if (outcome.ok()) {
            write_png(tmp, outcome.image());
            fs::rename(tmp, png, ec);
        } else {
            {
                std::ofstream out(tmp);
                out << to_string(outcome.failure().kind) << '\n';
            }
            fs::rename(tmp, fail, ec);
        }
    } catch (const std::exception&) {
        fs::remove(tmp, ec);
    }
    return outcome;
}

BatchRenderResult Renderer::batch_render(const std::vector<RenderSpec>& specs, int workers) const {
    if (workers < 1) throw std::invalid_argument("batch_render: workers must be >= 1");
    BatchRenderResult result;
    result.outcomes.resize(specs.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < specs.size();) {
            try {
                result.outcomes[i] = render_cached(specs[i]);
            } catch (const std::exception& e) {
                result.outcomes[i] = {RenderFailure{RenderFailureKind::CompileError, e.what()}};
            }
        }
    };
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers), specs.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    std::size_t failures = 0;
    for (const auto& o : result.outcomes)
        if (!o.ok()) ++failures;
    result.fail_rate = specs.empty() ? 0.0 : 100.0 * static_cast<double>(failures) / static_cast<double>(specs.size());
    return result;
}

bool Renderer::probe(int dpi, int timeout_ms) const {
    try {
        return render(RenderSpec{"x", 0, dpi, timeout_ms}).ok();
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace texforge
