#include "texforge/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace texforge {

namespace fs = std::filesystem;

namespace {

std::uint8_t clamp_u8(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// One octave of bilinear value noise in [-1, 1].
std::vector<double> value_noise(int w, int h, int cell, Rng& rng) {
    const int gw = w / cell + 2;
    const int gh = h / cell + 2;
    std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
    for (auto& v : lattice) v = rng.uniform(-1.0, 1.0);
    std::vector<double> out(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        const int gy = y / cell;
        const double ty = smoothstep(static_cast<double>(y % cell) / cell);
        for (int x = 0; x < w; ++x) {
            const int gx = x / cell;
            const double tx = smoothstep(static_cast<double>(x % cell) / cell);
            auto L = [&](int i, int j) { return lattice[static_cast<std::size_t>(j) * gw + i]; };
            const double top = L(gx, gy) * (1 - tx) + L(gx + 1, gy) * tx;
            const double bot = L(gx, gy + 1) * (1 - tx) + L(gx + 1, gy + 1) * tx;
            out[static_cast<std::size_t>(y) * w + x] = top * (1 - ty) + bot * ty;
        }
    }
    return out;
}

GrayImage procedural_texture(int w, int h, Rng& rng) {
    std::vector<double> field(static_cast<std::size_t>(w) * h, rng.uniform(222.0, 234.0));
    const std::pair<int, double> octaves[] = {{32, 10.0}, {16, 5.0}, {8, 2.5}, {4, 1.5}, {2, 1.0}};
    for (auto [cell, amp] : octaves) {
        auto n = value_noise(w, h, cell, rng);
        for (std::size_t i = 0; i < field.size(); ++i) field[i] += amp * n[i];
    }

    // fiber streaks: short faint strokes at random angles
    const int fibers = static_cast<int>(rng.uniform_int(0, 2 + static_cast<std::int64_t>(w) * h / 4000));
    for (int f = 0; f < fibers; ++f) {
        double x = rng.uniform(0, w), y = rng.uniform(0, h);
        const double angle = rng.uniform(0, std::numbers::pi);
        const int len = static_cast<int>(rng.uniform_int(4, 24));
        const double depth = rng.uniform(4.0, 12.0);
        for (int s = 0; s < len; ++s) {
            const int px = static_cast<int>(x), py = static_cast<int>(y);
            if (px >= 0 && px < w && py >= 0 && py < h) field[static_cast<std::size_t>(py) * w + px] -= depth;
            x += std::cos(angle);
            y += std::sin(angle);
        }
    }

    // radial vignette
    const double strength = rng.uniform(0.02, 0.08);
    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
    const double rmax = std::max(1.0, std::hypot(cx, cy));
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double r = std::hypot(x - cx, y - cy) / rmax;
            out.at(x, y) = clamp_u8(field[static_cast<std::size_t>(y) * w + x] * (1.0 - strength * r * r));
        }
    return out;
}

GrayImage resample_bilinear(const GrayImage& src, BBox region, int w, int h) {
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y) {
        const double sy = region.y0 + (y + 0.5) * region.height() / h - 0.5;
        const int y0 = std::clamp(static_cast<int>(std::floor(sy)), region.y0, region.y1 - 1);
        const int y1 = std::min(y0 + 1, region.y1 - 1);
        const double ty = std::clamp(sy - y0, 0.0, 1.0);
        for (int x = 0; x < w; ++x) {
            const double sx = region.x0 + (x + 0.5) * region.width() / w - 0.5;
            const int x0 = std::clamp(static_cast<int>(std::floor(sx)), region.x0, region.x1 - 1);
            const int x1 = std::min(x0 + 1, region.x1 - 1);
            const double tx = std::clamp(sx - x0, 0.0, 1.0);
            const double top = src.at(x0, y0) * (1 - tx) + src.at(x1, y0) * tx;
            const double bot = src.at(x0, y1) * (1 - tx) + src.at(x1, y1) * tx;
            out.at(x, y) = clamp_u8(top * (1 - ty) + bot * ty);
        }
    }
    return out;
}

GrayImage directory_texture(int w, int h, const fs::path& dir, Rng& rng) {
    std::vector<fs::path> files;
    std::error_code ec;
    for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec))
        if (it->is_regular_file() && it->path().extension() == ".png") files.push_back(it->path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw AugmentError("texture directory has no PNG images: " + dir.string());

    const GrayImage tex = read_png(files[rng.index(files.size())]);
    if (tex.empty()) throw AugmentError("empty texture image in " + dir.string());
    // Random crop with the target aspect ratio, then resample to size.
    const double scale = std::min(static_cast<double>(tex.width) / w, static_cast<double>(tex.height) / h);
    const double shrink = rng.uniform(0.5, 1.0);
    const int cw = std::clamp(static_cast<int>(w * scale * shrink), 1, tex.width);
    const int ch = std::clamp(static_cast<int>(h * scale * shrink), 1, tex.height);
    const int x0 = static_cast<int>(rng.uniform_int(0, tex.width - cw));
    const int y0 = static_cast<int>(rng.uniform_int(0, tex.height - ch));
    return resample_bilinear(tex, BBox{x0, y0, x0 + cw, y0 + ch}, w, h);
}

void apply_lighting(GrayImage& img, double max_strength, Rng& rng) {
    const double s = max_strength * rng.uniform(0.5, 1.0);
    const bool radial = rng.bernoulli(0.5);
    const int w = img.width, h = img.height;
    if (radial) {
        const double cx = rng.uniform(0, w), cy = rng.uniform(0, h);
        const double dmax = std::max({std::hypot(cx, cy), std::hypot(w - cx, cy), std::hypot(cx, h - cy),
                                      std::hypot(w - cx, h - cy), 1.0});
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double f = 1.0 - s * std::hypot(x - cx, y - cy) / dmax;
                img.at(x, y) = clamp_u8(img.at(x, y) * f);
            }
    } else {
        const double angle = rng.uniform(0, 2 * std::numbers::pi);
        const double dx = std::cos(angle), dy = std::sin(angle);
        double lo = 0, hi = 0;
        for (auto [x, y] : {std::pair{0, 0}, {w - 1, 0}, {0, h - 1}, {w - 1, h - 1}}) {
            lo = std::min(lo, x * dx + y * dy);
            hi = std::max(hi, x * dx + y * dy);
        }
        const double span = std::max(hi - lo, 1.0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double f = 1.0 - s * (x * dx + y * dy - lo) / span;
                img.at(x, y) = clamp_u8(img.at(x, y) * f);
            }
    }
}

void apply_lines(GrayImage& img, int kmin, int kmax, Rng& rng) {
    const int k = static_cast<int>(rng.uniform_int(kmin, kmax));
    const int w = img.width, h = img.height;
    for (int i = 0; i < k; ++i) {
        const double alpha = rng.uniform(0.15, 0.45);
        // mostly ruled-paper style horizontals with some random slant
        const bool horizontal = rng.bernoulli(0.7);
        double x0, y0, x1, y1;
        if (horizontal) {
            x0 = 0, x1 = w - 1;
            y0 = rng.uniform(0, h - 1);
            y1 = std::clamp(y0 + rng.uniform(-2.0, 2.0), 0.0, h - 1.0);
        } else {
            x0 = rng.uniform(0, w - 1), y0 = 0;
            x1 = rng.uniform(0, w - 1), y1 = h - 1;
        }
        const int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
        for (int s = 0; s < steps; ++s) {
            const double t = steps == 1 ? 0.0 : static_cast<double>(s) / (steps - 1);
            const int px = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
            const int py = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
            if (px >= 0 && px < w && py >= 0 && py < h) img.at(px, py) = clamp_u8(img.at(px, py) * (1.0 - alpha));
        }
    }
}

void apply_shadow(GrayImage& img, Rng& rng) {
    const int blobs = static_cast<int>(rng.uniform_int(1, 3));
    const int w = img.width, h = img.height;
    for (int b = 0; b < blobs; ++b) {
        const double cx = rng.uniform(0, w), cy = rng.uniform(0, h);
        const double sigma = rng.uniform(0.15, 0.5) * std::max(w, h);
        const double depth = rng.uniform(0.08, 0.25);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                img.at(x, y) = clamp_u8(img.at(x, y) * (1.0 - depth * std::exp(-d2 / (2 * sigma * sigma))));
            }
    }
}

}  // namespace

AugmentConfig AugmentConfig::disabled() {
    AugmentConfig c;
    c.p_texture = c.p_lighting = c.p_line_noise = c.p_shadow = c.p_bleed = c.p_fade = 0.0;
    return c;
}

void AugmentConfig::check() const {
    const std::pair<const char*, double> probs[] = {{"p_texture", p_texture},   {"p_lighting", p_lighting},
                                                    {"p_line_noise", p_line_noise}, {"p_shadow", p_shadow},
                                                    {"p_bleed", p_bleed},       {"p_fade", p_fade}};
    for (const auto& [name, p] : probs)
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string("augment.") + name + " must lie in [0, 1]");
    if (!(lighting_strength >= 0.0 && lighting_strength <= 1.0))
        throw std::invalid_argument("augment.lighting_strength must lie in [0, 1]");
    if (line_count_min < 0 || line_count_min > line_count_max)
        throw std::invalid_argument("augment line count range must satisfy 0 <= min <= max");
    if (bleed_radius < 0) throw std::invalid_argument("augment.bleed_radius must be >= 0");
    if (!(fade_gamma > 0.0)) throw std::invalid_argument("augment.fade_gamma must be > 0");
    for (const auto& stage : order)
        if (stage != "compose" && stage != "ink" && stage != "paper")
            throw std::invalid_argument("unknown augment stage '" + stage + "'");
    if (texture.mode == TextureSource::Mode::Directory && !texture.dir)
        throw std::invalid_argument("directory texture source needs a directory");
    if (texture.dir && !std::filesystem::is_directory(*texture.dir))
        throw std::invalid_argument("augment.texture_dir is not a directory: " + texture.dir->string());
}

GrayImage make_texture(int width, int height, const TextureSource& src, Rng& rng) {
    if (width < 1 || height < 1) throw std::invalid_argument("make_texture: size must be at least 1x1");
    Rng local(splitmix64(src.seed ^ rng.next_u64()));
    if (src.mode == TextureSource::Mode::Directory) {
        if (!src.dir) throw AugmentError("directory texture source has no directory");
        return directory_texture(width, height, *src.dir, local);
    }
    return procedural_texture(width, height, local);
}

GrayImage compose(const GrayImage& render, const GrayImage& texture, Rng& /*rng*/) {
    if (render.width != texture.width || render.height != texture.height)
        throw std::invalid_argument("compose: texture size must match the render");
    GrayImage out(render.width, render.height);
    for (std::size_t i = 0; i < out.pixels.size(); ++i)
        out.pixels[i] = static_cast<std::uint8_t>((render.pixels[i] * texture.pixels[i] + 127) / 255);
    return out;
}

GrayImage min_filter(const GrayImage& img, int radius) {
    if (radius <= 0) return img;
    const int w = img.width, h = img.height;
    // separable: rows then columns
    GrayImage tmp(w, h), out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::uint8_t m = 255;
            for (int k = std::max(0, x - radius); k <= std::min(w - 1, x + radius); ++k) m = std::min(m, img.at(k, y));
            tmp.at(x, y) = m;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::uint8_t m = 255;
            for (int k = std::max(0, y - radius); k <= std::min(h - 1, y + radius); ++k) m = std::min(m, tmp.at(x, k));
            out.at(x, y) = m;
        }
    return out;
}

GrayImage box_blur3(const GrayImage& img) {
    const int w = img.width, h = img.height;
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int sum = 0, n = 0;
            for (int j = std::max(0, y - 1); j <= std::min(h - 1, y + 1); ++j)
                for (int i = std::max(0, x - 1); i <= std::min(w - 1, x + 1); ++i) {
                    sum += img.at(i, j);
                    ++n;
                }
            out.at(x, y) = static_cast<std::uint8_t>((sum + n / 2) / n);
        }
    return out;
}

GrayImage fade(const GrayImage& img, double gamma) {
    if (gamma == 1.0) return img;
    std::uint8_t lut[256];
    for (int i = 0; i < 256; ++i) lut[i] = clamp_u8(255.0 * std::pow(i / 255.0, gamma));
    GrayImage out = img;
    for (auto& p : out.pixels) p = lut[p];
    return out;
}

GrayImage paper_augment(const GrayImage& img, const AugmentConfig& cfg, Rng& rng, std::vector<std::string>* applied) {
    GrayImage out = img;
    if (out.empty()) return out;
    if (rng.bernoulli(cfg.p_lighting)) {
        apply_lighting(out, cfg.lighting_strength, rng);
        if (applied) applied->push_back("lighting");
    }
    if (rng.bernoulli(cfg.p_line_noise)) {
        apply_lines(out, cfg.line_count_min, cfg.line_count_max, rng);
        if (applied) applied->push_back("line_noise");
    }
    if (rng.bernoulli(cfg.p_shadow)) {
        apply_shadow(out, rng);
        if (applied) applied->push_back("shadow");
    }
    return out;
}

GrayImage ink_augment(const GrayImage& img, const AugmentConfig& cfg, Rng& rng, std::vector<std::string>* applied) {
    GrayImage out = img;
    if (out.empty()) return out;
    if (rng.bernoulli(cfg.p_bleed)) {
        // The blur only runs with a real dilation; radius 0 stays an identity.
        if (cfg.bleed_radius > 0) out = box_blur3(min_filter(out, cfg.bleed_radius));
        if (applied) applied->push_back("bleed");
    }
    if (rng.bernoulli(cfg.p_fade)) {
        out = fade(out, cfg.fade_gamma);
        if (applied) applied->push_back("fade");
    }
    return out;
}

AugmentResult augment(const GrayImage& img, const AugmentConfig& cfg, Rng& rng) {
    AugmentResult result{img, {}};
    for (const auto& stage : cfg.order) {
        if (stage == "compose") {
            if (result.image.empty() || !rng.bernoulli(cfg.p_texture)) continue;
            GrayImage tex = make_texture(result.image.width, result.image.height, cfg.texture, rng);
            result.image = compose(result.image, tex, rng);
            result.applied.push_back("texture");
        } else if (stage == "ink") {
            result.image = ink_augment(result.image, cfg, rng, &result.applied);
        } else if (stage == "paper") {
            result.image = paper_augment(result.image, cfg, rng, &result.applied);
        } else {
            throw std::invalid_argument("unknown augment stage '" + stage + "'");
        }
    }
    return result;
}

}  // namespace texforge
