#pragma once

#include "texforge/image.hpp"
#include "texforge/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace texforge {

class AugmentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TextureSource {
    enum class Mode { Procedural, Directory };
    Mode mode = Mode::Procedural;
    std::optional<std::filesystem::path> dir;
    std::uint64_t seed = 0;
};

struct AugmentConfig {
    double p_texture = 0.8;
    double p_lighting = 0.5;
    double p_line_noise = 0.3;
    double p_shadow = 0.2;
    double p_bleed = 0.3;
    double p_fade = 0.3;
    double lighting_strength = 0.3;
    int line_count_min = 1;
    int line_count_max = 3;
    int bleed_radius = 1;
    double fade_gamma = 0.7;
    std::uint64_t seed = 0;
    // Stage order; each entry is "compose", "ink" or "paper".
    std::vector<std::string> order = {"compose", "ink", "paper"};
    TextureSource texture;

    // Every probability zero: the chain returns its input unchanged.
    static AugmentConfig disabled();
    void check() const;  // throws std::invalid_argument
};

GrayImage make_texture(int width, int height, const TextureSource& src, Rng& rng);

// out = render * texture / 255, rounded; ink never ends lighter than paper.
GrayImage compose(const GrayImage& render, const GrayImage& texture, Rng& rng);

// Lighting gradient, thin dark lines and soft shadows, each drawn with its
// own probability. Effect names are appended to `applied` when given.
GrayImage paper_augment(const GrayImage& img, const AugmentConfig& cfg, Rng& rng,
                        std::vector<std::string>* applied = nullptr);
// Ink bleed (min filter then 3x3 box blur) and fade (gamma remap).
GrayImage ink_augment(const GrayImage& img, const AugmentConfig& cfg, Rng& rng,
                      std::vector<std::string>* applied = nullptr);

// Grayscale erosion of the paper, i.e. dilation of dark ink.
GrayImage min_filter(const GrayImage& img, int radius);
GrayImage box_blur3(const GrayImage& img);
GrayImage fade(const GrayImage& img, double gamma);

struct AugmentResult {
    GrayImage image;
    std::vector<std::string> applied;
};

AugmentResult augment(const GrayImage& img, const AugmentConfig& cfg, Rng& rng);

}  // namespace texforge
