#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace texforge {

// 8-bit grayscale raster, row-major; 0 is black ink, 255 is white paper.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 255)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
        if (w < 0 || h < 0) throw std::invalid_argument("GrayImage: negative size");
    }

    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    bool empty() const { return pixels.empty(); }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

// Ink mask, row-major; 1 = ink.
struct BinaryImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> mask;

    BinaryImage() = default;
    BinaryImage(int w, int h)
        : width(w), height(h), mask(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

    std::uint8_t& at(int x, int y) { return mask[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return mask[static_cast<std::size_t>(y) * width + x]; }
    std::size_t count() const;

    friend bool operator==(const BinaryImage&, const BinaryImage&) = default;
};

struct BBox {
    int x0 = 0, y0 = 0;  // inclusive
    int x1 = 0, y1 = 0;  // exclusive
    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
};

// Bounding box of pixels with intensity < threshold; nullopt for a blank image.
std::optional<BBox> ink_bbox(const GrayImage& img, int threshold = 128);
GrayImage crop(const GrayImage& img, const BBox& box);
// Crops to the ink box and surrounds it with `margin` white pixels.
std::optional<GrayImage> crop_to_ink(const GrayImage& img, int margin, int threshold = 128);

class ImageIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Reads any PNG and converts it to 8-bit gray, compositing alpha over white.
GrayImage read_png(const std::filesystem::path& path);
GrayImage decode_png(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_png(const GrayImage& img);
void write_png(const std::filesystem::path& path, const GrayImage& img);

}  // namespace texforge
