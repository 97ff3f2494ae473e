#include "texforge/image.hpp"

#include <png.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

namespace texforge {

std::size_t BinaryImage::count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

std::optional<BBox> ink_bbox(const GrayImage& img, int threshold) {
    BBox box{img.width, img.height, 0, 0};
    bool any = false;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (img.at(x, y) < threshold) {
                any = true;
                box.x0 = std::min(box.x0, x);
                box.y0 = std::min(box.y0, y);
                box.x1 = std::max(box.x1, x + 1);
                box.y1 = std::max(box.y1, y + 1);
            }
        }
    }
    if (!any) return std::nullopt;
    return box;
}

GrayImage crop(const GrayImage& img, const BBox& box) {
    GrayImage out(box.width(), box.height());
    for (int y = 0; y < out.height; ++y)
        std::memcpy(&out.at(0, y), img.pixels.data() + static_cast<std::size_t>(box.y0 + y) * img.width + box.x0, static_cast<std::size_t>(out.width));
    return out;
}

std::optional<GrayImage> crop_to_ink(const GrayImage& img, int margin, int threshold) {
    auto box = ink_bbox(img, threshold);
    if (!box) return std::nullopt;
    GrayImage out(box->width() + 2 * margin, box->height() + 2 * margin, 255);
    for (int y = 0; y < box->height(); ++y)
        std::memcpy(&out.at(margin, margin + y), img.pixels.data() + static_cast<std::size_t>(box->y0 + y) * img.width + box->x0,
                    static_cast<std::size_t>(box->width()));
    return out;
}

namespace {

GrayImage finish_read(png_image& image) {
    image.format = PNG_FORMAT_GRAY;
    GrayImage out(static_cast<int>(image.width), static_cast<int>(image.height));
    png_color white{255, 255, 255};
    if (!png_image_finish_read(&image, &white, out.pixels.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw ImageIoError("png decode failed: " + msg);
    }
    return out;
}

}  // namespace

GrayImage decode_png(const std::vector<std::uint8_t>& bytes) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw ImageIoError(std::string("png decode failed: ") + image.message);
    return finish_read(image);
}

GrayImage read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageIoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
    if (img.width <= 0 || img.height <= 0) throw ImageIoError("cannot encode an empty image");
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr))
        throw ImageIoError(std::string("png encode failed: ") + image.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr))
        throw ImageIoError(std::string("png encode failed: ") + image.message);
    out.resize(size);
    return out;
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
    auto bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ImageIoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ImageIoError("short write to " + path.string());
}

}  // namespace texforge
