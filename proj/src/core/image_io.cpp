#include "regs/core/image.hpp"

#include "regs/core/error.hpp"

#include <nlohmann/json.hpp>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

namespace regs {

namespace {

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::filesystem::path sidecar(const std::filesystem::path& p) { return std::filesystem::path(p.string() + ".json"); }

} // namespace

Image read_png_rgb(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        throw InvalidInput("read_png_rgb: " + path.string() + ": " + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&image);
        throw InvalidInput("read_png_rgb: " + path.string() + ": " + image.message);
    }
    Image out(static_cast<int>(image.width), static_cast<int>(image.height), 3);
    std::transform(buf.begin(), buf.end(), out.data.begin(), [](std::uint8_t b) { return b / 255.0; });
    return out;
}

void write_png_rgb(const Image& img, const std::filesystem::path& path) {
    if (img.channels != 3) {
        throw InvalidInput("write_png_rgb: expected 3 channels");
    }
    std::vector<std::uint8_t> buf(img.data.size());
    std::transform(img.data.begin(), img.data.end(), buf.begin(), to_byte);
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr)) {
        throw InvalidInput("write_png_rgb: " + path.string() + ": " + image.message);
    }
}

double write_depth_png(const Image& depth, const std::filesystem::path& path) {
    if (depth.channels != 1) {
        throw InvalidInput("write_depth_png: expected 1 channel");
    }
    const double max_depth = depth.data.empty() ? 0.0 : *std::max_element(depth.data.begin(), depth.data.end());
    const double scale = max_depth > 0.0 ? 65535.0 / max_depth : 0.0;

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) {
        throw InvalidInput("write_depth_png: cannot open " + path.string());
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw InvalidInput("write_depth_png: libpng failure on " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(depth.width), static_cast<png_uint_32>(depth.height), 16,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(depth.width) * 2);
    for (int y = 0; y < depth.height; ++y) {
        for (int x = 0; x < depth.width; ++x) {
            const auto v = static_cast<std::uint16_t>(std::lround(std::clamp(depth.at(x, y) * scale, 0.0, 65535.0)));
            row[2 * x] = static_cast<std::uint8_t>(v >> 8); // big-endian per PNG
            row[2 * x + 1] = static_cast<std::uint8_t>(v & 0xff);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);

    std::ofstream meta(sidecar(path));
    meta << nlohmann::json{{"max_depth", max_depth}, {"scale", scale}}.dump(2) << "\n";
    return scale;
}

Image read_depth_png(const std::filesystem::path& path) {
    std::ifstream meta_in(sidecar(path));
    if (!meta_in) {
        throw InvalidInput("read_depth_png: missing sidecar for " + path.string());
    }
    const auto meta = nlohmann::json::parse(meta_in);
    const double scale = meta.at("scale").get<double>();

    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) {
        throw InvalidInput("read_depth_png: cannot open " + path.string());
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InvalidInput("read_depth_png: libpng failure on " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    if (png_get_bit_depth(png, info) != 16 || png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InvalidInput("read_depth_png: expected 16-bit grayscale");
    }
    Image out(w, h, 1);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 2);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x) {
            const int v = (row[2 * x] << 8) | row[2 * x + 1];
            out.at(x, y) = scale > 0.0 ? v / scale : 0.0;
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

} // namespace regs
