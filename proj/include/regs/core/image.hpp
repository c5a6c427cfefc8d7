#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace regs {

// Row-major, interleaved channels.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

    std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
    std::size_t index(int x, int y, int ch = 0) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + ch;
    }
    double& at(int x, int y, int ch = 0) { return data[index(x, y, ch)]; }
    double at(int x, int y, int ch = 0) const { return data[index(x, y, ch)]; }

    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

// 8-bit RGB PNG <-> [0,1] doubles. Alpha and grayscale inputs are
// expanded to RGB.
Image read_png_rgb(const std::filesystem::path& path);
void write_png_rgb(const Image& img, const std::filesystem::path& path);

// Depth as 16-bit grayscale scaled by 65535 / max_depth, with
// {"max_depth": ...} in `<path>.json`. Returns the scale used.
double write_depth_png(const Image& depth, const std::filesystem::path& path);
Image read_depth_png(const std::filesystem::path& path);

} // namespace regs
