#pragma once

#include "regs/core/image.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace regs::stylize {

inline constexpr int kFeatureStride = 8;
inline constexpr int kBuiltinChannels = 12;

enum class FeatureSource { Builtin, File };

// Channel-major float grid.
struct FeatureMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;
    FeatureSource source = FeatureSource::Builtin;

    FeatureMap() = default;
    FeatureMap(int c, int h, int w, FeatureSource src = FeatureSource::Builtin)
        : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, 0.0f), source(src) {}

    std::size_t locations() const { return static_cast<std::size_t>(height) * width; }
    float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    float at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
};

// Feature grid size for an image dimension at stride 8.
inline int feature_cells(int pixels) { return (pixels + kFeatureStride - 1) / kFeatureStride; }

// Builtin descriptor per 8x8 cell: mean (Y, B-Y, R-Y), an 8-bin unsigned
// gradient-orientation histogram of Y and the variance of Y, normalized as
// f / sqrt(|f|^2 + 1e-8). Partial border cells average what they cover.
FeatureMap extract_builtin(const Image& rgb);

// Double-precision builtin features in FeatureMap::data layout.
std::vector<double> extract_builtin_double(const Image& rgb);

// dL/dImage given dL/dFeatures of extract_builtin_double at rgb.
Image builtin_backward(const Image& rgb, const std::vector<double>& dL_dfeat);

// FMAP: "FMAP", u32 version = 1, u32 C, H, W, C*H*W float32 LE, channel-major.
FeatureMap read_fmap(const std::filesystem::path& path);
void write_fmap(const FeatureMap& map, const std::filesystem::path& path);

} // namespace regs::stylize
