#include "regs/stylize/features.hpp"

#include "regs/core/error.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace regs::stylize {

namespace {

constexpr double kNormEps = 1e-8;
constexpr double kGradEps = 1e-4;
constexpr int kBins = 8;
constexpr double kPi = 3.14159265358979323846;

struct Lum {
    int w = 0, h = 0;
    std::vector<double> y, gx, gy;
};

double luma(const Image& img, int x, int y) {
    return 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
}

Lum luminance(const Image& rgb) {
    if (rgb.channels != 3 || rgb.width <= 0 || rgb.height <= 0) {
        throw InvalidInput("builtin features: expected a non-empty RGB image");
    }
    Lum l;
    l.w = rgb.width;
    l.h = rgb.height;
    l.y.resize(rgb.pixels());
    l.gx.resize(rgb.pixels());
    l.gy.resize(rgb.pixels());
    for (int y = 0; y < l.h; ++y) {
        for (int x = 0; x < l.w; ++x) {
            l.y[static_cast<std::size_t>(y) * l.w + x] = luma(rgb, x, y);
        }
    }
    auto at = [&](int x, int y) { return l.y[static_cast<std::size_t>(y) * l.w + x]; };
    for (int y = 0; y < l.h; ++y) {
        for (int x = 0; x < l.w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * l.w + x;
            l.gx[i] = 0.5 * (at(std::min(x + 1, l.w - 1), y) - at(std::max(x - 1, 0), y));
            l.gy[i] = 0.5 * (at(x, std::min(y + 1, l.h - 1)) - at(x, std::max(y - 1, 0)));
        }
    }
    return l;
}

// Soft orientation bin b for gradient (gx, gy) and its partials.
struct BinValue {
    double v, dgx, dgy;
};

BinValue bin_kernel(double gx, double gy, int b) {
    const double phi = b * kPi / 4.0;
    const double cp = std::cos(phi), sp = std::sin(phi);
    const double r2 = gx * gx + gy * gy + kGradEps * kGradEps;
    const double r = std::sqrt(r2);
    const double r4 = r2 * r2;
    const double m = r - kGradEps;
    const double c2 = (gx * gx - gy * gy) / r2;
    const double s2 = 2.0 * gx * gy / r2;
    const double u = 0.5 * (1.0 + cp * c2 + sp * s2);
    const double u3 = u * u * u;
    const double dc2_dgx = 2.0 * gx * (2.0 * gy * gy + kGradEps * kGradEps) / r4;
    const double dc2_dgy = -2.0 * gy * (2.0 * gx * gx + kGradEps * kGradEps) / r4;
    const double ds2_dgx = 2.0 * gy * (r2 - 2.0 * gx * gx) / r4;
    const double ds2_dgy = 2.0 * gx * (r2 - 2.0 * gy * gy) / r4;
    const double du_dgx = 0.5 * (cp * dc2_dgx + sp * ds2_dgx);
    const double du_dgy = 0.5 * (cp * dc2_dgy + sp * ds2_dgy);
    return {m * u3 * u, gx / r * u3 * u + 4.0 * m * u3 * du_dgx, gy / r * u3 * u + 4.0 * m * u3 * du_dgy};
}

struct Cell {
    int x0, x1, y0, y1;
    double n;
};

Cell cell_bounds(int cx, int cy, int w, int h) {
    Cell c{cx * kFeatureStride, std::min(w, (cx + 1) * kFeatureStride), cy * kFeatureStride,
           std::min(h, (cy + 1) * kFeatureStride), 0.0};
    c.n = static_cast<double>((c.x1 - c.x0) * (c.y1 - c.y0));
    return c;
}

std::array<double, kBuiltinChannels> raw_descriptor(const Image& rgb, const Lum& l, const Cell& c) {
    std::array<double, kBuiltinChannels> f{};
    double sum_y2 = 0.0;
    for (int y = c.y0; y < c.y1; ++y) {
        for (int x = c.x0; x < c.x1; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * l.w + x;
            const double yy = l.y[i];
            f[0] += yy;
            f[1] += rgb.at(x, y, 2) - yy;
            f[2] += rgb.at(x, y, 0) - yy;
            sum_y2 += yy * yy;
            for (int b = 0; b < kBins; ++b) {
                f[3 + b] += bin_kernel(l.gx[i], l.gy[i], b).v;
            }
        }
    }
    for (auto& v : f) {
        v /= c.n;
    }
    f[11] = std::max(0.0, sum_y2 / c.n - f[0] * f[0]);
    return f;
}

} // namespace

std::vector<double> extract_builtin_double(const Image& rgb) {
    const Lum l = luminance(rgb);
    const int gw = feature_cells(rgb.width), gh = feature_cells(rgb.height);
    const std::size_t plane = static_cast<std::size_t>(gw) * gh;
    std::vector<double> out(plane * kBuiltinChannels);
    for (int cy = 0; cy < gh; ++cy) {
        for (int cx = 0; cx < gw; ++cx) {
            const auto f = raw_descriptor(rgb, l, cell_bounds(cx, cy, rgb.width, rgb.height));
            double n2 = 0.0;
            for (double v : f) n2 += v * v;
            const double s = std::sqrt(n2 + kNormEps);
            for (int k = 0; k < kBuiltinChannels; ++k) {
                out[k * plane + static_cast<std::size_t>(cy) * gw + cx] = f[static_cast<std::size_t>(k)] / s;
            }
        }
    }
    return out;
}

FeatureMap extract_builtin(const Image& rgb) {
    const auto d = extract_builtin_double(rgb);
    FeatureMap m(kBuiltinChannels, feature_cells(rgb.height), feature_cells(rgb.width));
    for (std::size_t i = 0; i < d.size(); ++i) {
        m.data[i] = static_cast<float>(d[i]);
    }
    return m;
}

Image builtin_backward(const Image& rgb, const std::vector<double>& dL_dfeat) {
    const Lum l = luminance(rgb);
    const int gw = feature_cells(rgb.width), gh = feature_cells(rgb.height);
    const std::size_t plane = static_cast<std::size_t>(gw) * gh;
    if (dL_dfeat.size() != plane * kBuiltinChannels) {
        throw InvalidInput("builtin_backward: gradient size does not match the feature grid");
    }
    std::vector<double> dy(rgb.pixels(), 0.0), dgx(rgb.pixels(), 0.0), dgy(rgb.pixels(), 0.0);
    Image grad(rgb.width, rgb.height, 3);

    for (int cy = 0; cy < gh; ++cy) {
        for (int cx = 0; cx < gw; ++cx) {
            const Cell c = cell_bounds(cx, cy, rgb.width, rgb.height);
            const auto f = raw_descriptor(rgb, l, c);
            std::array<double, kBuiltinChannels> g{};
            double n2 = 0.0, ng = 0.0;
            for (int k = 0; k < kBuiltinChannels; ++k) {
                g[static_cast<std::size_t>(k)] = dL_dfeat[k * plane + static_cast<std::size_t>(cy) * gw + cx];
                n2 += f[static_cast<std::size_t>(k)] * f[static_cast<std::size_t>(k)];
            }
            const double s = std::sqrt(n2 + kNormEps);
            for (int k = 0; k < kBuiltinChannels; ++k) {
                ng += f[static_cast<std::size_t>(k)] / s * g[static_cast<std::size_t>(k)];
            }
            std::array<double, kBuiltinChannels> gr{};
            for (std::size_t k = 0; k < gr.size(); ++k) {
                gr[k] = (g[k] - f[k] / s * ng) / s / c.n;
            }
            const bool var_active = f[11] > 0.0;
            for (int y = c.y0; y < c.y1; ++y) {
                for (int x = c.x0; x < c.x1; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * l.w + x;
                    dy[i] += gr[0] - gr[1] - gr[2];
                    if (var_active) {
                        dy[i] += gr[11] * 2.0 * (l.y[i] - f[0]);
                    }
                    grad.at(x, y, 2) += gr[1];
                    grad.at(x, y, 0) += gr[2];
                    for (int b = 0; b < kBins; ++b) {
                        const auto bv = bin_kernel(l.gx[i], l.gy[i], b);
                        dgx[i] += gr[static_cast<std::size_t>(3 + b)] * bv.dgx;
                        dgy[i] += gr[static_cast<std::size_t>(3 + b)] * bv.dgy;
                    }
                }
            }
        }
    }
    for (int y = 0; y < l.h; ++y) {
        for (int x = 0; x < l.w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * l.w + x;
            auto idx = [&](int xx, int yy) { return static_cast<std::size_t>(yy) * l.w + xx; };
            dy[idx(std::min(x + 1, l.w - 1), y)] += 0.5 * dgx[i];
            dy[idx(std::max(x - 1, 0), y)] -= 0.5 * dgx[i];
            dy[idx(x, std::min(y + 1, l.h - 1))] += 0.5 * dgy[i];
            dy[idx(x, std::max(y - 1, 0))] -= 0.5 * dgy[i];
        }
    }
    for (int y = 0; y < l.h; ++y) {
        for (int x = 0; x < l.w; ++x) {
            const double d = dy[static_cast<std::size_t>(y) * l.w + x];
            grad.at(x, y, 0) += 0.299 * d;
            grad.at(x, y, 1) += 0.587 * d;
            grad.at(x, y, 2) += 0.114 * d;
        }
    }
    return grad;
}

namespace {

static_assert(std::endian::native == std::endian::little, "FMAP IO assumes a little-endian host");

constexpr std::uint32_t kFmapVersion = 1;

} // namespace

FeatureMap read_fmap(const std::filesystem::path& path) {
    using Kind = DecodeError::Kind;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DecodeError(Kind::Io, "read_fmap: cannot open " + path.string());
    }
    char magic[4];
    std::uint32_t header[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "FMAP", 4) != 0) {
        throw DecodeError(Kind::MalformedHeader, "read_fmap: bad magic in " + path.string());
    }
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(header))) {
        throw DecodeError(Kind::Truncated, "read_fmap: header truncated in " + path.string());
    }
    if (header[0] != kFmapVersion) {
        throw DecodeError(Kind::UnknownVersion, "read_fmap: unknown version " + std::to_string(header[0]));
    }
    if (header[1] == 0 || header[2] == 0 || header[3] == 0) {
        throw DecodeError(Kind::MalformedHeader, "read_fmap: empty feature map in " + path.string());
    }
    FeatureMap m(static_cast<int>(header[1]), static_cast<int>(header[2]), static_cast<int>(header[3]),
                 FeatureSource::File);
    const auto bytes = static_cast<std::streamsize>(m.data.size() * sizeof(float));
    in.read(reinterpret_cast<char*>(m.data.data()), bytes);
    if (in.gcount() != bytes) {
        throw DecodeError(Kind::Truncated, "read_fmap: payload truncated in " + path.string());
    }
    for (float v : m.data) {
        if (!std::isfinite(v)) {
            throw DecodeError(Kind::MalformedHeader, "read_fmap: non-finite value in " + path.string());
        }
    }
    return m;
}

void write_fmap(const FeatureMap& map, const std::filesystem::path& path) {
    if (map.data.size() != static_cast<std::size_t>(map.channels) * map.height * map.width) {
        throw InvalidInput("write_fmap: data size does not match the header");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InvalidInput("write_fmap: cannot open " + path.string());
    }
    const std::uint32_t header[4] = {kFmapVersion, static_cast<std::uint32_t>(map.channels),
                                     static_cast<std::uint32_t>(map.height), static_cast<std::uint32_t>(map.width)};
    out.write("FMAP", 4);
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(map.data.data()),
              static_cast<std::streamsize>(map.data.size() * sizeof(float)));
    if (!out) {
        throw InvalidInput("write_fmap: write failed for " + path.string());
    }
}

} // namespace regs::stylize
