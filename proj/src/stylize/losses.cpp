#include "regs/stylize/losses.hpp"

#include "regs/core/error.hpp"

#include <cmath>

namespace regs::stylize {

namespace {

constexpr double kNormFloor = 1e-8;

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void require_same(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b)) {
        throw InvalidInput(std::string(what) + ": image shapes differ");
    }
}

LossValue mean_l1(const Image& a, const Image& b) {
    LossValue out;
    out.grad = Image(a.width, a.height, a.channels);
    const double n = static_cast<double>(a.data.size());
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        out.value += std::abs(d);
        out.grad.data[i] = sgn(d) / n;
    }
    out.value /= n;
    return out;
}

// Per-cell channel means of an RGB image on the stride-8 grid.
std::vector<Vec3> patch_means(const Image& img) {
    const int gw = feature_cells(img.width), gh = feature_cells(img.height);
    std::vector<Vec3> means(static_cast<std::size_t>(gw) * gh, Vec3::Zero());
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            auto& m = means[static_cast<std::size_t>(y / kFeatureStride) * gw + x / kFeatureStride];
            for (int c = 0; c < 3; ++c) {
                m[c] += img.at(x, y, c);
            }
        }
    }
    for (int cy = 0; cy < gh; ++cy) {
        for (int cx = 0; cx < gw; ++cx) {
            const int nx = std::min(img.width, (cx + 1) * kFeatureStride) - cx * kFeatureStride;
            const int ny = std::min(img.height, (cy + 1) * kFeatureStride) - cy * kFeatureStride;
            means[static_cast<std::size_t>(cy) * gw + cx] /= static_cast<double>(nx * ny);
        }
    }
    return means;
}

} // namespace

GuidanceIndexMap match_nearest(const FeatureMap& content, const FeatureMap& ref) {
    if (content.channels != ref.channels) {
        throw InvalidInput("match_nearest: channel counts differ");
    }
    const int c = content.channels;
    auto normalized = [c](const FeatureMap& m) {
        const std::size_t n = m.locations();
        std::vector<double> out(n * static_cast<std::size_t>(c));
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (int k = 0; k < c; ++k) {
                const double v = m.data[k * n + i];
                s += v * v;
            }
            s = std::max(std::sqrt(s), kNormFloor);
            for (int k = 0; k < c; ++k) {
                out[i * c + k] = m.data[k * n + i] / s;
            }
        }
        return out;
    };
    const auto a = normalized(content);
    const auto b = normalized(ref);
    GuidanceIndexMap g;
    g.width = content.width;
    g.height = content.height;
    g.ref_width = ref.width;
    g.ref_height = ref.height;
    g.target.resize(content.locations());
    const std::size_t nr = ref.locations();
    for (std::size_t i = 0; i < content.locations(); ++i) {
        double best = INFINITY;
        int best_j = 0;
        for (std::size_t j = 0; j < nr; ++j) {
            double dot = 0.0;
            for (int k = 0; k < c; ++k) {
                dot += a[i * c + k] * b[j * c + k];
            }
            const double dist = 1.0 - dot;
            if (dist < best) {
                best = dist;
                best_j = static_cast<int>(j);
            }
        }
        g.target[i] = best_j;
    }
    return g;
}

GuidanceIndexMap resample_guidance(const GuidanceIndexMap& g, int width, int height, int ref_width,
                                   int ref_height) {
    GuidanceIndexMap out;
    out.width = width;
    out.height = height;
    out.ref_width = ref_width;
    out.ref_height = ref_height;
    out.target.resize(static_cast<std::size_t>(width) * height);
    auto near = [](int i, int from, int to) { return std::min(to - 1, static_cast<int>((i + 0.5) * to / from)); };
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::size_t src = static_cast<std::size_t>(near(y, height, g.height)) * g.width + near(x, width, g.width);
            const int tx = near(g.target_x(src), g.ref_width, ref_width);
            const int ty = near(g.target_y(src), g.ref_height, ref_height);
            out.target[static_cast<std::size_t>(y) * width + x] = ty * ref_width + tx;
        }
    }
    return out;
}

LossValue loss_view(const Image& render, const PseudoView& pv) {
    require_same(render, pv.image, "loss_view");
    LossValue out;
    out.grad = Image(render.width, render.height, 3);
    const std::size_t covered = pv.covered();
    if (covered == 0) {
        return out;
    }
    const double n = 3.0 * static_cast<double>(covered);
    for (std::size_t p = 0; p < render.pixels(); ++p) {
        if (!pv.mask[p]) {
            continue;
        }
        for (std::size_t c = 0; c < 3; ++c) {
            const double d = render.data[3 * p + c] - pv.image.data[3 * p + c];
            out.value += std::abs(d);
            out.grad.data[3 * p + c] = sgn(d) / n;
        }
    }
    out.value /= n;
    return out;
}

LossValue loss_depth(const Image& d_hat, const Image& d_ref) {
    require_same(d_hat, d_ref, "loss_depth");
    return mean_l1(d_hat, d_ref);
}

LossValue loss_rec(const Image& render, const Image& style_ref) {
    require_same(render, style_ref, "loss_rec");
    return mean_l1(render, style_ref);
}

TcmValue loss_tcm(const std::vector<double>& f_stylized, int channels, const GuidanceIndexMap& guidance,
                  const std::vector<double>& f_styleref) {
    const std::size_t n = guidance.target.size();
    const std::size_t nr = static_cast<std::size_t>(guidance.ref_width) * guidance.ref_height;
    if (f_stylized.size() != n * channels || f_styleref.size() != nr * channels) {
        throw InvalidInput("loss_tcm: feature sizes do not match the guidance grids");
    }
    TcmValue out;
    out.grad_features.assign(f_stylized.size(), 0.0);
    if (n == 0) {
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = static_cast<std::size_t>(guidance.target[i]);
        double aa = 0.0, bb = 0.0, ab = 0.0;
        for (int k = 0; k < channels; ++k) {
            const double a = f_stylized[k * n + i], b = f_styleref[k * nr + j];
            aa += a * a;
            bb += b * b;
            ab += a * b;
        }
        if (std::sqrt(bb) <= kNormFloor) {
            continue;
        }
        const double na = std::sqrt(aa), nb = std::sqrt(bb);
        const double na_f = std::max(na, kNormFloor);
        const double cosv = ab / (na_f * nb);
        out.value += 1.0 - cosv;
        for (int k = 0; k < channels; ++k) {
            const double a = f_stylized[k * n + i], b = f_styleref[k * nr + j];
            double d = b / (na_f * nb);
            if (na > kNormFloor) {
                d -= cosv * a / (na * na);
            }
            out.grad_features[k * n + i] = -d / static_cast<double>(n);
        }
    }
    out.value /= static_cast<double>(n);
    return out;
}

TcmValue loss_tcm(const FeatureMap& f_stylized, const GuidanceIndexMap& guidance, const FeatureMap& f_styleref) {
    if (f_stylized.channels != f_styleref.channels) {
        throw InvalidInput("loss_tcm: channel counts differ");
    }
    return loss_tcm(std::vector<double>(f_stylized.data.begin(), f_stylized.data.end()), f_stylized.channels, guidance,
                    std::vector<double>(f_styleref.data.begin(), f_styleref.data.end()));
}

LossValue loss_color(const Image& render, const Image& style_ref, const GuidanceIndexMap& guidance) {
    const int gw = feature_cells(render.width), gh = feature_cells(render.height);
    if (guidance.width != gw || guidance.height != gh || guidance.ref_width != feature_cells(style_ref.width) ||
        guidance.ref_height != feature_cells(style_ref.height) || render.channels != 3 || style_ref.channels != 3) {
        throw InvalidInput("loss_color: guidance grid does not match the images");
    }
    const auto mr = patch_means(render);
    const auto ms = patch_means(style_ref);
    const double n = static_cast<double>(mr.size());
    LossValue out;
    out.grad = Image(render.width, render.height, 3);
    std::vector<Vec3> dmean(mr.size());
    for (std::size_t i = 0; i < mr.size(); ++i) {
        const Vec3 d = mr[i] - ms[static_cast<std::size_t>(guidance.target[i])];
        out.value += d.squaredNorm();
        dmean[i] = 2.0 * d / n;
    }
    out.value /= n;
    for (int y = 0; y < render.height; ++y) {
        for (int x = 0; x < render.width; ++x) {
            const int cx = x / kFeatureStride, cy = y / kFeatureStride;
            const int nx = std::min(render.width, (cx + 1) * kFeatureStride) - cx * kFeatureStride;
            const int ny = std::min(render.height, (cy + 1) * kFeatureStride) - cy * kFeatureStride;
            const Vec3& g = dmean[static_cast<std::size_t>(cy) * gw + cx];
            for (int c = 0; c < 3; ++c) {
                out.grad.at(x, y, c) = g[c] / static_cast<double>(nx * ny);
            }
        }
    }
    return out;
}

void LossWeights::validate() const {
    if (rec < 0.0 || depth < 0.0 || view < 0.0 || tcm < 0.0 || color < 0.0) {
        throw InvalidInput("loss weights must be non-negative");
    }
}

double total_loss(const LossParts& p, const LossWeights& w) {
    return w.rec * p.rec + w.depth * p.depth + w.view * p.view + w.tcm * p.tcm + w.color * p.color;
}

} // namespace regs::stylize
