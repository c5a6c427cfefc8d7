#include "regs/raster/rasterizer.hpp"

#include "regs/core/error.hpp"
#include "regs/core/parallel.hpp"
#include "regs/raster/render_context.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace regs {

std::optional<Splat2D> project(const Gaussian3D& g, const Camera& cam, int degree, std::uint32_t id) {
    const Mat3 w = cam.rotation();
    const Vec3 p = w * g.position + cam.translation();
    const double z = p.z();
    if (z <= kNearPlane) {
        return std::nullopt;
    }
    const double alpha = sigmoid(g.opacity_logit);
    if (alpha < kMinAlpha) {
        return std::nullopt;
    }

    Splat2D s;
    s.gaussian_id = id;
    s.depth = z;
    s.base_opacity = alpha;
    s.mean2d = Vec2(cam.fx * p.x() / z + cam.cx, cam.fy * p.y() / z + cam.cy);

    Eigen::Matrix<double, 2, 3> jac;
    jac << cam.fx / z, 0.0, -cam.fx * p.x() / (z * z), 0.0, cam.fy / z, -cam.fy * p.y() / (z * z);
    const Mat3 cov_cam = w * build_covariance(g) * w.transpose();
    s.cov2d = jac * cov_cam * jac.transpose() + kLowPass * Mat2::Identity();

    const double a = s.cov2d(0, 0), b = s.cov2d(0, 1), c = s.cov2d(1, 1);
    const double det = a * c - b * b;
    if (!(det > 0.0)) {
        return std::nullopt;
    }
    s.conic = Vec3(c / det, -b / det, a / det);

    const double mid = 0.5 * (a + c);
    const double lambda_max = mid + std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    const double r_alpha = std::sqrt(2.0 * std::max(0.0, std::log(255.0 * alpha)) * lambda_max);
    const double r = std::ceil(std::max(3.0 * std::sqrt(lambda_max), r_alpha));
    // Clamp before converting so far-off-screen splats cannot overflow int.
    const double lim = 1e7;
    const double x0 = std::ceil(std::clamp(s.mean2d.x() - r, -lim, lim));
    const double x1 = std::floor(std::clamp(s.mean2d.x() + r, -lim, lim));
    const double y0 = std::ceil(std::clamp(s.mean2d.y() - r, -lim, lim));
    const double y1 = std::floor(std::clamp(s.mean2d.y() + r, -lim, lim));
    s.rect_x0 = std::max(0, static_cast<int>(x0));
    s.rect_x1 = std::min(cam.width - 1, static_cast<int>(x1));
    s.rect_y0 = std::max(0, static_cast<int>(y0));
    s.rect_y1 = std::min(cam.height - 1, static_cast<int>(y1));
    if (!std::isfinite(r) || s.rect_x0 > s.rect_x1 || s.rect_y0 > s.rect_y1) {
        return std::nullopt;
    }
    s.radius = static_cast<int>(std::min(r, lim));

    Vec3 rgb = Vec3::Constant(0.5) + kShC0 * g.color_dc;
    if (degree == 1) {
        const Vec3 dir = (g.position - cam.center()).normalized();
        const auto& rest = *g.color_rest;
        rgb += -kShC1 * dir.y() * rest[0] + kShC1 * dir.z() * rest[1] - kShC1 * dir.x() * rest[2];
    }
    for (int ch = 0; ch < 3; ++ch) {
        if (rgb[ch] < 0.0) {
            rgb[ch] = 0.0;
            s.rgb_clamped |= static_cast<std::uint8_t>(1u << ch);
        }
    }
    s.rgb = rgb;
    return s;
}

double splat_alpha_unclamped(const Splat2D& s, double x, double y) {
    const double dx = x - s.mean2d.x();
    const double dy = y - s.mean2d.y();
    const double power = -0.5 * (s.conic[0] * dx * dx + 2.0 * s.conic[1] * dx * dy + s.conic[2] * dy * dy);
    return s.base_opacity * std::exp(power);
}

std::vector<std::uint32_t> RenderOutput::contributors(int x, int y) const {
    std::vector<std::uint32_t> ids;
    if (!context) {
        return ids;
    }
    const auto& ctx = *context;
    const int tile = (y / kTileSize) * ctx.tiles_x + (x / kTileSize);
    const auto begin = ctx.tile_offsets[static_cast<std::size_t>(tile)];
    const auto last = ctx.n_contrib[static_cast<std::size_t>(y) * ctx.camera.width + x];
    for (std::uint32_t k = 0; k < last; ++k) {
        const auto& s = ctx.splats[ctx.tile_entries[begin + k]];
        const double a = std::min(kMaxAlpha, splat_alpha_unclamped(s, x, y));
        if (a >= kMinAlpha) {
            ids.push_back(s.gaussian_id);
        }
    }
    return ids;
}

std::size_t RenderOutput::visible_splats() const { return context ? context->splats.size() : 0; }

RenderOutput render(const GaussianScene& scene, const Camera& cam, int degree) {
    cam.validate();
    if (degree < 0 || degree > 1 || (degree > scene.sh_degree() && !scene.empty())) {
        throw InvalidInput("render: SH degree " + std::to_string(degree) + " not available");
    }
    const int width = cam.width;
    const int height = cam.height;

    auto ctx = std::make_shared<RenderContext>();
    ctx->camera = cam;
    ctx->degree = degree;
    ctx->scene_fingerprint = parameter_fingerprint(scene);
    ctx->scene_size = scene.size();
    ctx->tiles_x = (width + kTileSize - 1) / kTileSize;
    ctx->tiles_y = (height + kTileSize - 1) / kTileSize;
    const std::size_t n_tiles = static_cast<std::size_t>(ctx->tiles_x) * ctx->tiles_y;

    std::vector<std::optional<Splat2D>> projected(scene.size());
    parallel_for(scene.size(), [&](std::size_t i) {
        projected[i] = project(scene.gaussians[i], cam, degree, static_cast<std::uint32_t>(i));
    });
    for (auto& p : projected) {
        if (p) {
            ctx->splats.push_back(*p);
        }
    }
    std::sort(ctx->splats.begin(), ctx->splats.end(), [](const Splat2D& l, const Splat2D& r) {
        return l.depth < r.depth || (l.depth == r.depth && l.gaussian_id < r.gaussian_id);
    });

    // CSR tile lists, filled in sorted order so each list is depth-ordered.
    std::vector<std::uint32_t> counts(n_tiles, 0);
    auto tile_span = [&](const Splat2D& s) {
        return std::array<int, 4>{s.rect_x0 / kTileSize, s.rect_x1 / kTileSize, s.rect_y0 / kTileSize,
                                  s.rect_y1 / kTileSize};
    };
    for (const auto& s : ctx->splats) {
        const auto [tx0, tx1, ty0, ty1] = tile_span(s);
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) {
                ++counts[static_cast<std::size_t>(ty) * ctx->tiles_x + tx];
            }
        }
    }
    ctx->tile_offsets.assign(n_tiles + 1, 0);
    for (std::size_t t = 0; t < n_tiles; ++t) {
        ctx->tile_offsets[t + 1] = ctx->tile_offsets[t] + counts[t];
    }
    ctx->tile_entries.resize(ctx->tile_offsets.back());
    std::vector<std::size_t> cursor(ctx->tile_offsets.begin(), ctx->tile_offsets.end() - 1);
    for (std::uint32_t si = 0; si < ctx->splats.size(); ++si) {
        const auto [tx0, tx1, ty0, ty1] = tile_span(ctx->splats[si]);
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) {
                ctx->tile_entries[cursor[static_cast<std::size_t>(ty) * ctx->tiles_x + tx]++] = si;
            }
        }
    }

    RenderOutput out;
    out.color = Image(width, height, 3);
    out.depth = Image(width, height, 1);
    out.final_transmittance = Image(width, height, 1, 1.0);
    ctx->n_contrib.assign(out.depth.pixels(), 0);

    parallel_for(n_tiles, [&](std::size_t tile) {
        const int tx = static_cast<int>(tile) % ctx->tiles_x;
        const int ty = static_cast<int>(tile) / ctx->tiles_x;
        const std::size_t begin = ctx->tile_offsets[tile];
        const std::size_t end = ctx->tile_offsets[tile + 1];
        const int px_end = std::min(width, (tx + 1) * kTileSize);
        const int py_end = std::min(height, (ty + 1) * kTileSize);
        for (int py = ty * kTileSize; py < py_end; ++py) {
            for (int px = tx * kTileSize; px < px_end; ++px) {
                double t = 1.0;
                Vec3 c = Vec3::Zero();
                double d = 0.0;
                std::uint32_t processed = 0;
                for (std::size_t k = begin; k < end; ++k) {
                    const Splat2D& s = ctx->splats[ctx->tile_entries[k]];
                    processed = static_cast<std::uint32_t>(k - begin + 1);
                    const double a = std::min(kMaxAlpha, splat_alpha_unclamped(s, px, py));
                    if (a < kMinAlpha) {
                        continue;
                    }
                    const double w = a * t;
                    c += w * s.rgb;
                    d += w * s.depth;
                    t *= 1.0 - a;
                    if (t < kMinTransmittance) {
                        break;
                    }
                }
                for (int ch = 0; ch < 3; ++ch) {
                    out.color.at(px, py, ch) = c[ch];
                }
                out.depth.at(px, py) = d;
                out.final_transmittance.at(px, py) = t;
                ctx->n_contrib[static_cast<std::size_t>(py) * width + px] = processed;
            }
        }
    });

    out.context = std::move(ctx);
    return out;
}

} // namespace regs
