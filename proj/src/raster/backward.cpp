#include "regs/core/error.hpp"
#include "regs/core/parallel.hpp"
#include "regs/raster/rasterizer.hpp"
#include "regs/raster/render_context.hpp"

#include <algorithm>
#include <cmath>

namespace regs {

GradBuffers::GradBuffers(std::size_t n, bool with_rest)
    : position(n, Vec3::Zero()), rotation(n, Vec4::Zero()), log_scale(n, Vec3::Zero()), opacity_logit(n, 0.0),
      color_dc(n, Vec3::Zero()), color_grad_norm(n, 0.0), pos2d_grad_norm(n, 0.0), contributed(n, 0) {
    if (with_rest) {
        color_rest.assign(n, ShBand1{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()});
    }
}

GradBuffers& GradBuffers::operator+=(const GradBuffers& other) {
    if (other.size() != size()) {
        throw InvalidState("GradBuffers: size mismatch in accumulation");
    }
    if (color_rest.empty() && !other.color_rest.empty()) {
        color_rest.assign(size(), ShBand1{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()});
    }
    for (std::size_t i = 0; i < size(); ++i) {
        position[i] += other.position[i];
        rotation[i] += other.rotation[i];
        log_scale[i] += other.log_scale[i];
        opacity_logit[i] += other.opacity_logit[i];
        color_dc[i] += other.color_dc[i];
        if (!other.color_rest.empty()) {
            for (std::size_t k = 0; k < 3; ++k) {
                color_rest[i][k] += other.color_rest[i][k];
            }
        }
        color_grad_norm[i] = color_dc[i].norm();
        pos2d_grad_norm[i] += other.pos2d_grad_norm[i];
        contributed[i] = static_cast<std::uint8_t>(contributed[i] | other.contributed[i]);
    }
    return *this;
}

namespace {

// Gradient w.r.t. one splat's screen-space quantities, per tile entry.
struct SplatGrad2D {
    double d_mean_x = 0.0;
    double d_mean_y = 0.0;
    double d_conic_a = 0.0;
    double d_conic_b = 0.0;
    double d_conic_c = 0.0;
    double d_alpha = 0.0;
    Vec3 d_rgb = Vec3::Zero();
    double d_depth = 0.0;
    bool touched = false;

    void add(const SplatGrad2D& o) {
        d_mean_x += o.d_mean_x;
        d_mean_y += o.d_mean_y;
        d_conic_a += o.d_conic_a;
        d_conic_b += o.d_conic_b;
        d_conic_c += o.d_conic_c;
        d_alpha += o.d_alpha;
        d_rgb += o.d_rgb;
        d_depth += o.d_depth;
        touched = touched || o.touched;
    }
};

// d R(q) / d q for the unit quaternion (w, x, y, z), contracted with dR.
Vec4 rotation_grad_to_quat(const Vec4& qn, const Mat3& dr) {
    const double w = qn[0], x = qn[1], y = qn[2], z = qn[3];
    Vec4 g;
    g[0] = 2.0 * (-z * dr(0, 1) + y * dr(0, 2) + z * dr(1, 0) - x * dr(1, 2) - y * dr(2, 0) + x * dr(2, 1));
    g[1] = 2.0 * (y * dr(0, 1) + z * dr(0, 2) + y * dr(1, 0) - 2.0 * x * dr(1, 1) - w * dr(1, 2) + z * dr(2, 0) +
                  w * dr(2, 1) - 2.0 * x * dr(2, 2));
    g[2] = 2.0 * (-2.0 * y * dr(0, 0) + x * dr(0, 1) + w * dr(0, 2) + x * dr(1, 0) + z * dr(1, 2) - w * dr(2, 0) +
                  z * dr(2, 1) - 2.0 * y * dr(2, 2));
    g[3] = 2.0 * (-2.0 * z * dr(0, 0) - w * dr(0, 1) + x * dr(0, 2) + w * dr(1, 0) - 2.0 * z * dr(1, 1) + y * dr(1, 2) +
                  x * dr(2, 0) + y * dr(2, 1));
    return g;
}

} // namespace

GradBuffers backward(const GaussianScene& scene, const Camera& cam, const RenderOutput& forward,
                     const Image& dL_dcolor, const Image& dL_ddepth) {
    if (!forward.context) {
        throw InvalidState("backward: forward output carries no render context");
    }
    const RenderContext& ctx = *forward.context;
    if (!ctx.camera.same_view(cam)) {
        throw InvalidState("backward: camera differs from the forward pass");
    }
    if (ctx.scene_size != scene.size() || ctx.scene_fingerprint != parameter_fingerprint(scene)) {
        throw InvalidState("backward: scene changed since the forward pass");
    }
    const int width = cam.width;
    const int height = cam.height;
    if (dL_dcolor.width != width || dL_dcolor.height != height || dL_dcolor.channels != 3) {
        throw InvalidInput("backward: dL/dColor shape mismatch");
    }
    const bool has_depth = !dL_ddepth.data.empty();
    if (has_depth && (dL_ddepth.width != width || dL_ddepth.height != height || dL_ddepth.channels != 1)) {
        throw InvalidInput("backward: dL/dDepth shape mismatch");
    }

    const std::size_t n_tiles = static_cast<std::size_t>(ctx.tiles_x) * ctx.tiles_y;
    std::vector<SplatGrad2D> entry_grads(ctx.tile_entries.size());

    parallel_for(n_tiles, [&](std::size_t tile) {
        const int tx = static_cast<int>(tile) % ctx.tiles_x;
        const int ty = static_cast<int>(tile) / ctx.tiles_x;
        const std::size_t begin = ctx.tile_offsets[tile];
        const int px_end = std::min(width, (tx + 1) * kTileSize);
        const int py_end = std::min(height, (ty + 1) * kTileSize);
        for (int py = ty * kTileSize; py < py_end; ++py) {
            for (int px = tx * kTileSize; px < px_end; ++px) {
                const std::uint32_t last = ctx.n_contrib[static_cast<std::size_t>(py) * width + px];
                const Vec3 dc(dL_dcolor.at(px, py, 0), dL_dcolor.at(px, py, 1), dL_dcolor.at(px, py, 2));
                const double dd = has_depth ? dL_ddepth.at(px, py) : 0.0;
                double t = forward.final_transmittance.at(px, py);
                Vec3 behind_c = Vec3::Zero(); // color blended behind the current splat
                double behind_d = 0.0;
                for (std::uint32_t k = last; k-- > 0;) {
                    const Splat2D& s = ctx.splats[ctx.tile_entries[begin + k]];
                    const double dx = px - s.mean2d.x();
                    const double dy = py - s.mean2d.y();
                    const double power =
                        -0.5 * (s.conic[0] * dx * dx + 2.0 * s.conic[1] * dx * dy + s.conic[2] * dy * dy);
                    const double gauss = std::exp(power);
                    const double raw = s.base_opacity * gauss;
                    const double a = std::min(kMaxAlpha, raw);
                    if (a < kMinAlpha) {
                        continue;
                    }
                    t /= (1.0 - a);
                    const double w = a * t;
                    SplatGrad2D& g = entry_grads[begin + k];
                    g.touched = true;
                    g.d_rgb += w * dc;
                    g.d_depth += w * dd;
                    const double d_a = t * ((s.rgb - behind_c).dot(dc) + (s.depth - behind_d) * dd);
                    behind_c = a * s.rgb + (1.0 - a) * behind_c;
                    behind_d = a * s.depth + (1.0 - a) * behind_d;
                    if (raw > kMaxAlpha) {
                        continue;
                    }
                    g.d_alpha += d_a * gauss;
                    const double d_power = d_a * s.base_opacity * gauss;
                    g.d_mean_x += d_power * (s.conic[0] * dx + s.conic[1] * dy);
                    g.d_mean_y += d_power * (s.conic[1] * dx + s.conic[2] * dy);
                    g.d_conic_a += -0.5 * d_power * dx * dx;
                    g.d_conic_b += -d_power * dx * dy;
                    g.d_conic_c += -0.5 * d_power * dy * dy;
                }
            }
        }
    });

    // Fixed-order reduction over tiles keeps results independent of the
    // worker count.
    std::vector<SplatGrad2D> splat_grads(ctx.splats.size());
    for (std::size_t e = 0; e < ctx.tile_entries.size(); ++e) {
        splat_grads[ctx.tile_entries[e]].add(entry_grads[e]);
    }

    const bool with_rest = ctx.degree == 1;
    GradBuffers out(scene.size(), with_rest);
    const Mat3 w = cam.rotation();
    const Vec3 cam_center = cam.center();

    parallel_for(ctx.splats.size(), [&](std::size_t si) {
        const Splat2D& s = ctx.splats[si];
        const SplatGrad2D& g2 = splat_grads[si];
        const std::size_t gid = s.gaussian_id;
        if (!g2.touched) {
            return;
        }
        const Gaussian3D& g = scene.gaussians[gid];
        out.contributed[gid] = 1;

        Vec3 d_mu = Vec3::Zero();

        // Color.
        Vec3 d_rgb = g2.d_rgb;
        for (int ch = 0; ch < 3; ++ch) {
            if (s.rgb_clamped & (1u << ch)) {
                d_rgb[ch] = 0.0;
            }
        }
        out.color_dc[gid] = kShC0 * d_rgb;
        if (with_rest) {
            const Vec3 diff = g.position - cam_center;
            const double len = diff.norm();
            const Vec3 dir = diff / len;
            const auto& rest = *g.color_rest;
            out.color_rest[gid][0] = -kShC1 * dir.y() * d_rgb;
            out.color_rest[gid][1] = kShC1 * dir.z() * d_rgb;
            out.color_rest[gid][2] = -kShC1 * dir.x() * d_rgb;
            const Vec3 d_dir(-kShC1 * rest[2].dot(d_rgb), -kShC1 * rest[0].dot(d_rgb), kShC1 * rest[1].dot(d_rgb));
            d_mu += (d_dir - dir * dir.dot(d_dir)) / len;
        }
        out.color_grad_norm[gid] = out.color_dc[gid].norm();

        // Opacity.
        const double alpha = s.base_opacity;
        out.opacity_logit[gid] = g2.d_alpha * alpha * (1.0 - alpha);

        // Conic -> 2D covariance.
        Mat2 conic;
        conic << s.conic[0], s.conic[1], s.conic[1], s.conic[2];
        Mat2 d_conic;
        d_conic << g2.d_conic_a, 0.5 * g2.d_conic_b, 0.5 * g2.d_conic_b, g2.d_conic_c;
        const Mat2 d_cov2d = -conic * d_conic * conic;

        // Camera-space mean and Jacobian.
        const Vec3 p = w * g.position + cam.translation();
        const double x = p.x(), y = p.y(), z = p.z();
        const double fx = cam.fx, fy = cam.fy;
        Eigen::Matrix<double, 2, 3> jac;
        jac << fx / z, 0.0, -fx * x / (z * z), 0.0, fy / z, -fy * y / (z * z);
        const Mat3 sigma = build_covariance(g);
        const Mat3 cov_cam = w * sigma * w.transpose();
        const Eigen::Matrix<double, 2, 3> d_jac = 2.0 * d_cov2d * jac * cov_cam;
        const Mat3 d_cov_cam = jac.transpose() * d_cov2d * jac;

        Vec3 d_p;
        d_p.x() = g2.d_mean_x * fx / z + d_jac(0, 2) * (-fx / (z * z));
        d_p.y() = g2.d_mean_y * fy / z + d_jac(1, 2) * (-fy / (z * z));
        d_p.z() = -g2.d_mean_x * fx * x / (z * z) - g2.d_mean_y * fy * y / (z * z) + g2.d_depth +
                  d_jac(0, 0) * (-fx / (z * z)) + d_jac(0, 2) * (2.0 * fx * x / (z * z * z)) +
                  d_jac(1, 1) * (-fy / (z * z)) + d_jac(1, 2) * (2.0 * fy * y / (z * z * z));
        d_mu += w.transpose() * d_p;
        out.position[gid] = d_mu;
        out.pos2d_grad_norm[gid] = std::hypot(g2.d_mean_x * 0.5 * width, g2.d_mean_y * 0.5 * height);

        // 3D covariance -> rotation and scale.
        const Mat3 d_sigma = w.transpose() * d_cov_cam * w;
        const Vec4 qn = g.rotation / g.rotation.norm();
        const Mat3 rot = quat_to_rotation(g.rotation);
        const Vec3 scale = clamped_scale(g.log_scale);
        const Mat3 rs = rot * scale.asDiagonal();
        const Mat3 d_rs = 2.0 * d_sigma * rs;
        const Mat3 d_rot = d_rs * scale.asDiagonal();
        Vec3 d_log_scale;
        for (int j = 0; j < 3; ++j) {
            const double d_s = d_rs.col(j).dot(rot.col(j));
            d_log_scale[j] = g.log_scale[j] > kMinLogScale ? d_s * scale[j] : 0.0;
        }
        out.log_scale[gid] = d_log_scale;
        const Vec4 d_qn = rotation_grad_to_quat(qn, d_rot);
        out.rotation[gid] = (d_qn - qn * qn.dot(d_qn)) / g.rotation.norm();
    });
    return out;
}

} // namespace regs
