#include "regs/core/gaussian.hpp"

#include "regs/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace regs {

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

Mat3 quat_to_rotation(const Vec4& q) {
    const double n = q.norm();
    if (!(n > 0.0)) {
        throw InvalidInput("quat_to_rotation: zero quaternion");
    }
    const Vec4 u = q / n;
    const double w = u[0], x = u[1], y = u[2], z = u[3];
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Vec3 clamped_scale(const Vec3& log_scale) {
    return log_scale.cwiseMax(kMinLogScale).array().exp().matrix();
}

Mat3 build_covariance(const Gaussian3D& g) {
    const Mat3 m = quat_to_rotation(g.rotation) * clamped_scale(g.log_scale).asDiagonal();
    return m * m.transpose();
}

double eval_gaussian(const Gaussian3D& g, const Vec3& x) {
    // Sigma^-1 = R S^-2 R^T avoids inverting a possibly ill-conditioned Sigma.
    const Mat3 r = quat_to_rotation(g.rotation);
    const Vec3 inv_s = clamped_scale(g.log_scale).cwiseInverse();
    const Vec3 local = (r.transpose() * (x - g.position)).cwiseProduct(inv_s);
    return std::exp(-0.5 * local.squaredNorm());
}

Vec3 eval_color(const Gaussian3D& g, const Vec3& view_dir, int degree) {
    if (degree < 0 || degree > g.sh_degree()) {
        throw InvalidInput("eval_color: degree " + std::to_string(degree) + " exceeds stored degree " +
                           std::to_string(g.sh_degree()));
    }
    Vec3 c = Vec3::Constant(0.5) + kShC0 * g.color_dc;
    if (degree == 1) {
        const auto& rest = *g.color_rest;
        c += -kShC1 * view_dir.y() * rest[0] + kShC1 * view_dir.z() * rest[1] - kShC1 * view_dir.x() * rest[2];
    }
    return c.cwiseMax(0.0);
}

int GaussianScene::sh_degree() const { return gaussians.empty() ? 0 : gaussians.front().sh_degree(); }

void GaussianScene::push_back(const Gaussian3D& g) {
    gaussians.push_back(g);
    color_grad_accum.push_back(0.0);
    pos_grad_accum.push_back(0.0);
    contrib_count.push_back(0);
}

void GaussianScene::reset_statistics() {
    color_grad_accum.assign(gaussians.size(), 0.0);
    pos_grad_accum.assign(gaussians.size(), 0.0);
    contrib_count.assign(gaussians.size(), 0);
}

bool GaussianScene::statistics_consistent() const {
    return color_grad_accum.size() == gaussians.size() && pos_grad_accum.size() == gaussians.size() &&
           contrib_count.size() == gaussians.size();
}

double GaussianScene::extent() const {
    if (gaussians.empty()) {
        return 0.0;
    }
    Vec3 lo = gaussians.front().position;
    Vec3 hi = lo;
    for (const auto& g : gaussians) {
        lo = lo.cwiseMin(g.position);
        hi = hi.cwiseMax(g.position);
    }
    return (hi - lo).norm();
}

namespace {

// FNV-1a over 64-bit words.
void mix(std::uint64_t& h, const double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t w;
        std::memcpy(&w, data + i, sizeof(w));
        h ^= w;
        h *= 1099511628211ULL;
    }
}

} // namespace

std::uint64_t parameter_fingerprint(const GaussianScene& scene) {
    std::uint64_t h = 14695981039346656037ULL;
    const double n = static_cast<double>(scene.gaussians.size());
    mix(h, &n, 1);
    for (const auto& g : scene.gaussians) {
        mix(h, g.position.data(), 3);
        mix(h, g.rotation.data(), 4);
        mix(h, g.log_scale.data(), 3);
        mix(h, &g.opacity_logit, 1);
        mix(h, g.color_dc.data(), 3);
        if (g.color_rest) {
            for (const auto& band : *g.color_rest) {
                mix(h, band.data(), 3);
            }
        }
    }
    return h;
}

} // namespace regs
