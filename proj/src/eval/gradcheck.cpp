#include "regs/eval/gradcheck.hpp"

#include "regs/core/error.hpp"
#include "regs/raster/rasterizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>

namespace regs::eval {

namespace {

constexpr double kLogMargin = 0.01;
constexpr double kDepthGap = 1e-3;
constexpr double kDepthWeight = 0.1;

struct Target {
    Image color;
    Image depth;
};

Image offset_target(const Image& img, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> mag(lo, hi);
    std::bernoulli_distribution sign(0.5);
    Image t = img;
    for (auto& v : t.data) {
        v += sign(rng) ? mag(rng) : -mag(rng);
    }
    return t;
}

double loss(const RenderOutput& out, const Target& t) {
    double l = 0.0;
    for (std::size_t i = 0; i < out.color.data.size(); ++i) {
        l += std::abs(out.color.data[i] - t.color.data[i]);
    }
    for (std::size_t i = 0; i < out.depth.data.size(); ++i) {
        l += kDepthWeight * std::abs(out.depth.data[i] - t.depth.data[i]);
    }
    return l;
}

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// A scalar parameter slot: accessor into the scene and into the gradients.
struct Slot {
    std::string name;
    std::function<double&(GaussianScene&)> param;
    std::function<double(const GradBuffers&)> grad;
};

std::vector<Slot> slots(std::size_t i, int degree) {
    std::vector<Slot> s;
    auto add = [&](std::string name, auto param, auto grad) {
        s.push_back({std::to_string(i) + "." + std::move(name), param, grad});
    };
    for (int k = 0; k < 3; ++k) {
        add("position[" + std::to_string(k) + "]",
            [i, k](GaussianScene& sc) -> double& { return sc.gaussians[i].position[k]; },
            [i, k](const GradBuffers& g) { return g.position[i][k]; });
    }
    for (int k = 0; k < 4; ++k) {
        add("rotation[" + std::to_string(k) + "]",
            [i, k](GaussianScene& sc) -> double& { return sc.gaussians[i].rotation[k]; },
            [i, k](const GradBuffers& g) { return g.rotation[i][k]; });
    }
    for (int k = 0; k < 3; ++k) {
        add("log_scale[" + std::to_string(k) + "]",
            [i, k](GaussianScene& sc) -> double& { return sc.gaussians[i].log_scale[k]; },
            [i, k](const GradBuffers& g) { return g.log_scale[i][k]; });
    }
    add("opacity_logit", [i](GaussianScene& sc) -> double& { return sc.gaussians[i].opacity_logit; },
        [i](const GradBuffers& g) { return g.opacity_logit[i]; });
    for (int k = 0; k < 3; ++k) {
        add("color_dc[" + std::to_string(k) + "]",
            [i, k](GaussianScene& sc) -> double& { return sc.gaussians[i].color_dc[k]; },
            [i, k](const GradBuffers& g) { return g.color_dc[i][k]; });
    }
    if (degree == 1) {
        for (std::size_t b = 0; b < 3; ++b) {
            for (int c = 0; c < 3; ++c) {
                add("color_rest[" + std::to_string(b) + "][" + std::to_string(c) + "]",
                    [i, b, c](GaussianScene& sc) -> double& { return (*sc.gaussians[i].color_rest)[b][c]; },
                    [i, b, c](const GradBuffers& g) { return g.color_rest[i][b][c]; });
            }
        }
    }
    return s;
}

} // namespace

Camera gradcheck_camera(int width, int height) {
    return look_at(Vec3(0.0, 0.0, -4.0), Vec3::Zero(), Vec3(0.0, -1.0, 0.0), width, height, 1.5 * width);
}

bool fd_safe(const GaussianScene& scene, const Camera& cam, int degree) {
    std::vector<Splat2D> splats;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const auto& g = scene.gaussians[i];
        if (cam.to_camera(g.position).z() < 0.05 || std::abs(std::log(255.0 * sigmoid(g.opacity_logit))) < kLogMargin) {
            return false;
        }
        const auto s = project(g, cam, degree, static_cast<std::uint32_t>(i));
        if (!s) {
            continue;
        }
        if (s->rgb.minCoeff() < 0.02) {
            return false;
        }
        splats.push_back(*s);
    }
    std::sort(splats.begin(), splats.end(), [](const Splat2D& a, const Splat2D& b) { return a.depth < b.depth; });
    for (std::size_t k = 1; k < splats.size(); ++k) {
        if (splats[k].depth - splats[k - 1].depth < kDepthGap) {
            return false;
        }
    }
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            double t = 1.0;
            for (const auto& s : splats) {
                const double a = splat_alpha_unclamped(s, x, y);
                if (std::abs(std::log(255.0 * a)) < kLogMargin || std::abs(std::log(a / kMaxAlpha)) < kLogMargin) {
                    return false;
                }
                if (a < kMinAlpha) {
                    continue;
                }
                t *= 1.0 - std::min(a, kMaxAlpha);
                if (std::abs(std::log(t / kMinTransmittance)) < 10 * kLogMargin) {
                    return false;
                }
                if (t < kMinTransmittance) {
                    break;
                }
            }
        }
    }
    return true;
}

GaussianScene random_gradcheck_scene(std::uint64_t seed, const Camera& cam, int n, int degree) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> op(0.1, 0.8);
    std::uniform_real_distribution<double> ls(std::log(0.12), std::log(0.5));
    std::normal_distribution<double> nrm(0.0, 1.0);
    GaussianScene scene;
    for (int i = 0; i < n; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
            Gaussian3D g;
            g.position = Vec3(0.8 * u(rng), 0.8 * u(rng), 0.8 * u(rng));
            g.rotation = Vec4(nrm(rng), nrm(rng), nrm(rng), nrm(rng)).normalized();
            g.log_scale = Vec3(ls(rng), ls(rng), ls(rng));
            g.opacity_logit = logit(op(rng));
            g.color_dc = Vec3(1.2 * u(rng), 1.2 * u(rng), 1.2 * u(rng));
            if (degree == 1) {
                g.color_rest = ShBand1{Vec3(0.2 * u(rng), 0.2 * u(rng), 0.2 * u(rng)),
                                       Vec3(0.2 * u(rng), 0.2 * u(rng), 0.2 * u(rng)),
                                       Vec3(0.2 * u(rng), 0.2 * u(rng), 0.2 * u(rng))};
            }
            scene.push_back(g);
            placed = fd_safe(scene, cam, degree);
            if (!placed) {
                scene.gaussians.pop_back();
                scene.reset_statistics();
            }
        }
        if (!placed) {
            throw InvalidState("random_gradcheck_scene: could not place a gaussian in generic position");
        }
    }
    return scene;
}

GradcheckReport gradcheck(const GaussianScene& scene, const Camera& cam, double tol, double step, int degree,
                          double abs_floor) {
    const auto start = std::chrono::steady_clock::now();
    GradcheckReport rep;
    rep.tol = tol;

    const RenderOutput base = render(scene, cam, degree);
    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
    const Target target{offset_target(base.color, rng, 0.02, 0.2), offset_target(base.depth, rng, 0.05, 0.5)};

    Image dc(cam.width, cam.height, 3);
    Image dd(cam.width, cam.height, 1);
    for (std::size_t i = 0; i < dc.data.size(); ++i) {
        dc.data[i] = sgn(base.color.data[i] - target.color.data[i]);
    }
    for (std::size_t i = 0; i < dd.data.size(); ++i) {
        dd.data[i] = kDepthWeight * sgn(base.depth.data[i] - target.depth.data[i]);
    }
    const GradBuffers grads = backward(scene, cam, base, dc, dd);

    GaussianScene work = scene;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        for (const auto& slot : slots(i, degree)) {
            double& p = slot.param(work);
            const double orig = p;
            p = orig + step;
            const double lp = loss(render(work, cam, degree), target);
            p = orig - step;
            const double lm = loss(render(work, cam, degree), target);
            p = orig;
            const double numeric = (lp - lm) / (2.0 * step);
            const double analytic = slot.grad(grads);
            const double rel =
                std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), abs_floor});
            ++rep.checked;
            if (!(rel <= rep.max_rel_error)) {
                rep.max_rel_error = std::isfinite(rel) ? rel : INFINITY;
                rep.worst = slot.name;
            }
        }
    }
    rep.pass = rep.max_rel_error < tol;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

} // namespace regs::eval
