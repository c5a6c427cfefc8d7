#pragma once

#include "regs/core/camera.hpp"
#include "regs/core/gaussian.hpp"

#include <cmath>
#include <random>

namespace regs::oracle {

// Unconstrained random scene: tiny to wide splats, full opacity range,
// some behind the camera or off screen.
inline GaussianScene random_render_scene(std::mt19937_64& rng, int n, int degree = 0) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> nrm(0.0, 1.0);
    GaussianScene scene;
    for (int i = 0; i < n; ++i) {
        Gaussian3D g;
        g.position = Vec3(1.5 * u(rng), 1.5 * u(rng), 2.0 * u(rng));
        if (i % 11 == 10) {
            g.position.z() = -6.0; // behind the camera at z = -4
        }
        g.rotation = Vec4(nrm(rng), nrm(rng), nrm(rng), nrm(rng)).normalized();
        g.log_scale = Vec3(-3.5 + 3.0 * (u(rng) + 1.0) / 2.0, -3.5 + 3.0 * (u(rng) + 1.0) / 2.0,
                           -3.5 + 3.0 * (u(rng) + 1.0) / 2.0);
        g.opacity_logit = 5.0 * u(rng);
        g.color_dc = Vec3(1.5 * u(rng), 1.5 * u(rng), 1.5 * u(rng));
        if (degree == 1) {
            g.color_rest = ShBand1{Vec3(0.5 * u(rng), 0.5 * u(rng), 0.5 * u(rng)),
                                   Vec3(0.5 * u(rng), 0.5 * u(rng), 0.5 * u(rng)),
                                   Vec3(0.5 * u(rng), 0.5 * u(rng), 0.5 * u(rng))};
        }
        scene.push_back(g);
    }
    return scene;
}

inline Camera random_render_camera(std::mt19937_64& rng, int width, int height) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return look_at(Vec3(0.8 * u(rng), 0.8 * u(rng), -4.0), Vec3(0.2 * u(rng), 0.2 * u(rng), 0.0), Vec3(0, -1, 0),
                   width, height, 1.2 * width);
}

} // namespace regs::oracle
