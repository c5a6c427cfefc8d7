#pragma once

#include "regs/core/camera.hpp"
#include "regs/core/gaussian.hpp"

#include <cstdint>
#include <string>

namespace regs::eval {

struct GradcheckReport {
    double max_rel_error = 0.0;
    std::string worst; // "<gaussian>.<parameter>[<component>]"
    std::size_t checked = 0;
    double tol = 0.0;
    bool pass = false;
    double seconds = 0.0;
};

// 16x16 view of the unit box used by the default checks.
Camera gradcheck_camera(int width = 16, int height = 16);

// True when every parameter can be perturbed by `step` without crossing a
// discontinuity of the forward pass (1/255 skip, 0.99 clamp, early stop,
// depth-order swap, color clamp).
bool fd_safe(const GaussianScene& scene, const Camera& cam, int degree);

// Random scene of n gaussians in front of cam that satisfies fd_safe.
GaussianScene random_gradcheck_scene(std::uint64_t seed, const Camera& cam, int n, int degree = 0);

// Central differences of L = sum|C - C*| + 0.1 sum|D - D*| against analytic
// backward, for every parameter of every gaussian. Targets are offset from
// the current render so the L1 kinks stay out of reach of the step.
// Relative error is |a - n| / max(|a|, |n|, abs_floor).
GradcheckReport gradcheck(const GaussianScene& scene, const Camera& cam, double tol, double step = 1e-4,
                          int degree = 0, double abs_floor = 1e-6);

} // namespace regs::eval
