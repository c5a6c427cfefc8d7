#pragma once

#include "regs/core/gaussian.hpp"
#include "regs/raster/rasterizer.hpp"

#include <cstddef>
#include <vector>

namespace regs::train {

struct LearningRates {
    double position = 1.6e-4; // multiplied by the scene extent
    double rotation = 1e-3;
    double log_scale = 5e-3;
    double opacity = 5e-2;
    double color = 2.5e-2;

    void validate() const;
};

// First and second moments per parameter group, aligned with the scene.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
    long step = 0;
    std::vector<Vec3> m_position, v_position;
    std::vector<Vec4> m_rotation, v_rotation;
    std::vector<Vec3> m_log_scale, v_log_scale;
    std::vector<double> m_opacity, v_opacity;
    std::vector<Vec3> m_color, v_color;

    explicit AdamState(std::size_t n = 0);
    std::size_t size() const { return m_position.size(); }

    // Re-aligns moments after a control event; origin[i] < 0 starts at zero.
    void remap(const std::vector<std::ptrdiff_t>& origin);
};

// One bias-corrected Adam update of every group; quaternions are
// renormalized afterwards. The position rate is lr.position * extent.
void adam_step(GaussianScene& scene, const GradBuffers& grads, AdamState& state, const LearningRates& lr,
               double extent);

} // namespace regs::train
