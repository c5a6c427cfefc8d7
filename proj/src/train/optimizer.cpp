#include "regs/train/optimizer.hpp"

#include "regs/core/error.hpp"

#include <cmath>

namespace regs::train {

void LearningRates::validate() const {
    if (!(position > 0.0 && rotation > 0.0 && log_scale > 0.0 && opacity > 0.0 && color > 0.0)) {
        throw InvalidInput("learning rates must be positive");
    }
}

AdamState::AdamState(std::size_t n)
    : m_position(n, Vec3::Zero()), v_position(n, Vec3::Zero()), m_rotation(n, Vec4::Zero()),
      v_rotation(n, Vec4::Zero()), m_log_scale(n, Vec3::Zero()), v_log_scale(n, Vec3::Zero()), m_opacity(n, 0.0),
      v_opacity(n, 0.0), m_color(n, Vec3::Zero()), v_color(n, Vec3::Zero()) {}

namespace {

template <class T>
void remap_vec(std::vector<T>& v, const std::vector<std::ptrdiff_t>& origin, const T& zero) {
    std::vector<T> out;
    out.reserve(origin.size());
    for (auto o : origin) {
        out.push_back(o < 0 ? zero : v.at(static_cast<std::size_t>(o)));
    }
    v = std::move(out);
}

} // namespace

void AdamState::remap(const std::vector<std::ptrdiff_t>& origin) {
    remap_vec(m_position, origin, Vec3(Vec3::Zero()));
    remap_vec(v_position, origin, Vec3(Vec3::Zero()));
    remap_vec(m_rotation, origin, Vec4(Vec4::Zero()));
    remap_vec(v_rotation, origin, Vec4(Vec4::Zero()));
    remap_vec(m_log_scale, origin, Vec3(Vec3::Zero()));
    remap_vec(v_log_scale, origin, Vec3(Vec3::Zero()));
    remap_vec(m_opacity, origin, 0.0);
    remap_vec(v_opacity, origin, 0.0);
    remap_vec(m_color, origin, Vec3(Vec3::Zero()));
    remap_vec(v_color, origin, Vec3(Vec3::Zero()));
}

void adam_step(GaussianScene& scene, const GradBuffers& grads, AdamState& st, const LearningRates& lr,
               double extent) {
    if (grads.size() != scene.size() || st.size() != scene.size()) {
        throw InvalidState("adam_step: optimizer state, gradients and scene sizes differ");
    }
    ++st.step;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    auto update = [&](double& p, double g, double& m, double& v, double rate) {
        m = st.beta1 * m + (1.0 - st.beta1) * g;
        v = st.beta2 * v + (1.0 - st.beta2) * g * g;
        p -= rate * (m / bc1) / (std::sqrt(v / bc2) + st.eps);
    };
    const double pos_rate = lr.position * extent;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        auto& g = scene.gaussians[i];
        for (int k = 0; k < 3; ++k) {
            update(g.position[k], grads.position[i][k], st.m_position[i][k], st.v_position[i][k], pos_rate);
            update(g.log_scale[k], grads.log_scale[i][k], st.m_log_scale[i][k], st.v_log_scale[i][k], lr.log_scale);
            update(g.color_dc[k], grads.color_dc[i][k], st.m_color[i][k], st.v_color[i][k], lr.color);
        }
        for (int k = 0; k < 4; ++k) {
            update(g.rotation[k], grads.rotation[i][k], st.m_rotation[i][k], st.v_rotation[i][k], lr.rotation);
        }
        update(g.opacity_logit, grads.opacity_logit[i], st.m_opacity[i], st.v_opacity[i], lr.opacity);
        const double qn = g.rotation.norm();
        if (!(qn > 0.0) || !std::isfinite(qn)) {
            throw NumericalError("adam_step: quaternion degenerated for gaussian " + std::to_string(i));
        }
        g.rotation /= qn;
    }
}

} // namespace regs::train
