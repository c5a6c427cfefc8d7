#pragma once

#include "regs/core/camera.hpp"
#include "regs/core/gaussian.hpp"
#include "regs/core/image.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace regs {

inline constexpr double kNearPlane = 0.01;
inline constexpr double kLowPass = 0.3;
inline constexpr double kMaxAlpha = 0.99;
inline constexpr double kMinAlpha = 1.0 / 255.0;
inline constexpr double kMinTransmittance = 1e-4;
inline constexpr int kTileSize = 16;

// A gaussian after EWA projection into one camera.
struct Splat2D {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity(); // includes the low-pass dilation
    Vec3 conic = Vec3::Zero();     // inverse of cov2d as (a, b, c)
    double depth = 0.0;            // camera-space z
    std::uint32_t gaussian_id = 0;
    double base_opacity = 0.0;
    Vec3 rgb = Vec3::Zero();
    std::uint8_t rgb_clamped = 0; // bit c set when channel c hit the >= 0 clamp
    int radius = 0;
    int rect_x0 = 0, rect_y0 = 0, rect_x1 = 0, rect_y1 = 0; // inclusive pixel bounds
};

// Projects g into cam. Returns nullopt when g is behind the near plane,
// cannot reach 1/255 opacity anywhere, or its footprint misses the image.
// The footprint radius is max(3 sigma, the radius where alpha * G falls to
// 1/255), so every pixel outside the rectangle is guaranteed to skip it.
std::optional<Splat2D> project(const Gaussian3D& g, const Camera& cam, int degree = 0, std::uint32_t id = 0);

// Alpha' of a splat at pixel center (x, y) before the 0.99 clamp.
double splat_alpha_unclamped(const Splat2D& s, double x, double y);

struct RenderContext;

struct RenderOutput {
    Image color;               // H x W x 3
    Image depth;               // H x W, raw alpha-blended z
    Image final_transmittance; // H x W
    std::shared_ptr<const RenderContext> context;

    // Gaussian ids that were blended into pixel (x, y), front to back.
    std::vector<std::uint32_t> contributors(int x, int y) const;
    std::size_t visible_splats() const;
};

// Tiled forward pass. Splats are globally sorted by (depth, gaussian_id);
// each 16x16 tile blends the subset overlapping it in that order.
RenderOutput render(const GaussianScene& scene, const Camera& cam, int degree = 0);

struct GradBuffers {
    std::vector<Vec3> position;
    std::vector<Vec4> rotation;
    std::vector<Vec3> log_scale;
    std::vector<double> opacity_logit;
    std::vector<Vec3> color_dc;
    std::vector<ShBand1> color_rest; // empty unless rendered at degree 1
    std::vector<double> color_grad_norm;
    // |dL/d mean2d| in normalized device units (pixel gradient * size / 2).
    std::vector<double> pos2d_grad_norm;
    std::vector<std::uint8_t> contributed;

    explicit GradBuffers(std::size_t n = 0, bool with_rest = false);
    std::size_t size() const { return position.size(); }

    // Parameter-wise sum; norms and contributed flags are recomputed/merged.
    GradBuffers& operator+=(const GradBuffers& other);
};

// Analytic gradients of a scalar loss given dL/dColor (H x W x 3) and
// dL/dDepth (H x W, may be empty). `forward` must come from render() on the
// same scene parameters and camera; otherwise throws InvalidState.
GradBuffers backward(const GaussianScene& scene, const Camera& cam, const RenderOutput& forward,
                     const Image& dL_dcolor, const Image& dL_ddepth);

} // namespace regs
