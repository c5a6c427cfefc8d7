#pragma once

#include "regs/core/camera.hpp"
#include "regs/core/image.hpp"

#include <cstdint>
#include <vector>

namespace regs::stylize {

inline constexpr double kVisibilityRel = 0.01;
inline constexpr double kVisibilityAbs = 1e-3; // times scene extent

struct PseudoView {
    Image image;                    // H x W x 3, zero where mask is false
    std::vector<std::uint8_t> mask; // H x W
    Camera pose;

    std::size_t covered() const;
};

// Lifts every reference pixel with depth > 0 to world space, reprojects it
// into target_pose and keeps it at the nearest pixel when its depth is
// <= target_depth * (1 + rel) + abs * extent. Nearest depth wins collisions.
// Alpha-blended depth divided by accumulated opacity 1 - T; zero where the
// accumulated opacity is below min_opacity.
Image expected_depth(const Image& depth, const Image& transmittance, double min_opacity = 0.5);

PseudoView synthesize_pseudo_view(const Image& ref_img, const Image& ref_depth, const Camera& ref_pose,
                                  const Camera& target_pose, const Image& target_depth, double extent);

} // namespace regs::stylize
