#include "regs/stylize/pseudo_view.hpp"

#include "regs/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace regs::stylize {

std::size_t PseudoView::covered() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1)); }

Image expected_depth(const Image& depth, const Image& transmittance, double min_opacity) {
    if (!depth.same_shape(transmittance) || depth.channels != 1) {
        throw InvalidInput("expected_depth: depth and transmittance shapes differ");
    }
    Image out(depth.width, depth.height, 1);
    for (std::size_t i = 0; i < depth.data.size(); ++i) {
        const double a = 1.0 - transmittance.data[i];
        out.data[i] = a >= min_opacity ? depth.data[i] / a : 0.0;
    }
    return out;
}

PseudoView synthesize_pseudo_view(const Image& ref_img, const Image& ref_depth, const Camera& ref_pose,
                                  const Camera& target_pose, const Image& target_depth, double extent) {
    if (ref_img.channels != 3 || ref_depth.channels != 1 || ref_img.width != ref_depth.width ||
        ref_img.height != ref_depth.height || ref_img.width != ref_pose.width || ref_img.height != ref_pose.height) {
        throw InvalidInput("synthesize_pseudo_view: reference image, depth and camera resolutions differ");
    }
    if (target_depth.channels != 1 || target_depth.width != target_pose.width ||
        target_depth.height != target_pose.height) {
        throw InvalidInput("synthesize_pseudo_view: target depth does not match the target camera");
    }
    const int w = target_pose.width;
    const int h = target_pose.height;
    PseudoView pv;
    pv.pose = target_pose;
    pv.image = Image(w, h, 3);
    pv.mask.assign(pv.image.pixels(), 0);
    std::vector<double> zbuf(pv.image.pixels(), std::numeric_limits<double>::infinity());
    const double eps_abs = kVisibilityAbs * extent;

    for (int y = 0; y < ref_img.height; ++y) {
        for (int x = 0; x < ref_img.width; ++x) {
            const double d = ref_depth.at(x, y);
            if (!(d > 0.0)) {
                continue;
            }
            const Vec3 cam_pt((x - ref_pose.cx) / ref_pose.fx * d, (y - ref_pose.cy) / ref_pose.fy * d, d);
            const Vec3 p = target_pose.to_camera(ref_pose.to_world(cam_pt));
            if (p.z() <= 0.0) {
                continue;
            }
            const double u = target_pose.fx * p.x() / p.z() + target_pose.cx;
            const double v = target_pose.fy * p.y() / p.z() + target_pose.cy;
            const long px = std::lround(u);
            const long py = std::lround(v);
            if (px < 0 || py < 0 || px >= w || py >= h) {
                continue;
            }
            const int tx = static_cast<int>(px), ty = static_cast<int>(py);
            if (p.z() > target_depth.at(tx, ty) * (1.0 + kVisibilityRel) + eps_abs) {
                continue;
            }
            const std::size_t idx = static_cast<std::size_t>(ty) * w + tx;
            if (p.z() < zbuf[idx]) {
                zbuf[idx] = p.z();
                pv.mask[idx] = 1;
                for (int c = 0; c < 3; ++c) {
                    pv.image.at(tx, ty, c) = ref_img.at(x, y, c);
                }
            }
        }
    }
    return pv;
}

} // namespace regs::stylize
