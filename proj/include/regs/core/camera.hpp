#pragma once

#include "regs/core/gaussian.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace regs {

// Pinhole camera, OpenCV axes (x right, y down, z forward). Pixel centers
// sit at integer coordinates.
struct Camera {
    int id = 0;
    int width = 0;
    int height = 0;
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    Mat4 world_to_camera = Mat4::Identity();

    Mat3 rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
    Vec3 translation() const { return world_to_camera.topRightCorner<3, 1>(); }
    Vec3 center() const { return -rotation().transpose() * translation(); }

    Vec3 to_camera(const Vec3& world) const { return rotation() * world + translation(); }
    Vec3 to_world(const Vec3& cam) const { return rotation().transpose() * (cam - translation()); }

    // Throws InvalidInput when intrinsics or the rotation block are invalid.
    void validate() const;

    bool same_view(const Camera& other) const;
};

// Camera at `eye` looking at `target`; `up` resolves roll.
Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height, double focal);

// `frames` cameras spread uniformly over the polyline through `keys`:
// rotations are slerped, centers and intrinsics interpolated linearly.
// Keyframes are reproduced exactly; a single frame is keys.front().
std::vector<Camera> camera_path(const std::vector<Camera>& keys, int frames);

std::vector<Camera> load_cameras_json(const std::filesystem::path& path);
void save_cameras_json(const std::vector<Camera>& cameras, const std::filesystem::path& path);
Camera load_camera_json(const std::filesystem::path& path);

} // namespace regs
