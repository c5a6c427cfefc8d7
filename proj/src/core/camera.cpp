#include "regs/core/camera.hpp"

#include "regs/core/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace regs {

void Camera::validate() const {
    if (width <= 0 || height <= 0) {
        throw InvalidInput("camera: zero-sized image");
    }
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw InvalidInput("camera: focal lengths must be positive");
    }
    const Mat3 r = rotation();
    if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 || std::abs(r.determinant() - 1.0) > 1e-6) {
        throw InvalidInput("camera: world_to_camera rotation block is not a proper rotation");
    }
}

bool Camera::same_view(const Camera& other) const {
    return width == other.width && height == other.height && fx == other.fx && fy == other.fy && cx == other.cx &&
           cy == other.cy && world_to_camera == other.world_to_camera;
}

Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height, double focal) {
    const Vec3 forward = (target - eye).normalized();
    const Vec3 right = forward.cross(up).normalized();
    const Vec3 down = forward.cross(right);
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fx = focal;
    cam.fy = focal;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height - 1);
    Mat3 r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = forward.transpose();
    cam.world_to_camera.setIdentity();
    cam.world_to_camera.topLeftCorner<3, 3>() = r;
    cam.world_to_camera.topRightCorner<3, 1>() = -r * eye;
    return cam;
}

namespace {

Camera interpolate(const Camera& a, const Camera& b, double t) {
    if (t <= 0.0 || a.same_view(b)) {
        return a;
    }
    if (t >= 1.0) {
        return b;
    }
    const Eigen::Quaterniond qa(Mat3(a.rotation().transpose()));
    const Eigen::Quaterniond qb(Mat3(b.rotation().transpose()));
    const Mat3 cam_to_world = qa.slerp(t, qb).normalized().toRotationMatrix();
    const Vec3 center = (1.0 - t) * a.center() + t * b.center();
    Camera c = a;
    c.fx = (1.0 - t) * a.fx + t * b.fx;
    c.fy = (1.0 - t) * a.fy + t * b.fy;
    c.cx = (1.0 - t) * a.cx + t * b.cx;
    c.cy = (1.0 - t) * a.cy + t * b.cy;
    const Mat3 r = cam_to_world.transpose();
    c.world_to_camera.setIdentity();
    c.world_to_camera.topLeftCorner<3, 3>() = r;
    c.world_to_camera.topRightCorner<3, 1>() = -r * center;
    return c;
}

} // namespace

std::vector<Camera> camera_path(const std::vector<Camera>& keys, int frames) {
    if (keys.empty() || frames < 1) {
        throw InvalidInput("camera_path: need at least one keyframe and one frame");
    }
    for (std::size_t k = 1; k < keys.size(); ++k) {
        if (keys[k].width != keys[0].width || keys[k].height != keys[0].height) {
            throw InvalidInput("camera_path: keyframe resolutions differ");
        }
    }
    std::vector<Camera> out;
    const std::size_t segments = keys.size() - 1;
    for (int i = 0; i < frames; ++i) {
        if (frames == 1 || segments == 0) {
            out.push_back(keys.front());
            continue;
        }
        const double s = static_cast<double>(i) / (frames - 1) * static_cast<double>(segments);
        const std::size_t seg = std::min(segments - 1, static_cast<std::size_t>(s));
        Camera c = interpolate(keys[seg], keys[seg + 1], s - static_cast<double>(seg));
        c.id = i;
        out.push_back(c);
    }
    return out;
}

namespace {

Camera camera_from_json(const nlohmann::json& j) {
    Camera cam;
    try {
        cam.id = j.value("id", 0);
        cam.width = j.at("width").get<int>();
        cam.height = j.at("height").get<int>();
        cam.fx = j.at("fx").get<double>();
        cam.fy = j.at("fy").get<double>();
        cam.cx = j.at("cx").get<double>();
        cam.cy = j.at("cy").get<double>();
        const auto& m = j.at("world_to_camera");
        if (!m.is_array() || m.size() != 16) {
            throw InvalidInput("camera json: world_to_camera needs 16 numbers");
        }
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                cam.world_to_camera(r, c) = m[static_cast<std::size_t>(4 * r + c)].get<double>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("camera json: ") + e.what());
    }
    cam.validate();
    return cam;
}

nlohmann::json camera_to_json(const Camera& cam) {
    nlohmann::json m = nlohmann::json::array();
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            m.push_back(cam.world_to_camera(r, c));
        }
    }
    return {{"id", cam.id}, {"width", cam.width}, {"height", cam.height}, {"fx", cam.fx},
            {"fy", cam.fy}, {"cx", cam.cx},         {"cy", cam.cy},         {"world_to_camera", m}};
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidInput("cannot open " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
}

} // namespace

std::vector<Camera> load_cameras_json(const std::filesystem::path& path) {
    const auto j = read_json(path);
    if (!j.is_array()) {
        throw InvalidInput(path.string() + ": expected an array of cameras");
    }
    std::vector<Camera> cams;
    for (const auto& item : j) {
        cams.push_back(camera_from_json(item));
    }
    return cams;
}

void save_cameras_json(const std::vector<Camera>& cameras, const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& c : cameras) {
        j.push_back(camera_to_json(c));
    }
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

Camera load_camera_json(const std::filesystem::path& path) {
    auto j = read_json(path);
    if (j.is_array()) {
        if (j.size() != 1) {
            throw InvalidInput(path.string() + ": expected exactly one camera");
        }
        j = j[0];
    }
    return camera_from_json(j);
}

} // namespace regs
