#include "regs/eval/toy.hpp"

#include "regs/core/error.hpp"

#include <cmath>
#include <numbers>

namespace regs::eval {

QuadTexture checker_texture(int cells, const Vec3& c0, const Vec3& c1) {
    if (cells < 1) {
        throw InvalidInput("checker_texture: cells must be >= 1");
    }
    return [=](double x, double y) {
        const int i = std::min(cells - 1, static_cast<int>(std::floor((x + 1.0) * 0.5 * cells)));
        const int j = std::min(cells - 1, static_cast<int>(std::floor((y + 1.0) * 0.5 * cells)));
        return ((i + j) % 2 == 0) ? c0 : c1;
    };
}

QuadTexture constant_texture(const Vec3& c) {
    return [=](double, double) { return c; };
}

Image render_quad(const QuadTexture& tex, const Camera& cam, int supersample) {
    if (supersample < 1) {
        throw InvalidInput("render_quad: supersample must be >= 1");
    }
    Image img(cam.width, cam.height, 3);
    const Vec3 origin = cam.center();
    const Mat3 rt = cam.rotation().transpose();
    const double n = static_cast<double>(supersample * supersample);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            Vec3 acc = Vec3::Zero();
            for (int sy = 0; sy < supersample; ++sy) {
                for (int sx = 0; sx < supersample; ++sx) {
                    const double px = x - 0.5 + (sx + 0.5) / supersample;
                    const double py = y - 0.5 + (sy + 0.5) / supersample;
                    const Vec3 dir = rt * Vec3((px - cam.cx) / cam.fx, (py - cam.cy) / cam.fy, 1.0);
                    if (std::abs(dir.z()) < 1e-12) {
                        continue;
                    }
                    const double t = -origin.z() / dir.z();
                    if (t <= 0.0) {
                        continue;
                    }
                    const Vec3 hit = origin + t * dir;
                    if (std::abs(hit.x()) <= 1.0 && std::abs(hit.y()) <= 1.0) {
                        acc += tex(hit.x(), hit.y());
                    }
                }
            }
            for (int c = 0; c < 3; ++c) {
                img.at(x, y, c) = acc[c] / n;
            }
        }
    }
    return img;
}

namespace {

Camera arc_camera(const ToyOptions& opt, double azimuth_deg, double elevation_deg, int id) {
    const double a = azimuth_deg * std::numbers::pi / 180.0;
    const double e = elevation_deg * std::numbers::pi / 180.0;
    const Vec3 eye(opt.distance * std::sin(a) * std::cos(e), opt.distance * std::sin(e),
                   -opt.distance * std::cos(a) * std::cos(e));
    Camera cam = look_at(eye, Vec3::Zero(), Vec3(0.0, -1.0, 0.0), opt.size, opt.size, opt.focal);
    cam.id = id;
    return cam;
}

} // namespace

std::vector<Camera> toy_train_cameras(const ToyOptions& opt) {
    std::vector<Camera> cams;
    for (int k = 0; k < opt.train_views; ++k) {
        const double f = opt.train_views > 1 ? static_cast<double>(k) / (opt.train_views - 1) : 0.5;
        cams.push_back(arc_camera(opt, -0.5 * opt.arc_degrees + f * opt.arc_degrees, (k % 2 == 0) ? 10.0 : -10.0, k));
    }
    return cams;
}

std::vector<Camera> toy_test_cameras(const ToyOptions& opt) {
    std::vector<Camera> cams;
    for (int k = 0; k < opt.test_views; ++k) {
        const double f = (k + 0.5) / opt.test_views;
        cams.push_back(arc_camera(opt, -0.5 * opt.arc_degrees + f * opt.arc_degrees, 0.0, 100 + k));
    }
    return cams;
}

Camera toy_reference_camera(const ToyOptions& opt) { return arc_camera(opt, 0.0, 0.0, 200); }

ToyDataset make_toy_dataset(const QuadTexture& tex, const ToyOptions& opt) {
    ToyDataset ds;
    ds.train_cameras = toy_train_cameras(opt);
    ds.test_cameras = toy_test_cameras(opt);
    for (const auto& c : ds.train_cameras) {
        ds.train_images.push_back(render_quad(tex, c));
    }
    for (const auto& c : ds.test_cameras) {
        ds.test_images.push_back(render_quad(tex, c));
    }
    return ds;
}

QuadTexture ramp_texture() {
    return [](double x, double y) {
        const double u = 0.5 * (x + 1.0), v = 0.5 * (y + 1.0);
        return Vec3(0.2 + 0.6 * u, 0.2 + 0.6 * v, 0.8 - 0.3 * u - 0.3 * v);
    };
}

QuadTexture toy_content_texture() {
    const auto ramp = ramp_texture();
    const auto checker = checker_texture(4, Vec3::Constant(1.0), Vec3::Constant(-1.0));
    return [=](double x, double y) { return (ramp(x, y) + 0.15 * checker(x, y)).eval(); };
}

} // namespace regs::eval
