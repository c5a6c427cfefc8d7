#pragma once

#include "regs/core/camera.hpp"
#include "regs/core/image.hpp"

#include <functional>
#include <vector>

namespace regs::eval {

// Color of the quad z = 0, |x| <= 1, |y| <= 1 at (x, y).
using QuadTexture = std::function<Vec3(double x, double y)>;

QuadTexture checker_texture(int cells, const Vec3& c0, const Vec3& c1);
QuadTexture constant_texture(const Vec3& c);

// Ray-traced quad over a black background, averaging supersample^2 rays
// per pixel.
Image render_quad(const QuadTexture& tex, const Camera& cam, int supersample = 4);

struct ToyOptions {
    int size = 64;
    double focal = 64.0;
    double distance = 3.0;
    int train_views = 8;
    int test_views = 4;
    double arc_degrees = 80.0;
};

struct ToyDataset {
    std::vector<Camera> train_cameras;
    std::vector<Image> train_images;
    std::vector<Camera> test_cameras;
    std::vector<Image> test_images;
};

// Train cameras on an arc around the quad with alternating elevation; held
// out cameras sit between them at zero elevation.
std::vector<Camera> toy_train_cameras(const ToyOptions& opt);
std::vector<Camera> toy_test_cameras(const ToyOptions& opt);

// Frontal camera used as the stylization reference view.
Camera toy_reference_camera(const ToyOptions& opt = {});

ToyDataset make_toy_dataset(const QuadTexture& tex, const ToyOptions& opt = {});

// Smooth colour ramp; every point of the quad has a distinct colour.
QuadTexture ramp_texture();

// The default content texture: the ramp modulated by a 4x4 checker.
QuadTexture toy_content_texture();

} // namespace regs::eval
