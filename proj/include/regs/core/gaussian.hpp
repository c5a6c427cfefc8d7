#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace regs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kShC0 = 0.28209479177387814;
inline constexpr double kShC1 = 0.4886025119029199;
inline constexpr double kMinLogScale = -20.0;

// Linear SH band: color_rest[k] holds the RGB coefficient of basis k+1.
using ShBand1 = std::array<Vec3, 3>;

struct Gaussian3D {
    Vec3 position = Vec3::Zero();
    Vec4 rotation = Vec4(1.0, 0.0, 0.0, 0.0); // w, x, y, z
    Vec3 log_scale = Vec3::Zero();
    double opacity_logit = 0.0;
    Vec3 color_dc = Vec3::Zero();
    std::optional<ShBand1> color_rest;

    int sh_degree() const { return color_rest ? 1 : 0; }
};

double sigmoid(double x);
double logit(double p);

// Rotation matrix of a quaternion (w, x, y, z). Normalizes internally;
// throws InvalidInput for the zero quaternion.
Mat3 quat_to_rotation(const Vec4& q);

Vec3 clamped_scale(const Vec3& log_scale);

// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
Mat3 build_covariance(const Gaussian3D& g);

// exp(-1/2 (x - mu)^T Sigma^-1 (x - mu)).
double eval_gaussian(const Gaussian3D& g, const Vec3& x);

// Diffuse RGB 0.5 + C0 * dc, plus the linear SH band for degree 1.
// Clamped to >= 0. Throws InvalidInput if degree exceeds the stored one.
Vec3 eval_color(const Gaussian3D& g, const Vec3& view_dir, int degree);

// Content model m or stylized model m-hat: splats plus the statistics the
// density controller accumulates between control events.
struct GaussianScene {
    std::vector<Gaussian3D> gaussians;
    std::vector<double> color_grad_accum;
    std::vector<double> pos_grad_accum;
    std::vector<std::int64_t> contrib_count;

    std::size_t size() const { return gaussians.size(); }
    bool empty() const { return gaussians.empty(); }

    // 0 or 1; all gaussians share the scene's degree.
    int sh_degree() const;

    void push_back(const Gaussian3D& g);
    // Resizes statistics to the gaussian count and zeroes them.
    void reset_statistics();
    bool statistics_consistent() const;

    // Diameter of the bounding box of all centers.
    double extent() const;
};

// Order-sensitive hash over every parameter; used to tie a backward pass
// to the scene its forward pass saw.
std::uint64_t parameter_fingerprint(const GaussianScene& scene);

} // namespace regs
