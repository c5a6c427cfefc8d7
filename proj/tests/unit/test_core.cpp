#include "regs/core/camera.hpp"
#include "regs/core/error.hpp"
#include "regs/core/gaussian.hpp"
#include "regs/core/image.hpp"
#include "regs/core/scene_io.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace regs;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("regs_core_" + name);
}

Vec4 random_unit_quat(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec4 q(n(rng), n(rng), n(rng), n(rng));
    return q.normalized();
}

Gaussian3D random_gaussian(std::mt19937_64& rng, bool with_rest = false) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Gaussian3D g;
    g.position = Vec3(u(rng), u(rng), u(rng));
    g.rotation = random_unit_quat(rng);
    g.log_scale = Vec3(u(rng), u(rng), u(rng));
    g.opacity_logit = 3.0 * u(rng);
    g.color_dc = Vec3(u(rng), u(rng), u(rng));
    if (with_rest) {
        g.color_rest = ShBand1{Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))};
    }
    return g;
}

// Narrow every parameter to float so the PLY round trip can be exact.
Gaussian3D float_representable(Gaussian3D g) {
    auto narrow = [](auto& v) {
        for (int i = 0; i < v.size(); ++i) {
            v[i] = static_cast<float>(v[i]);
        }
    };
    narrow(g.position);
    narrow(g.rotation);
    narrow(g.log_scale);
    narrow(g.color_dc);
    g.opacity_logit = static_cast<float>(g.opacity_logit);
    if (g.color_rest) {
        for (auto& b : *g.color_rest) {
            narrow(b);
        }
    }
    return g;
}

bool bit_equal(const Gaussian3D& a, const Gaussian3D& b) {
    return a.position == b.position && a.rotation == b.rotation && a.log_scale == b.log_scale &&
           a.opacity_logit == b.opacity_logit && a.color_dc == b.color_dc &&
           a.color_rest.has_value() == b.color_rest.has_value() &&
           (!a.color_rest || ((*a.color_rest)[0] == (*b.color_rest)[0] && (*a.color_rest)[1] == (*b.color_rest)[1] &&
                                 (*a.color_rest)[2] == (*b.color_rest)[2]));
}

} // namespace

TEST(QuatToRotation, IdentityQuaternion) {
    EXPECT_TRUE(quat_to_rotation(Vec4(1, 0, 0, 0)).isApprox(Mat3::Identity(), 0.0));
}

TEST(QuatToRotation, HalfTurnAboutZ) {
    Mat3 expected;
    expected << -1, 0, 0, 0, -1, 0, 0, 0, 1;
    EXPECT_LT((quat_to_rotation(Vec4(0, 0, 0, 1)) - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(QuatToRotation, RandomIsOrthonormal) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
        const Mat3 r = quat_to_rotation(random_unit_quat(rng));
        EXPECT_LT((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    }
}

TEST(QuatToRotation, NormalizesAndRejectsZero) {
    EXPECT_LT((quat_to_rotation(Vec4(0, 0, 0, 3)) - quat_to_rotation(Vec4(0, 0, 0, 1))).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_THROW(quat_to_rotation(Vec4::Zero()), InvalidInput);
}

TEST(BuildCovariance, ClosedForms) {
    Gaussian3D g;
    EXPECT_TRUE(build_covariance(g).isApprox(Mat3::Identity(), 0.0));
    g.log_scale = Vec3(std::log(2.0), 0, 0);
    EXPECT_LT((build_covariance(g) - Vec3(4, 1, 1).asDiagonal().toDenseMatrix()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(BuildCovariance, EigenvaluesAreSquaredScales) {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 200; ++i) {
        const Gaussian3D g = random_gaussian(rng);
        const Mat3 sigma = build_covariance(g);
        EXPECT_LT((sigma - sigma.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        Eigen::SelfAdjointEigenSolver<Mat3> eig(sigma);
        std::vector<double> got(eig.eigenvalues().data(), eig.eigenvalues().data() + 3);
        std::vector<double> want;
        for (int k = 0; k < 3; ++k) {
            want.push_back(std::exp(2.0 * g.log_scale[k]));
        }
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        EXPECT_GE(got[0], -1e-12);
        for (int k = 0; k < 3; ++k) {
            EXPECT_NEAR(got[k], want[k], 1e-9);
        }
    }
}

TEST(EvalGaussian, ClosedForms) {
    Gaussian3D g;
    g.position = Vec3(0.3, -0.2, 1.0);
    EXPECT_DOUBLE_EQ(eval_gaussian(g, g.position), 1.0);
    EXPECT_NEAR(eval_gaussian(g, g.position + Vec3(0, 1, 0)), std::exp(-0.5), 1e-15);
    EXPECT_NEAR(eval_gaussian(g, g.position + Vec3(0, 1, 0)), 0.6065, 1e-4);
}

TEST(EvalGaussian, MatchesDenseQuadraticForm) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const Gaussian3D g = random_gaussian(rng);
        const Vec3 x = g.position + Vec3(u(rng), u(rng), u(rng));
        const Vec3 d = x - g.position;
        const double oracle = std::exp(-0.5 * d.dot(build_covariance(g).inverse() * d));
        EXPECT_NEAR(eval_gaussian(g, x), oracle, 1e-12);
    }
}

TEST(EvalGaussian, RotationInvariance) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const Gaussian3D g = random_gaussian(rng);
        const Vec4 q = random_unit_quat(rng);
        const Mat3 r = quat_to_rotation(q);
        const Vec3 x = g.position + Vec3(u(rng), u(rng), u(rng));
        Gaussian3D h = g;
        // Compose q * g.rotation (Hamilton product, wxyz).
        const Eigen::Quaterniond composed = Eigen::Quaterniond(q[0], q[1], q[2], q[3]) *
                                            Eigen::Quaterniond(g.rotation[0], g.rotation[1], g.rotation[2], g.rotation[3]);
        h.rotation = Vec4(composed.w(), composed.x(), composed.y(), composed.z());
        EXPECT_NEAR(eval_gaussian(g, x), eval_gaussian(h, g.position + r * (x - g.position)), 1e-12);
    }
}

TEST(EvalGaussian, DegenerateScaleIsClamped) {
    Gaussian3D g;
    g.log_scale = Vec3(-50.0, 0.0, 0.0);
    const double v = eval_gaussian(g, Vec3(0.0, 0.5, 0.0));
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_NEAR(v, std::exp(-0.125), 1e-15);
}

TEST(EvalColor, DiffuseIsDirectionIndependent) {
    Gaussian3D g; // dc = 0 -> 0.5 gray
    std::mt19937_64 rng(5);
    for (int i = 0; i < 20; ++i) {
        const Vec3 c = eval_color(g, random_unit_quat(rng).head<3>().normalized(), 0);
        EXPECT_EQ(c, Vec3(0.5, 0.5, 0.5));
    }
}

TEST(EvalColor, LinearBandOddSymmetry) {
    Gaussian3D g;
    g.color_dc = Vec3(0.4, 0.1, -0.2);
    g.color_rest = ShBand1{Vec3(0.1, 0.0, 0.05), Vec3(0.2, -0.1, 0.3), Vec3(0.0, 0.1, 0.1)};
    const Vec3 plus = eval_color(g, Vec3(0, 0, 1), 1);
    const Vec3 minus = eval_color(g, Vec3(0, 0, -1), 1);
    EXPECT_LT((plus - minus - 2.0 * kShC1 * (*g.color_rest)[1]).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EvalColor, MatchesExplicitBasis) {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 100; ++i) {
        const Gaussian3D g = random_gaussian(rng, true);
        const Vec3 d = random_unit_quat(rng).head<3>().normalized();
        Vec3 oracle;
        for (int ch = 0; ch < 3; ++ch) {
            const auto& r = *g.color_rest;
            const double v = 0.5 + 0.28209479177387814 * g.color_dc[ch] - 0.4886025119029199 * d.y() * r[0][ch] +
                             0.4886025119029199 * d.z() * r[1][ch] - 0.4886025119029199 * d.x() * r[2][ch];
            oracle[ch] = std::max(0.0, v);
        }
        EXPECT_LT((eval_color(g, d, 1) - oracle).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(EvalColor, DegreeAboveStoredThrows) {
    Gaussian3D g;
    EXPECT_THROW(eval_color(g, Vec3(0, 0, 1), 1), InvalidInput);
}

TEST(SceneIo, EmptyScene) {
    const auto path = temp_path("empty.ply");
    scene_save(GaussianScene{}, path);
    const auto loaded = scene_load(path);
    EXPECT_TRUE(loaded.empty());
    EXPECT_TRUE(loaded.statistics_consistent());
}

TEST(SceneIo, RoundTripIsBitExact) {
    std::mt19937_64 rng(7);
    for (const bool with_rest : {false, true}) {
        for (const int n : {1, 1000}) {
            GaussianScene scene;
            for (int i = 0; i < n; ++i) {
                scene.push_back(float_representable(random_gaussian(rng, with_rest)));
            }
            const auto path = temp_path("roundtrip.ply");
            scene_save(scene, path);
            const auto loaded = scene_load(path);
            ASSERT_EQ(loaded.size(), scene.size());
            for (int i = 0; i < n; ++i) {
                ASSERT_TRUE(bit_equal(loaded.gaussians[i], scene.gaussians[i])) << "record " << i;
            }
        }
    }
}

TEST(SceneIo, DistinctDecodeErrors) {
    GaussianScene scene;
    scene.push_back(Gaussian3D{});
    scene.push_back(Gaussian3D{});
    const auto path = temp_path("errors.ply");
    scene_save(scene, path);
    std::string bytes;
    {
        std::ifstream in(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    auto expect_kind = [&](const std::string& content, DecodeError::Kind kind) {
        const auto p = temp_path("bad.ply");
        std::ofstream(p, std::ios::binary) << content;
        try {
            scene_load(p);
            ADD_FAILURE() << "no error";
        } catch (const DecodeError& e) {
            EXPECT_EQ(e.kind(), kind) << e.what();
        }
    };
    expect_kind(bytes.substr(0, bytes.size() - 5), DecodeError::Kind::Truncated);
    expect_kind("plx" + bytes.substr(3), DecodeError::Kind::MalformedHeader);
    std::string v2 = bytes;
    v2.replace(v2.find("1.0"), 3, "2.0");
    expect_kind(v2, DecodeError::Kind::UnknownVersion);
    std::string reordered = bytes;
    reordered.replace(reordered.find("property float x\n"), 17, "property float q\n");
    expect_kind(reordered, DecodeError::Kind::MalformedHeader);
}

TEST(Camera, JsonRoundTripAndValidation) {
    std::vector<Camera> cams = {look_at(Vec3(0, 0, -3), Vec3::Zero(), Vec3(0, -1, 0), 32, 24, 40.0),
                                look_at(Vec3(1, 0.5, -3), Vec3::Zero(), Vec3(0, -1, 0), 32, 24, 40.0)};
    cams[1].id = 7;
    const auto path = temp_path("cams.json");
    save_cameras_json(cams, path);
    const auto loaded = load_cameras_json(path);
    ASSERT_EQ(loaded.size(), 2u);
    EXPECT_EQ(loaded[1].id, 7);
    EXPECT_LT((loaded[1].world_to_camera - cams[1].world_to_camera).cwiseAbs().maxCoeff(), 1e-15);

    Camera bad = cams[0];
    bad.fx = 0.0;
    EXPECT_THROW(bad.validate(), InvalidInput);
    bad = cams[0];
    bad.world_to_camera(0, 0) = 2.0;
    EXPECT_THROW(bad.validate(), InvalidInput);
}

TEST(Camera, LookAtProjectsTargetToPrincipalPoint) {
    const Camera cam = look_at(Vec3(2, 1, -3), Vec3(0.1, 0.2, 0.3), Vec3(0, -1, 0), 64, 48, 50.0);
    const Vec3 p = cam.to_camera(Vec3(0.1, 0.2, 0.3));
    EXPECT_NEAR(p.x(), 0.0, 1e-12);
    EXPECT_NEAR(p.y(), 0.0, 1e-12);
    EXPECT_GT(p.z(), 0.0);
    EXPECT_LT((cam.center() - Vec3(2, 1, -3)).norm(), 1e-12);
}

TEST(ImageIo, PngRoundTrip) {
    Image img(5, 3, 3);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        img.data[i] = static_cast<double>(i % 256) / 255.0;
    }
    const auto path = temp_path("img.png");
    write_png_rgb(img, path);
    const Image back = read_png_rgb(path);
    ASSERT_TRUE(back.same_shape(img));
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        EXPECT_DOUBLE_EQ(back.data[i], img.data[i]);
    }
}

TEST(ImageIo, DepthPngWithSidecar) {
    Image depth(4, 4, 1);
    for (std::size_t i = 0; i < depth.data.size(); ++i) {
        depth.data[i] = 0.25 * static_cast<double>(i);
    }
    const auto path = temp_path("depth.png");
    const double scale = write_depth_png(depth, path);
    EXPECT_NEAR(scale, 65535.0 / 3.75, 1e-9);
    const Image back = read_depth_png(path);
    for (std::size_t i = 0; i < depth.data.size(); ++i) {
        EXPECT_NEAR(back.data[i], depth.data[i], 0.5 / scale + 1e-12);
    }
}
