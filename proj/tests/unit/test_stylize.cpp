#include "regs/core/error.hpp"
#include "regs/eval/gradcheck.hpp"
#include "regs/raster/rasterizer.hpp"
#include "regs/stylize/features.hpp"
#include "regs/stylize/losses.hpp"
#include "regs/stylize/pseudo_view.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

using namespace regs;
using namespace regs::stylize;

namespace {

Image random_image(std::mt19937_64& rng, int w, int h, int c = 3) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(w, h, c);
    for (auto& v : img.data) v = u(rng);
    return img;
}

Camera pinhole(int w, int h, double f, const Vec3& center) {
    Camera cam;
    cam.width = w;
    cam.height = h;
    cam.fx = cam.fy = f;
    cam.cx = (w - 1) / 2.0;
    cam.cy = (h - 1) / 2.0;
    cam.world_to_camera.topRightCorner<3, 1>() = -center;
    return cam;
}

FeatureMap random_features(std::mt19937_64& rng, int c, int h, int w) {
    std::normal_distribution<double> n(0.0, 1.0);
    FeatureMap m(c, h, w);
    for (auto& v : m.data) v = static_cast<float>(n(rng));
    return m;
}

GuidanceIndexMap random_guidance(std::mt19937_64& rng, int w, int h, int rw, int rh) {
    GuidanceIndexMap g{w, h, rw, rh, {}};
    for (int i = 0; i < w * h; ++i) g.target.push_back(static_cast<int>(rng() % static_cast<unsigned>(rw * rh)));
    return g;
}

} // namespace

TEST(PseudoView, IdentityWarp) {
    std::mt19937_64 rng(31);
    const Camera cam = look_at(Vec3(0.3, -0.2, -3), Vec3::Zero(), Vec3(0, -1, 0), 24, 20, 30.0);
    const Image img = random_image(rng, 24, 20);
    Image depth = random_image(rng, 24, 20, 1);
    for (std::size_t i = 0; i < depth.data.size(); i += 3) depth.data[i] = 0.0;
    for (auto& d : depth.data) d *= 3.0;
    const auto pv = synthesize_pseudo_view(img, depth, cam, cam, depth, 2.0);
    for (int y = 0; y < 20; ++y) {
        for (int x = 0; x < 24; ++x) {
            const bool expect = depth.at(x, y) > 0.0;
            ASSERT_EQ(pv.mask[static_cast<std::size_t>(y) * 24 + x] != 0, expect);
            if (expect) {
                for (int c = 0; c < 3; ++c) EXPECT_EQ(pv.image.at(x, y, c), img.at(x, y, c));
            }
        }
    }
}

TEST(PseudoView, ZeroDepthGivesEmptyMask) {
    std::mt19937_64 rng(32);
    const Camera cam = pinhole(16, 16, 20.0, Vec3::Zero());
    const auto pv = synthesize_pseudo_view(random_image(rng, 16, 16), Image(16, 16, 1), cam, cam,
                                           Image(16, 16, 1, 1.0), 1.0);
    EXPECT_EQ(pv.covered(), 0u);
}

TEST(PseudoView, ResolutionMismatchThrows) {
    const Camera cam = pinhole(16, 16, 20.0, Vec3::Zero());
    EXPECT_THROW(synthesize_pseudo_view(Image(16, 16, 3), Image(8, 16, 1), cam, cam, Image(16, 16, 1), 1.0),
                 InvalidInput);
}

// Foreground square at z = 2 over a background plane at z = 4; the target
// camera is shifted by 0.25 along +x, so disparities are 4 px and 2 px.
TEST(PseudoView, TwoPlaneOcclusionMatchesRayOracle) {
    constexpr int n = 32;
    const double f = 32.0;
    const Camera ref = pinhole(n, n, f, Vec3::Zero());
    const Camera tgt = pinhole(n, n, f, Vec3(0.25, 0, 0));
    auto fg_ref = [](int x, int y) { return x >= 8 && x <= 15 && y >= 8 && y <= 23; };

    std::mt19937_64 rng(33);
    const Image img = random_image(rng, n, n);
    Image ref_depth(n, n, 1), tgt_depth(n, n, 1);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            ref_depth.at(x, y) = fg_ref(x, y) ? 2.0 : 4.0;
            tgt_depth.at(x, y) = fg_ref(x + 4, y) ? 2.0 : 4.0;
        }
    }
    const auto pv = synthesize_pseudo_view(img, ref_depth, ref, tgt, tgt_depth, 4.0);
    int occluded = 0;
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            bool visible = false;
            int sx = -1;
            if (fg_ref(x + 4, y)) {
                visible = true;
                sx = x + 4;
            } else if (x + 2 < n && !fg_ref(x + 2, y)) {
                visible = true;
                sx = x + 2;
            }
            const bool got = pv.mask[static_cast<std::size_t>(y) * n + x] != 0;
            ASSERT_EQ(got, visible) << x << "," << y;
            if (visible) {
                EXPECT_EQ(pv.image.at(x, y, 1), img.at(sx, y, 1));
            } else if (y >= 8 && y <= 23 && x >= 12 && x <= 13) {
                ++occluded;
            }
        }
    }
    EXPECT_EQ(occluded, 2 * 16);
}

TEST(Losses, View) {
    std::mt19937_64 rng(34);
    PseudoView pv;
    pv.image = random_image(rng, 10, 8);
    pv.mask.assign(80, 0);
    for (std::size_t i = 0; i < 80; i += 2) pv.mask[i] = 1;
    EXPECT_EQ(loss_view(pv.image, pv).value, 0.0);
    Image shifted = pv.image;
    for (auto& v : shifted.data) v += 0.1;
    EXPECT_NEAR(loss_view(shifted, pv).value, 0.1, 1e-12);
    const Image r = random_image(rng, 10, 8);
    double sum = 0.0;
    int cnt = 0;
    for (std::size_t p = 0; p < 80; ++p) {
        if (!pv.mask[p]) continue;
        ++cnt;
        for (int c = 0; c < 3; ++c) sum += std::abs(r.data[3 * p + c] - pv.image.data[3 * p + c]);
    }
    EXPECT_NEAR(loss_view(r, pv).value, sum / (3.0 * cnt), 1e-9);
    pv.mask.assign(80, 0);
    EXPECT_EQ(loss_view(r, pv).value, 0.0);
}

TEST(Losses, DepthAndRec) {
    std::mt19937_64 rng(35);
    const Image d = random_image(rng, 9, 7, 1);
    Image d2 = d;
    for (auto& v : d2.data) v += 0.2;
    EXPECT_EQ(loss_depth(d, d).value, 0.0);
    EXPECT_NEAR(loss_depth(d2, d).value, 0.2, 1e-12);
    const Image a = random_image(rng, 9, 7), b = random_image(rng, 9, 7);
    Image a3 = a;
    for (auto& v : a3.data) v -= 0.3;
    EXPECT_EQ(loss_rec(a, a).value, 0.0);
    EXPECT_NEAR(loss_rec(a3, a).value, 0.3, 1e-12);
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
    EXPECT_NEAR(loss_rec(a, b).value, s / a.data.size(), 1e-12);
    double sd = 0.0;
    const Image e = random_image(rng, 9, 7, 1);
    for (std::size_t i = 0; i < e.data.size(); ++i) sd += std::abs(e.data[i] - d.data[i]);
    EXPECT_NEAR(loss_depth(e, d).value, sd / e.data.size(), 1e-12);
}

TEST(Features, ConstantImageSharesDescriptor) {
    const Image gray(40, 24, 3, 0.4);
    const auto f = extract_builtin(gray);
    ASSERT_EQ(f.channels, 12);
    ASSERT_EQ(f.width, 5);
    ASSERT_EQ(f.height, 3);
    for (int c = 0; c < 12; ++c) {
        for (int y = 0; y < 3; ++y) {
            for (int x = 0; x < 5; ++x) EXPECT_EQ(f.at(c, y, x), f.at(c, 0, 0));
        }
    }
}

TEST(Features, VerticalEdgeFillsHorizontalGradientBin) {
    Image img(8, 8, 3, 0.1);
    for (int y = 0; y < 8; ++y) {
        for (int x = 4; x < 8; ++x) {
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = 0.9;
        }
    }
    const auto f = extract_builtin_double(img);
    // Pure horizontal gradients: bin b holds m ((1 + cos(b pi / 4)) / 2)^4.
    const double bin0 = f[3];
    EXPECT_GT(bin0, 0.0);
    for (int b = 1; b < 8; ++b) EXPECT_LT(f[3 + b], bin0);
    EXPECT_NEAR(f[4] / bin0, std::pow((1.0 + std::sqrt(0.5)) / 2.0, 4), 1e-6);
    EXPECT_NEAR(f[5] / bin0, std::pow(0.5, 4), 1e-6);
    EXPECT_NEAR(f[7], 0.0, 1e-12);
    EXPECT_NEAR(f[10] / bin0, f[4] / bin0, 1e-12);
}

TEST(Features, BackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(36);
    Image img = random_image(rng, 13, 11);
    const auto base = extract_builtin_double(img);
    std::vector<double> w(base.size());
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& v : w) v = n(rng);
    auto obj = [&](const Image& im) {
        const auto f = extract_builtin_double(im);
        double s = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * f[i];
        return s;
    };
    const Image grad = builtin_backward(img, w);
    double worst = 0.0;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double orig = img.data[i];
        img.data[i] = orig + 1e-6;
        const double lp = obj(img);
        img.data[i] = orig - 1e-6;
        const double lm = obj(img);
        img.data[i] = orig;
        const double num = (lp - lm) / 2e-6;
        worst = std::max(worst, std::abs(num - grad.data[i]) / std::max({std::abs(num), std::abs(grad.data[i]), 1e-6}));
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(Fmap, RoundTripIsBitExact) {
    std::mt19937_64 rng(37);
    const auto m = random_features(rng, 5, 3, 7);
    const auto path = std::filesystem::temp_directory_path() / "regs_test.fmap";
    write_fmap(m, path);
    const auto back = read_fmap(path);
    EXPECT_EQ(back.channels, 5);
    EXPECT_EQ(back.height, 3);
    EXPECT_EQ(back.width, 7);
    EXPECT_EQ(back.source, FeatureSource::File);
    EXPECT_EQ(std::memcmp(back.data.data(), m.data.data(), m.data.size() * sizeof(float)), 0);
}

TEST(Fmap, DecodeErrors) {
    std::mt19937_64 rng(38);
    const auto path = std::filesystem::temp_directory_path() / "regs_test_bad.fmap";
    write_fmap(random_features(rng, 2, 2, 2), path);
    std::string bytes;
    {
        std::ifstream in(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    auto kind_of = [&](const std::string& content) {
        std::ofstream(path, std::ios::binary) << content;
        try {
            read_fmap(path);
        } catch (const DecodeError& e) {
            return e.kind();
        }
        return DecodeError::Kind::Io;
    };
    EXPECT_EQ(kind_of("FMAQ" + bytes.substr(4)), DecodeError::Kind::MalformedHeader);
    EXPECT_EQ(kind_of(bytes.substr(0, bytes.size() - 1)), DecodeError::Kind::Truncated);
    std::string v2 = bytes;
    v2[4] = 2;
    EXPECT_EQ(kind_of(v2), DecodeError::Kind::UnknownVersion);
    EXPECT_THROW(read_fmap(path.string() + ".missing"), DecodeError);
}

TEST(Match, IdentityAndUniqueMatch) {
    std::mt19937_64 rng(39);
    const auto f = random_features(rng, 12, 5, 6);
    const auto g = match_nearest(f, f);
    for (std::size_t i = 0; i < g.target.size(); ++i) EXPECT_EQ(g.target[i], static_cast<int>(i));

    FeatureMap ref(3, 2, 2);
    for (int i = 0; i < 4; ++i) ref.data[0 * 4 + i] = 1.0f; // every location along e0
    ref.data[0 * 4 + 3] = 0.0f;
    ref.data[1 * 4 + 3] = 1.0f; // location 3 along e1
    FeatureMap q(3, 1, 1);
    q.data[1] = 2.0f;
    EXPECT_EQ(match_nearest(q, ref).target[0], 3);
}

TEST(Match, MatchesExhaustiveSearchAndScaleInvariance) {
    std::mt19937_64 rng(40);
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = random_features(rng, 12, 6, 6);
        const auto b = random_features(rng, 12, 6, 6);
        const auto g = match_nearest(a, b);
        for (int i = 0; i < 36; ++i) {
            double best = INFINITY;
            int bj = -1;
            for (int j = 0; j < 36; ++j) {
                double ab = 0, aa = 0, bb = 0;
                for (int k = 0; k < 12; ++k) {
                    ab += double(a.data[k * 36 + i]) * b.data[k * 36 + j];
                    aa += double(a.data[k * 36 + i]) * a.data[k * 36 + i];
                    bb += double(b.data[k * 36 + j]) * b.data[k * 36 + j];
                }
                const double d = 1.0 - ab / (std::sqrt(aa) * std::sqrt(bb));
                if (d < best - 1e-12) {
                    best = d;
                    bj = j;
                }
            }
            EXPECT_EQ(g.target[static_cast<std::size_t>(i)], bj);
        }
        FeatureMap scaled = a;
        std::uniform_real_distribution<double> s(0.25, 4.0);
        for (int i = 0; i < 36; ++i) {
            const double k = std::exp2(std::round(std::log2(s(rng))));
            for (int c = 0; c < 12; ++c) scaled.data[c * 36 + i] = static_cast<float>(scaled.data[c * 36 + i] * k);
        }
        EXPECT_EQ(match_nearest(scaled, b).target, g.target);
    }
}

TEST(Losses, Tcm) {
    std::mt19937_64 rng(41);
    const auto ref = random_features(rng, 12, 4, 5);
    const auto guid = random_guidance(rng, 3, 3, 5, 4);
    FeatureMap gathered(12, 3, 3), neg(12, 3, 3);
    for (int i = 0; i < 9; ++i) {
        for (int c = 0; c < 12; ++c) {
            gathered.data[c * 9 + i] = ref.data[c * 20 + guid.target[static_cast<std::size_t>(i)]];
            neg.data[c * 9 + i] = -gathered.data[c * 9 + i];
        }
    }
    EXPECT_NEAR(loss_tcm(gathered, guid, ref).value, 0.0, 1e-12);
    EXPECT_NEAR(loss_tcm(neg, guid, ref).value, 2.0, 1e-12);
    const auto st = random_features(rng, 12, 3, 3);
    double sum = 0.0;
    for (int i = 0; i < 9; ++i) {
        double ab = 0, aa = 0, bb = 0;
        for (int c = 0; c < 12; ++c) {
            const double a = st.data[c * 9 + i], b = ref.data[c * 20 + guid.target[static_cast<std::size_t>(i)]];
            ab += a * b;
            aa += a * a;
            bb += b * b;
        }
        sum += 1.0 - ab / std::sqrt(aa * bb);
    }
    EXPECT_NEAR(loss_tcm(st, guid, ref).value, sum / 9.0, 1e-12);
}

TEST(Losses, TcmGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(42);
    const auto ref = random_features(rng, 12, 4, 5);
    const auto guid = random_guidance(rng, 3, 3, 5, 4);
    std::vector<double> refd(ref.data.begin(), ref.data.end());
    std::vector<double> st(12 * 9);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& v : st) v = n(rng);
    const auto base = loss_tcm(st, 12, guid, refd);
    for (std::size_t i = 0; i < st.size(); ++i) {
        auto p = st, m = st;
        p[i] += 1e-6;
        m[i] -= 1e-6;
        const double num = (loss_tcm(p, 12, guid, refd).value - loss_tcm(m, 12, guid, refd).value) / 2e-6;
        EXPECT_NEAR(base.grad_features[i], num, 1e-7);
    }
}

TEST(Losses, Color) {
    std::mt19937_64 rng(43);
    const Image s = random_image(rng, 20, 12);
    GuidanceIndexMap ident{3, 2, 3, 2, {0, 1, 2, 3, 4, 5}};
    EXPECT_NEAR(loss_color(s, s, ident).value, 0.0, 1e-15);
    Image r = s;
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 20; ++x) r.at(x, y, 0) += 0.1;
    EXPECT_NEAR(loss_color(r, s, ident).value, 0.01, 1e-12);

    const Image a = random_image(rng, 20, 12);
    const auto g = random_guidance(rng, 3, 2, 3, 2);
    auto mean = [](const Image& img, int cell) {
        const int cx = cell % 3, cy = cell / 3;
        Vec3 m = Vec3::Zero();
        int cnt = 0;
        for (int y = cy * 8; y < std::min(12, cy * 8 + 8); ++y)
            for (int x = cx * 8; x < std::min(20, cx * 8 + 8); ++x, ++cnt)
                for (int c = 0; c < 3; ++c) m[c] += img.at(x, y, c);
        return Vec3(m / cnt);
    };
    double sum = 0.0;
    for (int i = 0; i < 6; ++i) sum += (mean(a, i) - mean(s, g.target[static_cast<std::size_t>(i)])).squaredNorm();
    EXPECT_NEAR(loss_color(a, s, g).value, sum / 6.0, 1e-12);
}

TEST(Losses, Total) {
    const LossWeights w;
    EXPECT_EQ(total_loss(LossParts{}, w), 0.0);
    EXPECT_DOUBLE_EQ(total_loss(LossParts{1, 1, 1, 1, 1}, w), 29.0);
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int t = 0; t < 10; ++t) {
        const LossParts p{u(rng), u(rng), u(rng), u(rng), u(rng)};
        const LossWeights q{u(rng), u(rng), u(rng), u(rng), u(rng)};
        EXPECT_NEAR(total_loss(p, q), q.rec * p.rec + q.depth * p.depth + q.view * p.view + q.tcm * p.tcm +
                                          q.color * p.color,
                    1e-12);
    }
    EXPECT_THROW((LossWeights{1, -1, 0, 0, 0}.validate()), InvalidInput);
}

// Each loss, differentiated through the renderer, against central differences
// of the rendered loss with respect to every parameter.
namespace {

using LossFn = std::function<double(const RenderOutput&, Image* dc, Image* dd)>;

double fd_check(const GaussianScene& scene, const Camera& cam, const LossFn& fn) {
    const auto out = render(scene, cam);
    Image dc(cam.width, cam.height, 3), dd(cam.width, cam.height, 1);
    fn(out, &dc, &dd);
    const auto g = backward(scene, cam, out, dc, dd);
    GaussianScene work = scene;
    double worst = 0.0;
    auto check = [&](double& p, double analytic) {
        const double orig = p;
        p = orig + 1e-4;
        const double lp = fn(render(work, cam), nullptr, nullptr);
        p = orig - 1e-4;
        const double lm = fn(render(work, cam), nullptr, nullptr);
        p = orig;
        const double num = (lp - lm) / 2e-4;
        worst = std::max(worst, std::abs(num - analytic) / std::max({std::abs(num), std::abs(analytic), 1e-6}));
    };
    for (std::size_t i = 0; i < scene.size(); ++i) {
        auto& w = work.gaussians[i];
        for (int k = 0; k < 3; ++k) {
            check(w.position[k], g.position[i][k]);
            check(w.log_scale[k], g.log_scale[i][k]);
            check(w.color_dc[k], g.color_dc[i][k]);
        }
        for (int k = 0; k < 4; ++k) check(w.rotation[k], g.rotation[i][k]);
        check(w.opacity_logit, g.opacity_logit[i]);
    }
    return worst;
}

Image offset(const Image& img, std::mt19937_64& rng) {
    Image t = img;
    std::uniform_real_distribution<double> u(0.02, 0.2);
    for (auto& v : t.data) v += (rng() & 1) ? u(rng) : -u(rng);
    return t;
}

} // namespace

TEST(LossGradients, ThroughRenderer) {
    const Camera cam = eval::gradcheck_camera(32, 32);
    const auto scene = eval::random_gradcheck_scene(7, cam, 10);
    const auto base = render(scene, cam);
    std::mt19937_64 rng(45);
    const Image target = offset(base.color, rng);
    const Image dtarget = offset(base.depth, rng);
    PseudoView pv;
    pv.image = target;
    pv.mask.resize(base.color.pixels());
    for (auto& m : pv.mask) m = static_cast<std::uint8_t>(rng() % 2);

    auto copy = [](Image* dst, const Image& g) {
        if (dst) *dst = g;
    };
    EXPECT_LT(fd_check(scene, cam,
                       [&](const RenderOutput& o, Image* dc, Image*) {
                           auto l = loss_rec(o.color, target);
                           copy(dc, l.grad);
                           return l.value;
                       }),
              1e-3);
    EXPECT_LT(fd_check(scene, cam,
                       [&](const RenderOutput& o, Image* dc, Image*) {
                           auto l = loss_view(o.color, pv);
                           copy(dc, l.grad);
                           return l.value;
                       }),
              1e-3);
    EXPECT_LT(fd_check(scene, cam,
                       [&](const RenderOutput& o, Image*, Image* dd) {
                           auto l = loss_depth(o.depth, dtarget);
                           copy(dd, l.grad);
                           return l.value;
                       }),
              1e-3);
    const auto guid = random_guidance(rng, 4, 4, 4, 4);
    EXPECT_LT(fd_check(scene, cam,
                       [&](const RenderOutput& o, Image* dc, Image*) {
                           auto l = loss_color(o.color, target, guid);
                           copy(dc, l.grad);
                           return l.value;
                       }),
              1e-3);
}

TEST(LossGradients, TcmThroughExtractorAndRenderer) {
    const Camera cam = eval::gradcheck_camera(64, 64);
    const auto scene = eval::random_gradcheck_scene(8, cam, 6);
    std::mt19937_64 rng(46);
    const auto ref = extract_builtin_double(random_image(rng, 64, 64));
    const auto guid = random_guidance(rng, 8, 8, 8, 8);
    const double worst = fd_check(scene, cam, [&](const RenderOutput& o, Image* dc, Image*) {
        const auto f = extract_builtin_double(o.color);
        const auto l = loss_tcm(f, kBuiltinChannels, guid, ref);
        if (dc) *dc = builtin_backward(o.color, l.grad_features);
        return l.value;
    });
    EXPECT_LT(worst, 1e-3);
}
