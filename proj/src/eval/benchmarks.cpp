#include "regs/eval/benchmarks.hpp"

#include "regs/core/error.hpp"
#include "regs/eval/metrics.hpp"
#include "regs/raster/rasterizer.hpp"
#include "regs/stylize/losses.hpp"
#include "regs/stylize/pseudo_view.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <random>

namespace regs::eval {

namespace {

using nlohmann::json;

template <class T>
json opt_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> opt_get(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return std::nullopt;
    }
    return j.at(key).get<T>();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

std::string BenchmarkReport::to_json() const {
    json arms_j = json::array();
    for (const auto& a : arms) {
        arms_j.push_back({{"method", a.method},
                          {"l1", a.l1},
                          {"psnr", a.psnr},
                          {"n_gaussians", a.n_gaussians},
                          {"budget", opt_json(a.budget)},
                          {"depth_drift", opt_json(a.depth_drift)},
                          {"consistency", opt_json(a.consistency)},
                          {"seconds", a.seconds}});
    }
    return json{{"scenario", scenario},
                {"arms", arms_j},
                {"value", opt_json(value)},
                {"r2", opt_json(r2)},
                {"splats_per_sec", opt_json(splats_per_sec)},
                {"ref_lpips", ref_lpips},
                {"seconds", seconds}}
        .dump(2);
}

BenchmarkReport BenchmarkReport::from_json(const std::string& text) {
    BenchmarkReport r;
    try {
        const json j = json::parse(text);
        r.scenario = j.at("scenario").get<std::string>();
        for (const auto& a : j.at("arms")) {
            ArmResult arm;
            arm.method = a.at("method").get<std::string>();
            arm.l1 = a.at("l1").get<double>();
            arm.psnr = a.at("psnr").get<double>();
            arm.n_gaussians = a.at("n_gaussians").get<std::size_t>();
            arm.budget = opt_get<std::size_t>(a, "budget");
            arm.depth_drift = opt_get<double>(a, "depth_drift");
            arm.consistency = opt_get<double>(a, "consistency");
            arm.seconds = a.at("seconds").get<double>();
            r.arms.push_back(arm);
        }
        r.value = opt_get<double>(j, "value");
        r.r2 = opt_get<double>(j, "r2");
        r.splats_per_sec = opt_get<double>(j, "splats_per_sec");
        r.ref_lpips = j.at("ref_lpips").get<std::string>();
        r.seconds = j.at("seconds").get<double>();
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("benchmark report: ") + e.what());
    }
    return r;
}

const ArmResult& BenchmarkReport::arm(const std::string& method) const {
    for (const auto& a : arms) {
        if (a.method == method) {
            return a;
        }
    }
    throw InvalidInput("benchmark report: no arm named " + method);
}

double depth_drift(const GaussianScene& content, const GaussianScene& stylized, const std::vector<Camera>& cameras) {
    if (cameras.empty()) {
        throw InvalidInput("depth_drift: no cameras");
    }
    const double extent = content.extent();
    if (!(extent > 0.0)) {
        throw InvalidInput("depth_drift: content extent is zero");
    }
    double total = 0.0;
    for (const auto& cam : cameras) {
        const RenderOutput a = render(content, cam);
        const RenderOutput b = render(stylized, cam);
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t p = 0; p < a.depth.data.size(); ++p) {
            if (1.0 - a.final_transmittance.data[p] >= 0.5) {
                sum += std::abs(a.depth.data[p] - b.depth.data[p]);
                ++n;
            }
        }
        total += n ? sum / static_cast<double>(n) : 0.0;
    }
    return total / static_cast<double>(cameras.size()) / extent;
}

double consistency_score(const GaussianScene& scene, const std::vector<std::pair<Camera, Camera>>& pairs) {
    const double extent = scene.extent();
    double total = 0.0;
    std::size_t used = 0;
    for (const auto& [ca, cb] : pairs) {
        const RenderOutput a = render(scene, ca);
        const RenderOutput b = render(scene, cb);
        const auto pv = stylize::synthesize_pseudo_view(
            a.color, stylize::expected_depth(a.depth, a.final_transmittance), ca, cb,
            stylize::expected_depth(b.depth, b.final_transmittance), extent);
        if (pv.covered() == 0) {
            continue;
        }
        total += stylize::loss_view(b.color, pv).value;
        ++used;
    }
    return used ? total / static_cast<double>(used) : 0.0;
}

std::vector<std::pair<Camera, Camera>> neighbour_pairs(const std::vector<Camera>& cameras) {
    std::vector<std::pair<Camera, Camera>> pairs;
    for (std::size_t i = 0; i + 1 < cameras.size(); ++i) {
        pairs.emplace_back(cameras[i], cameras[i + 1]);
        pairs.emplace_back(cameras[i + 1], cameras[i]);
    }
    return pairs;
}

GaussianScene coarse_quad_scene(const QuadTexture& tex, int grid, const ToyOptions& opt, int fit_iters,
                                std::uint64_t seed) {
    if (grid < 1) {
        throw InvalidInput("coarse_quad_scene: grid must be >= 1");
    }
    const double cell = 2.0 / grid;
    GaussianScene scene;
    for (int j = 0; j < grid; ++j) {
        for (int i = 0; i < grid; ++i) {
            Gaussian3D g;
            g.position = Vec3(-1.0 + (i + 0.5) * cell, -1.0 + (j + 0.5) * cell, 0.0);
            g.log_scale = Vec3(std::log(0.5 * cell), std::log(0.5 * cell), std::log(0.02 * cell));
            g.opacity_logit = logit(0.95);
            g.color_dc = (tex(g.position.x(), g.position.y()) - Vec3::Constant(0.5)) / kShC0;
            scene.push_back(g);
        }
    }
    scene.reset_statistics();
    if (fit_iters > 0) {
        const auto cams = toy_train_cameras(opt);
        std::vector<Image> images;
        for (const auto& c : cams) {
            images.push_back(render_quad(tex, c));
        }
        auto cfg = train::TrainConfig::pretrain_defaults();
        cfg.total_iters = fit_iters;
        cfg.selection = control::Selection::None;
        cfg.seed = seed;
        scene = train::pretrain(images, cams, cfg, scene).scene;
    }
    return scene;
}

QuadTexture toy_style_texture(int cells) {
    return checker_texture(cells, Vec3(0.95, 0.85, 0.2), Vec3(0.1, 0.15, 0.4));
}

namespace {

ArmResult run_arm(const std::string& method, const GaussianScene& content, const Image& style_ref, const Camera& ref,
                  const std::vector<Camera>& cams, const train::TrainConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = train::stylize_scene(content, style_ref, ref, cams, cfg);
    ArmResult arm;
    arm.method = method;
    arm.seconds = seconds_since(t0);
    const Image out = render(res.scene, ref).color;
    arm.l1 = l1(out, style_ref);
    arm.psnr = psnr(out, style_ref);
    arm.n_gaussians = res.scene.size();
    arm.budget = cfg.control.max_gaussians;
    arm.depth_drift = depth_drift(content, res.scene, cams);
    arm.consistency = consistency_score(res.scene, neighbour_pairs(cams));
    return arm;
}

} // namespace

BenchmarkReport control_benchmark(const ControlBenchOptions& opt) {
    if (opt.budget > 0 && opt.budget < 8) {
        throw InvalidInput("control_benchmark: budget is smaller than one structured split (8)");
    }
    const auto t0 = std::chrono::steady_clock::now();
    const GaussianScene coarse = coarse_quad_scene(ramp_texture(), opt.content_grid, opt.toy, opt.fit_iters, opt.seed);
    const Camera ref = toy_reference_camera(opt.toy);
    const Image style_ref = render_quad(toy_style_texture(opt.style_cells), ref);
    const auto cams = toy_train_cameras(opt.toy);

    auto cfg = train::TrainConfig::stylize_defaults();
    cfg.total_iters = opt.iters;
    cfg.seed = opt.seed;
    cfg.control.max_gaussians = coarse.size() + opt.budget;

    BenchmarkReport rep;
    rep.scenario = "control";
    const std::pair<const char*, control::Selection> arms[] = {{"texture_guided", control::Selection::TextureGuided},
                                                               {"positional", control::Selection::Positional},
                                                               {"none", control::Selection::None}};
    for (const auto& [name, sel] : arms) {
        cfg.selection = sel;
        rep.arms.push_back(run_arm(name, coarse, style_ref, ref, cams, cfg));
    }
    rep.seconds = seconds_since(t0);
    return rep;
}

BenchmarkReport ablation_benchmark(const GaussianScene& content, const AblationOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    const Camera ref = toy_reference_camera(opt.toy);
    const Image style_ref = render_quad(toy_style_texture(opt.style_cells), ref);
    const auto cams = toy_train_cameras(opt.toy);
    auto base = train::TrainConfig::stylize_defaults();
    base.total_iters = opt.iters;
    base.seed = opt.seed;
    base.control.max_gaussians = content.size() + opt.budget;

    BenchmarkReport rep;
    rep.scenario = "ablation";
    rep.arms.push_back(run_arm("full", content, style_ref, ref, cams, base));
    auto no_depth = base;
    no_depth.weights.depth = 0.0;
    rep.arms.push_back(run_arm("no_depth", content, style_ref, ref, cams, no_depth));
    auto no_view = base;
    no_view.pseudo_view = false;
    rep.arms.push_back(run_arm("no_pseudo_view", content, style_ref, ref, cams, no_view));
    rep.seconds = seconds_since(t0);
    return rep;
}

double path_psnr(const GaussianScene& a, const GaussianScene& b, const std::vector<Camera>& path) {
    if (path.empty()) {
        throw InvalidInput("path_psnr: empty camera path");
    }
    double sum = 0.0;
    for (const auto& cam : path) {
        sum += psnr(render(a, cam).color, render(b, cam).color);
    }
    return sum / static_cast<double>(path.size());
}

RobustnessResult robustness_protocol(const GaussianScene& content, const Image& style_ref, const Camera& ref_pose,
                                     const std::vector<Camera>& cameras, const Camera& held_pose,
                                     const std::vector<Camera>& path, const train::TrainConfig& cfg,
                                     std::pair<std::uint64_t, std::uint64_t> seeds) {
    RobustnessResult r;
    auto first = cfg;
    first.seed = seeds.first;
    r.base = train::stylize_scene(content, style_ref, ref_pose, cameras, first).scene;
    const Image new_ref = render(r.base, held_pose).color;
    auto second = cfg;
    second.seed = seeds.second;
    r.second = train::stylize_scene(content, new_ref, held_pose, cameras, second).scene;
    r.psnr = path_psnr(r.base, r.second, path);
    return r;
}

ThroughputResult throughput(const GaussianScene& scene, const Camera& cam, int repeats) {
    if (repeats < 1) {
        throw InvalidInput("throughput: repeats must be >= 1");
    }
    std::vector<double> t;
    ThroughputResult r;
    for (int i = 0; i < repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const RenderOutput out = render(scene, cam);
        t.push_back(seconds_since(t0));
        r.splats = out.visible_splats();
    }
    double mean = 0.0;
    for (double v : t) {
        mean += v;
    }
    mean /= static_cast<double>(t.size());
    double var = 0.0;
    for (double v : t) {
        var += (v - mean) * (v - mean);
    }
    r.mean_seconds = mean;
    r.stdev_seconds = t.size() > 1 ? std::sqrt(var / static_cast<double>(t.size() - 1)) : 0.0;
    r.fps = mean > 0.0 ? 1.0 / mean : 0.0;
    r.splats_per_sec = mean > 0.0 ? static_cast<double>(scene.size()) / mean : 0.0;
    return r;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw InvalidInput("fit_line: need at least two equally sized samples");
    }
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) {
        throw InvalidInput("fit_line: x values are all equal");
    }
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

GaussianScene throughput_scene(std::size_t n, const Camera& cam, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    GaussianScene scene;
    scene.gaussians.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = 2.0 + 2.0 * u(rng);
        const double px = u(rng) * (cam.width - 1), py = u(rng) * (cam.height - 1);
        Gaussian3D g;
        g.position = cam.to_world(Vec3((px - cam.cx) / cam.fx * z, (py - cam.cy) / cam.fy * z, z));
        g.log_scale = Vec3::Constant(std::log(1.5 * z / cam.fx));
        g.opacity_logit = logit(0.02 + 0.03 * u(rng));
        g.color_dc = Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
        scene.gaussians.push_back(g);
    }
    scene.reset_statistics();
    return scene;
}

BenchmarkReport throughput_benchmark(const ThroughputBenchOptions& opt) {
    if (opt.sizes.size() < 2) {
        throw InvalidInput("throughput_benchmark: need at least two sizes");
    }
    const auto t0 = std::chrono::steady_clock::now();
    const Camera cam = look_at(Vec3::Zero(), Vec3(0, 0, 1), Vec3(0, -1, 0), opt.image_size, opt.image_size,
                               static_cast<double>(opt.image_size));
    BenchmarkReport rep;
    rep.scenario = "throughput";
    std::vector<double> x, y;
    for (std::size_t n : opt.sizes) {
        const auto tr = throughput(throughput_scene(n, cam, opt.seed), cam, opt.repeats);
        ArmResult arm;
        arm.method = "n=" + std::to_string(n);
        arm.n_gaussians = n;
        arm.seconds = tr.mean_seconds;
        rep.arms.push_back(arm);
        x.push_back(static_cast<double>(n));
        y.push_back(tr.mean_seconds);
    }
    const LinearFit fit = fit_line(x, y);
    rep.r2 = fit.r2;
    if (fit.slope > 0.0) {
        rep.splats_per_sec = 1.0 / fit.slope;
    }
    rep.seconds = seconds_since(t0);
    return rep;
}

BenchmarkReport robustness_benchmark(const GaussianScene& content, const RobustnessOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    const Camera ref = toy_reference_camera(opt.toy);
    const Image style_ref = render_quad(toy_style_texture(opt.style_cells), ref);
    const auto cams = toy_train_cameras(opt.toy);
    const auto test = toy_test_cameras(opt.toy);
    auto cfg = train::TrainConfig::stylize_defaults();
    cfg.total_iters = opt.iters;
    cfg.control.max_gaussians = content.size() + opt.budget;
    const auto r = robustness_protocol(content, style_ref, ref, cams, test.front(), camera_path(test, opt.path_frames),
                                       cfg, opt.seeds);
    BenchmarkReport rep;
    rep.scenario = "robustness";
    rep.value = r.psnr;
    rep.seconds = seconds_since(t0);
    return rep;
}

GaussianScene toy_content_scene(const ToyOptions& opt, std::uint64_t seed, int iters) {
    const ToyDataset data = make_toy_dataset(toy_content_texture(), opt);
    auto cfg = train::TrainConfig::pretrain_defaults();
    cfg.total_iters = iters;
    cfg.seed = seed;
    return train::pretrain(data.train_images, data.train_cameras, cfg).scene;
}

} // namespace regs::eval
