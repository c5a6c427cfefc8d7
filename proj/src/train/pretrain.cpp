#include "regs/train/train.hpp"

#include "regs/raster/rasterizer.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

namespace regs::train {

void TrainConfig::validate() const {
    if (total_iters < 0) {
        throw InvalidInput("train: total_iters must be non-negative");
    }
    if (init_gaussians < 1) {
        throw InvalidInput("train: init_gaussians must be >= 1");
    }
    if (!(dense_fraction > 0.0)) {
        throw InvalidInput("train: dense_fraction must be positive");
    }
    lr.validate();
    weights.validate();
    control.validate();
}

TrainConfig TrainConfig::pretrain_defaults() {
    TrainConfig cfg;
    cfg.total_iters = 2000;
    cfg.selection = control::Selection::Positional;
    cfg.pseudo_view = false;
    cfg.control.max_gaussians = 500;
    return cfg;
}

std::string IterMetrics::to_json() const {
    return nlohmann::json{{"iter", iter},
                          {"loss_total", loss_total},
                          {"loss_rec", parts.rec},
                          {"loss_depth", parts.depth},
                          {"loss_view", parts.view},
                          {"loss_tcm", parts.tcm},
                          {"loss_color", parts.color},
                          {"n_gaussians", n_gaussians}}
        .dump();
}

namespace {

bool in_frustum(const Camera& cam, const Vec3& p) {
    const Vec3 c = cam.to_camera(p);
    if (c.z() <= kNearPlane) {
        return false;
    }
    const double u = cam.fx * c.x() / c.z() + cam.cx;
    const double v = cam.fy * c.y() / c.z() + cam.cy;
    return u >= -0.5 && v >= -0.5 && u <= cam.width - 0.5 && v <= cam.height - 0.5;
}

} // namespace

Box3 frusta_intersection(const std::vector<Camera>& cameras, std::uint64_t seed) {
    if (cameras.empty()) {
        throw InvalidInput("frusta_intersection: no cameras");
    }
    // Least-squares point nearest to all optical axes.
    Mat3 a = Mat3::Zero();
    Vec3 b = Vec3::Zero();
    double mean_dist = 0.0;
    for (const auto& cam : cameras) {
        const Vec3 o = cam.center();
        const Vec3 d = cam.rotation().transpose() * Vec3(0.0, 0.0, 1.0);
        const Mat3 p = Mat3::Identity() - d * d.transpose();
        a += p;
        b += p * o;
    }
    Vec3 center;
    if (std::abs(a.determinant()) > 1e-9) {
        center = a.ldlt().solve(b);
    } else {
        const auto& cam = cameras.front();
        center = cam.center() + cam.rotation().transpose() * Vec3(0.0, 0.0, 1.0);
    }
    for (const auto& cam : cameras) {
        mean_dist += (cam.center() - center).norm();
    }
    mean_dist /= static_cast<double>(cameras.size());
    const double half = std::max(0.5 * mean_dist, 1e-6);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-half, half);
    Box3 box;
    bool any = false;
    for (int s = 0; s < 20000; ++s) {
        const Vec3 p = center + Vec3(u(rng), u(rng), u(rng));
        bool seen = true;
        for (const auto& cam : cameras) {
            if (!in_frustum(cam, p)) {
                seen = false;
                break;
            }
        }
        if (!seen) {
            continue;
        }
        if (!any) {
            box.lo = box.hi = p;
            any = true;
        } else {
            box.lo = box.lo.cwiseMin(p);
            box.hi = box.hi.cwiseMax(p);
        }
    }
    if (!any) {
        throw InvalidInput("frusta_intersection: camera frusta do not overlap");
    }
    return box;
}

GaussianScene initialize_scene(const Box3& box, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double sigma = std::max(box.diagonal() / 20.0, 1e-6);
    GaussianScene scene;
    for (int i = 0; i < n; ++i) {
        Gaussian3D g;
        for (int k = 0; k < 3; ++k) {
            g.position[k] = box.lo[k] + u(rng) * (box.hi[k] - box.lo[k]);
        }
        g.log_scale = Vec3::Constant(std::log(sigma));
        g.opacity_logit = logit(0.1);
        scene.push_back(g);
    }
    scene.reset_statistics();
    return scene;
}

TrainResult pretrain(const std::vector<Image>& images, const std::vector<Camera>& cameras, const TrainConfig& cfg,
                     const std::optional<GaussianScene>& init, const IterCallback& on_iter) {
    cfg.validate();
    if (images.size() < 2 || images.size() != cameras.size()) {
        throw InvalidInput("pretrain: need at least two images with one camera each");
    }
    for (std::size_t i = 0; i < images.size(); ++i) {
        cameras[i].validate();
        if (images[i].channels != 3 || images[i].width != cameras[i].width || images[i].height != cameras[i].height ||
            !images[i].same_shape(images[0])) {
            throw InvalidInput("pretrain: image " + std::to_string(i) + " has inconsistent size");
        }
    }
    const Box3 box = frusta_intersection(cameras, cfg.seed);
    TrainResult res;
    res.extent = box.diagonal();
    res.scene = init ? *init : initialize_scene(box, cfg.init_gaussians, cfg.seed + 1);
    res.scene.reset_statistics();
    GaussianScene& scene = res.scene;
    AdamState adam(scene.size());
    std::mt19937_64 rng(cfg.seed + 2);
    std::uniform_int_distribution<std::size_t> pick(0, cameras.size() - 1);

    for (int it = 1; it <= cfg.total_iters; ++it) {
        const std::size_t v = pick(rng);
        const RenderOutput out = render(scene, cameras[v]);
        const auto l = stylize::loss_rec(out.color, images[v]);
        if (!std::isfinite(l.value)) {
            throw DivergedError("pretrain: non-finite loss at iteration " + std::to_string(it), scene, it);
        }
        const GradBuffers g = backward(scene, cameras[v], out, l.grad, Image());
        adam_step(scene, g, adam, cfg.lr, res.extent);
        control::accumulate(scene, g);

        IterMetrics m;
        m.iter = it;
        m.loss_total = l.value;
        m.parts.rec = l.value;
        m.n_gaussians = scene.size();
        res.metrics.push_back(m);
        if (on_iter) {
            on_iter(m, scene);
        }

        if (it == cfg.control.warmup_iters) {
            scene.reset_statistics();
        }
        if (cfg.selection != control::Selection::None && control::is_event(it, cfg.total_iters, cfg.control)) {
            control::ControlEvent ev;
            ev.iter = it;
            ev.threshold = cfg.control.pos_threshold;
            auto picked = control::select_positional_baseline(scene, ev.threshold);
            ev.selected = picked.size();
            picked = control::rank_by_score(scene, std::move(picked), control::Selection::Positional);
            const auto split = control::clone_and_split(scene, picked, cfg.dense_fraction * res.extent,
                                                        cfg.seed + 3 + static_cast<std::uint64_t>(it),
                                                        cfg.control.max_gaussians);
            ev.split = split.split;
            ev.skipped = split.skipped;
            const auto kept = control::prune(scene, cfg.control.prune_opacity);
            ev.pruned = split.origin.size() - kept.size();
            for (auto k : kept) {
                ev.origin.push_back(split.origin[static_cast<std::size_t>(k)]);
            }
            scene.reset_statistics();
            ev.new_count = scene.size();
            adam.remap(ev.origin);
            res.events.push_back(std::move(ev));
        }
    }
    return res;
}

} // namespace regs::train
