#include "regs/train/train.hpp"

#include "regs/raster/rasterizer.hpp"
#include "regs/stylize/features.hpp"
#include "regs/stylize/pseudo_view.hpp"

#include <cmath>
#include <random>

namespace regs::train {

namespace {

struct ViewData {
    Image content;
    Image depth;
    stylize::PseudoView pseudo;
    std::vector<stylize::GuidanceIndexMap> guidance;
};

} // namespace

TrainResult stylize_scene(const GaussianScene& content, const Image& style_ref, const Camera& ref_pose,
                          const std::vector<Camera>& cameras, const TrainConfig& cfg,
                          const GuidanceProvider& guidance, const IterCallback& on_iter) {
    cfg.validate();
    ref_pose.validate();
    if (cameras.empty()) {
        throw InvalidInput("stylize: no training cameras");
    }
    if (content.empty()) {
        throw InvalidInput("stylize: content scene is empty");
    }
    if (style_ref.channels != 3 || style_ref.width != ref_pose.width || style_ref.height != ref_pose.height) {
        throw InvalidInput("stylize: style reference resolution does not match the reference camera");
    }
    TrainResult res;
    res.extent = content.extent();
    res.scene = content;
    res.scene.reset_statistics();
    GaussianScene& scene = res.scene;

    const RenderOutput ref_content = render(content, ref_pose);
    const Image ref_depth = stylize::expected_depth(ref_content.depth, ref_content.final_transmittance);
    const stylize::FeatureMap content_ref_feat = stylize::extract_builtin(ref_content.color);
    const std::vector<double> style_feat = stylize::extract_builtin_double(style_ref);
    std::vector<ViewData> views(cameras.size());
    for (std::size_t i = 0; i < cameras.size(); ++i) {
        cameras[i].validate();
        const RenderOutput out = render(content, cameras[i]);
        views[i].content = out.color;
        views[i].depth = out.depth;
        if (cfg.pseudo_view) {
            views[i].pseudo =
                stylize::synthesize_pseudo_view(style_ref, ref_depth, ref_pose, cameras[i],
                                                stylize::expected_depth(out.depth, out.final_transmittance), res.extent);
        }
        if (guidance) {
            views[i].guidance = guidance(i, out.color, ref_content.color);
        } else {
            views[i].guidance.push_back(stylize::match_nearest(stylize::extract_builtin(out.color), content_ref_feat));
        }
        if (views[i].guidance.empty()) {
            throw InvalidInput("stylize: guidance provider returned no maps for view " + std::to_string(i));
        }
    }

    AdamState adam(scene.size());
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, cameras.size() - 1);
    const auto& w = cfg.weights;

    for (int it = 1; it <= cfg.total_iters; ++it) {
        stylize::LossParts parts;
        const RenderOutput ref_out = render(scene, ref_pose);
        auto rec = stylize::loss_rec(ref_out.color, style_ref);
        parts.rec = rec.value;
        for (auto& v : rec.grad.data) {
            v *= w.rec;
        }
        GradBuffers grads = backward(scene, ref_pose, ref_out, rec.grad, Image());

        const std::size_t vi = pick(rng);
        const Camera& cam = cameras[vi];
        const ViewData& view = views[vi];
        const RenderOutput out = render(scene, cam);
        Image dcolor(cam.width, cam.height, 3);
        if (cfg.pseudo_view) {
            const auto l = stylize::loss_view(out.color, view.pseudo);
            parts.view = l.value;
            for (std::size_t k = 0; k < dcolor.data.size(); ++k) {
                dcolor.data[k] += w.view * l.grad.data[k];
            }
        }
        auto depth = stylize::loss_depth(out.depth, view.depth);
        parts.depth = depth.value;
        for (auto& v : depth.grad.data) {
            v *= w.depth;
        }

        const double share = 1.0 / static_cast<double>(view.guidance.size());
        const std::vector<double> feat = stylize::extract_builtin_double(out.color);
        std::vector<double> dfeat(feat.size(), 0.0);
        for (const auto& g : view.guidance) {
            const auto t = stylize::loss_tcm(feat, stylize::kBuiltinChannels, g, style_feat);
            parts.tcm += share * t.value;
            for (std::size_t k = 0; k < dfeat.size(); ++k) {
                dfeat[k] += share * w.tcm * t.grad_features[k];
            }
            const auto c = stylize::loss_color(out.color, style_ref, g);
            parts.color += share * c.value;
            for (std::size_t k = 0; k < dcolor.data.size(); ++k) {
                dcolor.data[k] += share * w.color * c.grad.data[k];
            }
        }
        const Image dtcm = stylize::builtin_backward(out.color, dfeat);
        for (std::size_t k = 0; k < dcolor.data.size(); ++k) {
            dcolor.data[k] += dtcm.data[k];
        }

        const double total = stylize::total_loss(parts, w);
        if (!std::isfinite(total)) {
            throw DivergedError("stylize: non-finite loss at iteration " + std::to_string(it), scene, it);
        }
        grads += backward(scene, cam, out, dcolor, depth.grad);
        adam_step(scene, grads, adam, cfg.lr, res.extent);
        control::accumulate(scene, grads);

        IterMetrics m;
        m.iter = it;
        m.loss_total = total;
        m.parts = parts;
        m.n_gaussians = scene.size();
        res.metrics.push_back(m);
        if (on_iter) {
            on_iter(m, scene);
        }

        if (it == cfg.control.warmup_iters) {
            scene.reset_statistics();
        }
        if (control::is_event(it, cfg.total_iters, cfg.control)) {
            auto ev = control::run_event(scene, it, cfg.total_iters, cfg.control, cfg.selection);
            adam.remap(ev.origin);
            res.events.push_back(std::move(ev));
        }
    }
    return res;
}

} // namespace regs::train
