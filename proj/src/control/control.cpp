#include "regs/control/control.hpp"

#include "regs/core/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace regs::control {

void ControlConfig::validate() const {
    if (!(threshold_start >= threshold_end && threshold_end > 0.0)) {
        throw InvalidInput("control: need threshold_start >= threshold_end > 0");
    }
    if (!(stop_fraction > 0.0 && stop_fraction <= 1.0)) {
        throw InvalidInput("control: stop_fraction must be in (0, 1]");
    }
    if (interval_iters < 1 || warmup_iters < 0) {
        throw InvalidInput("control: interval_iters must be >= 1 and warmup_iters >= 0");
    }
    if (prune_opacity < 0.0 || pos_threshold < 0.0) {
        throw InvalidInput("control: thresholds must be non-negative");
    }
}

void accumulate(GaussianScene& scene, const GradBuffers& grads) {
    if (grads.size() != scene.size() || !scene.statistics_consistent()) {
        throw InvalidState("accumulate: gradient buffers do not match the scene");
    }
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const double c = grads.color_grad_norm[i];
        const double p = grads.pos2d_grad_norm[i];
        scene.color_grad_accum[i] += c;
        scene.pos_grad_accum[i] += p;
        if (c != 0.0 || p != 0.0) {
            ++scene.contrib_count[i];
        }
    }
}

double threshold_at(int iter, int total_iters, const ControlConfig& cfg) {
    const double start = cfg.warmup_iters;
    const double stop = cfg.stop_fraction * total_iters;
    if (iter <= start) {
        return cfg.threshold_start;
    }
    if (iter >= stop) {
        return cfg.threshold_end;
    }
    const double f = (iter - start) / (stop - start);
    return cfg.threshold_start + f * (cfg.threshold_end - cfg.threshold_start);
}

bool is_event(int iter, int total_iters, const ControlConfig& cfg) {
    return iter > cfg.warmup_iters && (iter - cfg.warmup_iters) % cfg.interval_iters == 0 &&
           iter <= cfg.stop_fraction * total_iters;
}

namespace {

double mean_stat(const GaussianScene& scene, std::size_t i, Selection selection) {
    const double accum = selection == Selection::Positional ? scene.pos_grad_accum[i] : scene.color_grad_accum[i];
    return accum / static_cast<double>(std::max<std::int64_t>(scene.contrib_count[i], 1));
}

std::vector<std::size_t> select(const GaussianScene& scene, double threshold, Selection selection) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (mean_stat(scene, i, selection) > threshold) {
            out.push_back(i);
        }
    }
    return out;
}

} // namespace

std::vector<std::size_t> select_texture_guided(const GaussianScene& scene, double threshold) {
    return select(scene, threshold, Selection::TextureGuided);
}

std::vector<std::size_t> select_positional_baseline(const GaussianScene& scene, double pos_threshold) {
    return select(scene, pos_threshold, Selection::Positional);
}

std::vector<std::size_t> rank_by_score(const GaussianScene& scene, std::vector<std::size_t> indices,
                                       Selection selection) {
    std::stable_sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
        const double sa = mean_stat(scene, a, selection), sb = mean_stat(scene, b, selection);
        return sa > sb || (sa == sb && a < b);
    });
    return indices;
}

SplitResult structured_split(GaussianScene& scene, const std::vector<std::size_t>& indices,
                             std::optional<std::size_t> max_gaussians) {
    std::vector<std::uint8_t> chosen(scene.size(), 0);
    for (auto i : indices) {
        if (i >= scene.size()) {
            throw InvalidInput("structured_split: index " + std::to_string(i) + " out of range");
        }
        if (chosen[i]) {
            throw InvalidInput("structured_split: duplicate index " + std::to_string(i));
        }
        chosen[i] = 1;
    }

    SplitResult res;
    std::size_t count = scene.size();
    std::vector<std::size_t> parents;
    for (auto i : indices) {
        if (max_gaussians && count + 8 > *max_gaussians) {
            chosen[i] = 0;
            ++res.skipped;
            continue;
        }
        count += 8;
        parents.push_back(i);
    }
    res.split = parents.size();

    std::vector<Gaussian3D> out;
    out.reserve(count);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (!chosen[i]) {
            out.push_back(scene.gaussians[i]);
            res.origin.push_back(static_cast<std::ptrdiff_t>(i));
        }
    }
    const double shrink = std::log(8.0);
    for (auto i : parents) {
        const Gaussian3D& p = scene.gaussians[i];
        const Mat3 axes = quat_to_rotation(p.rotation) * clamped_scale(p.log_scale).asDiagonal();
        Gaussian3D child = p;
        child.log_scale = p.log_scale - Vec3::Constant(shrink);
        out.push_back(child);
        for (int corner = 0; corner < 8; ++corner) {
            const Vec3 sign((corner & 1) ? 0.5 : -0.5, (corner & 2) ? 0.5 : -0.5, (corner & 4) ? 0.5 : -0.5);
            child.position = p.position + axes * sign;
            out.push_back(child);
        }
        res.origin.insert(res.origin.end(), 9, -1);
    }
    scene.gaussians = std::move(out);
    scene.reset_statistics();
    return res;
}

SplitResult clone_and_split(GaussianScene& scene, const std::vector<std::size_t>& indices, double dense_scale,
                            std::uint64_t seed, std::optional<std::size_t> max_gaussians) {
    std::vector<std::uint8_t> mode(scene.size(), 0); // 1 clone, 2 split
    SplitResult res;
    std::size_t count = scene.size();
    for (auto i : indices) {
        if (i >= scene.size() || mode[i]) {
            throw InvalidInput("clone_and_split: invalid or duplicate index " + std::to_string(i));
        }
        if (max_gaussians && count + 1 > *max_gaussians) {
            ++res.skipped;
            continue;
        }
        ++count;
        ++res.split;
        mode[i] = clamped_scale(scene.gaussians[i].log_scale).maxCoeff() <= dense_scale ? 1 : 2;
    }
    std::vector<Gaussian3D> out;
    out.reserve(count);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (mode[i] != 2) {
            out.push_back(scene.gaussians[i]);
            res.origin.push_back(static_cast<std::ptrdiff_t>(i));
        }
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    const double shrink = std::log(1.6);
    for (auto i : indices) {
        if (mode[i] == 1) {
            out.push_back(scene.gaussians[i]);
            res.origin.push_back(-1);
        } else if (mode[i] == 2) {
            const Gaussian3D& p = scene.gaussians[i];
            const Mat3 axes = quat_to_rotation(p.rotation) * clamped_scale(p.log_scale).asDiagonal();
            for (int c = 0; c < 2; ++c) {
                Gaussian3D child = p;
                const Vec3 z(n(rng), n(rng), n(rng));
                child.position = p.position + axes * z;
                child.log_scale = p.log_scale - Vec3::Constant(shrink);
                out.push_back(child);
                res.origin.push_back(-1);
            }
        }
    }
    scene.gaussians = std::move(out);
    scene.reset_statistics();
    return res;
}

std::vector<std::ptrdiff_t> prune(GaussianScene& scene, double floor) {
    std::vector<std::ptrdiff_t> origin;
    std::vector<Gaussian3D> kept;
    std::vector<double> ca, pa;
    std::vector<std::int64_t> cc;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (sigmoid(scene.gaussians[i].opacity_logit) < floor) {
            continue;
        }
        origin.push_back(static_cast<std::ptrdiff_t>(i));
        kept.push_back(scene.gaussians[i]);
        ca.push_back(scene.color_grad_accum[i]);
        pa.push_back(scene.pos_grad_accum[i]);
        cc.push_back(scene.contrib_count[i]);
    }
    scene.gaussians = std::move(kept);
    scene.color_grad_accum = std::move(ca);
    scene.pos_grad_accum = std::move(pa);
    scene.contrib_count = std::move(cc);
    return origin;
}

std::string ControlEvent::to_json() const {
    return nlohmann::json{{"iter", iter},       {"selected", selected}, {"new_count", new_count},
                          {"threshold", threshold}, {"split", split},   {"skipped", skipped},
                          {"pruned", pruned}}
        .dump();
}

ControlEvent run_event(GaussianScene& scene, int iter, int total_iters, const ControlConfig& cfg,
                       Selection selection) {
    ControlEvent ev;
    ev.iter = iter;
    std::vector<std::size_t> picked;
    if (selection == Selection::TextureGuided) {
        ev.threshold = threshold_at(iter, total_iters, cfg);
        picked = select_texture_guided(scene, ev.threshold);
    } else if (selection == Selection::Positional) {
        ev.threshold = cfg.pos_threshold;
        picked = select_positional_baseline(scene, ev.threshold);
    }
    ev.selected = picked.size();
    const auto split = structured_split(scene, rank_by_score(scene, std::move(picked), selection), cfg.max_gaussians);
    ev.split = split.split;
    ev.skipped = split.skipped;
    const auto kept = prune(scene, cfg.prune_opacity);
    ev.pruned = split.origin.size() - kept.size();
    for (auto k : kept) {
        ev.origin.push_back(split.origin[static_cast<std::size_t>(k)]);
    }
    scene.reset_statistics();
    ev.new_count = scene.size();
    return ev;
}

} // namespace regs::control
