#pragma once

#include "regs/control/control.hpp"
#include "regs/core/camera.hpp"
#include "regs/core/error.hpp"
#include "regs/core/gaussian.hpp"
#include "regs/core/image.hpp"
#include "regs/stylize/losses.hpp"
#include "regs/train/optimizer.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace regs::train {

struct TrainConfig {
    int total_iters = 3000;
    LearningRates lr;
    stylize::LossWeights weights;
    control::ControlConfig control;
    control::Selection selection = control::Selection::TextureGuided;
    bool pseudo_view = true;
    std::uint64_t seed = 0;
    // Pretraining only.
    int init_gaussians = 100;
    double dense_fraction = 0.01; // clone instead of split below this fraction of the extent

    void validate() const;

    static TrainConfig pretrain_defaults();
    static TrainConfig stylize_defaults() { return TrainConfig{}; }
};

struct IterMetrics {
    int iter = 0;
    double loss_total = 0.0;
    stylize::LossParts parts;
    std::size_t n_gaussians = 0;

    std::string to_json() const;
};

using IterCallback = std::function<void(const IterMetrics&, const GaussianScene&)>;

struct TrainResult {
    GaussianScene scene;
    std::vector<IterMetrics> metrics;
    std::vector<control::ControlEvent> events;
    double extent = 0.0;
};

// Thrown when a loss turns non-finite; carries the model at that point.
class DivergedError : public NumericalError {
public:
    DivergedError(const std::string& what, GaussianScene scene, int iter)
        : NumericalError(what), scene(std::move(scene)), iter(iter) {}
    GaussianScene scene;
    int iter;
};

// Bounding box of points seen by every camera, estimated by rejection
// sampling a cube around the point closest to all optical axes.
// Throws InvalidInput when no sample is seen by all cameras.
struct Box3 {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
    double diagonal() const { return (hi - lo).norm(); }
};
Box3 frusta_intersection(const std::vector<Camera>& cameras, std::uint64_t seed);

GaussianScene initialize_scene(const Box3& box, int n, std::uint64_t seed);

// Photometric L1 fit with positional clone/split densification and opacity
// pruning. Starts from `init` when given, otherwise from initialize_scene.
TrainResult pretrain(const std::vector<Image>& images, const std::vector<Camera>& cameras, const TrainConfig& cfg,
                     const std::optional<GaussianScene>& init = std::nullopt, const IterCallback& on_iter = {});

// Guidance maps for training view i, matching its content render against the
// content render at the reference pose, on the builtin feature grids. Several
// maps are averaged in L_tcm and L_color.
using GuidanceProvider = std::function<std::vector<stylize::GuidanceIndexMap>(
    std::size_t view, const Image& content_view, const Image& content_ref)>;

TrainResult stylize_scene(const GaussianScene& content, const Image& style_ref, const Camera& ref_pose,
                          const std::vector<Camera>& cameras, const TrainConfig& cfg,
                          const GuidanceProvider& guidance = {}, const IterCallback& on_iter = {});

} // namespace regs::train
