#pragma once

#include "regs/core/gaussian.hpp"
#include "regs/raster/rasterizer.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace regs::control {

struct ControlConfig {
    int warmup_iters = 100;
    int interval_iters = 100;
    double stop_fraction = 0.5;
    double threshold_start = 1e-5;
    double threshold_end = 5e-6;
    double pos_threshold = 2e-4;
    double prune_opacity = 0.005;
    std::optional<std::size_t> max_gaussians;

    void validate() const;
};

enum class Selection { TextureGuided, Positional, None };

// Adds per-gaussian color and 2D-position gradient norms to the scene
// statistics; contrib_count grows where either norm is nonzero.
void accumulate(GaussianScene& scene, const GradBuffers& grads);

// Color-gradient threshold: threshold_start up to the end of warm-up, linear
// to threshold_end at stop_fraction * total_iters, constant afterwards.
double threshold_at(int iter, int total_iters, const ControlConfig& cfg);

// True for iterations warmup + k * interval (k >= 1) up to the stop point.
bool is_event(int iter, int total_iters, const ControlConfig& cfg);

// Indices (ascending) whose mean statistic accum / max(count, 1) exceeds
// the threshold.
std::vector<std::size_t> select_texture_guided(const GaussianScene& scene, double threshold);
std::vector<std::size_t> select_positional_baseline(const GaussianScene& scene, double pos_threshold);

// Orders indices by descending mean statistic (ties by index) so that a
// budget cap keeps the strongest candidates.
std::vector<std::size_t> rank_by_score(const GaussianScene& scene, std::vector<std::size_t> indices,
                                       Selection selection);

struct SplitResult {
    std::size_t split = 0;
    std::size_t skipped = 0;
    // For every gaussian of the updated scene, its index before the
    // operation, or -1 for a newly created child.
    std::vector<std::ptrdiff_t> origin;
};

// Replaces each parent by 9 children: one at the center and eight at
// R diag(sigma) (+-1/2, +-1/2, +-1/2), all with sigma / 8. Survivors keep
// their order; children are appended in the order of `indices`. A split
// that would exceed max_gaussians is skipped. Statistics are zeroed.
SplitResult structured_split(GaussianScene& scene, const std::vector<std::size_t>& indices,
                             std::optional<std::size_t> max_gaussians = std::nullopt);

// Baseline densification used for content pretraining: each index is
// cloned when its largest scale is <= dense_scale, otherwise split into two
// children drawn from the parent distribution with scales / 1.6. Indices
// are processed in order while the result stays within max_gaussians.
SplitResult clone_and_split(GaussianScene& scene, const std::vector<std::size_t>& indices, double dense_scale,
                            std::uint64_t seed, std::optional<std::size_t> max_gaussians = std::nullopt);

// Removes gaussians with sigmoid(opacity_logit) < floor. Returns the origin
// map of the survivors.
std::vector<std::ptrdiff_t> prune(GaussianScene& scene, double floor);

struct ControlEvent {
    int iter = 0;
    std::size_t selected = 0;
    std::size_t split = 0;
    std::size_t skipped = 0;
    std::size_t pruned = 0;
    std::size_t new_count = 0;
    double threshold = 0.0;
    std::vector<std::ptrdiff_t> origin; // composed split + prune map

    std::string to_json() const;
};

// One control event: select, rank, split under the budget, prune, reset
// statistics.
ControlEvent run_event(GaussianScene& scene, int iter, int total_iters, const ControlConfig& cfg, Selection selection);

} // namespace regs::control
