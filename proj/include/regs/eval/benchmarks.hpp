#pragma once

#include "regs/core/camera.hpp"
#include "regs/core/gaussian.hpp"
#include "regs/core/image.hpp"
#include "regs/eval/toy.hpp"
#include "regs/train/train.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace regs::eval {

struct ArmResult {
    std::string method;
    double l1 = 0.0;   // reference view against the style reference
    double psnr = 0.0; // same pair
    std::size_t n_gaussians = 0;
    std::optional<std::size_t> budget;
    std::optional<double> depth_drift; // fraction of the content extent
    std::optional<double> consistency;
    double seconds = 0.0;
};

struct BenchmarkReport {
    std::string scenario;
    std::vector<ArmResult> arms;
    std::optional<double> value;   // scenario-level number, e.g. robustness PSNR
    std::optional<double> r2;      // throughput linearity
    std::optional<double> splats_per_sec;
    std::string ref_lpips = "not computed";
    double seconds = 0.0;

    std::string to_json() const;
    static BenchmarkReport from_json(const std::string& text);
    const ArmResult& arm(const std::string& method) const;
};

// Mean |D_a - D_b| over pixels where the first scene accumulates at least
// half opacity, averaged over cameras and divided by the first scene's extent.
double depth_drift(const GaussianScene& content, const GaussianScene& stylized, const std::vector<Camera>& cameras);

// Mean masked L1 between render B and render A warped to pose B with the
// rendered depths. Pairs whose warp covers no pixel are skipped.
double consistency_score(const GaussianScene& scene, const std::vector<std::pair<Camera, Camera>>& pairs);

// Neighbouring pairs of the given cameras in both directions.
std::vector<std::pair<Camera, Camera>> neighbour_pairs(const std::vector<Camera>& cameras);

// Flat gaussians on a grid x grid lattice over the toy quad, colored by the
// texture at each cell center, then fitted without densification.
GaussianScene coarse_quad_scene(const QuadTexture& tex, int grid, const ToyOptions& opt, int fit_iters,
                                std::uint64_t seed);

struct ControlBenchOptions {
    ToyOptions toy;
    int content_grid = 3;
    int style_cells = 4;
    int fit_iters = 300;
    std::size_t budget = 200;
    int iters = 3000;
    std::uint64_t seed = 0;
};

// Stylizes the same coarse scene towards a recolored fine checker with
// texture-guided, positional and no densification under one budget.
// Throws InvalidInput for 0 < budget < 8.
BenchmarkReport control_benchmark(const ControlBenchOptions& opt);

struct AblationOptions {
    ToyOptions toy;
    int style_cells = 4;
    int iters = 3000;
    std::size_t budget = 200; // added on top of the content scene
    std::uint64_t seed = 0;
};

// Full model against the lambda_depth = 0 and no-pseudo-view ablations on a
// pretrained toy content scene. Arms report depth drift and consistency.
BenchmarkReport ablation_benchmark(const GaussianScene& content, const AblationOptions& opt);

// The recolored checker used as a style reference by the benchmarks.
QuadTexture toy_style_texture(int cells);

struct RobustnessResult {
    double psnr = 0.0;
    GaussianScene base;
    GaussianScene second;
};

// Stylizes content with style_ref, renders the result at held_pose as a new
// reference, stylizes a fresh copy with it (and seeds.second) and returns the
// mean PSNR between both models along `path`.
RobustnessResult robustness_protocol(const GaussianScene& content, const Image& style_ref, const Camera& ref_pose,
                                     const std::vector<Camera>& cameras, const Camera& held_pose,
                                     const std::vector<Camera>& path, const train::TrainConfig& cfg,
                                     std::pair<std::uint64_t, std::uint64_t> seeds);

// Mean PSNR between renders of two scenes along a camera path.
double path_psnr(const GaussianScene& a, const GaussianScene& b, const std::vector<Camera>& path);

struct ThroughputResult {
    double mean_seconds = 0.0;
    double stdev_seconds = 0.0;
    double fps = 0.0;
    double splats_per_sec = 0.0;
    std::size_t splats = 0;
};

ThroughputResult throughput(const GaussianScene& scene, const Camera& cam, int repeats);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Random scene of n small, faint gaussians in front of cam. Pixels stay above
// the transmittance floor up to 1e5 splats at 128x128, so every splat is blended.
GaussianScene throughput_scene(std::size_t n, const Camera& cam, std::uint64_t seed);

struct ThroughputBenchOptions {
    std::vector<std::size_t> sizes{1000, 3000, 10000, 30000, 100000};
    int image_size = 128;
    int repeats = 3;
    std::uint64_t seed = 0;
};

// Render time against splat count; one arm per size (seconds = mean frame
// time), r2 of the linear fit and splats_per_sec = 1 / slope.
BenchmarkReport throughput_benchmark(const ThroughputBenchOptions& opt);

struct RobustnessOptions {
    ToyOptions toy;
    int style_cells = 4;
    int iters = 3000;
    int path_frames = 20;
    std::size_t budget = 200; // added on top of the content scene
    std::pair<std::uint64_t, std::uint64_t> seeds{0, 1};
};

// robustness_protocol on the toy benchmark: the first held-out camera gives
// the second reference and the path runs through the held-out cameras.
// value = mean path PSNR.
BenchmarkReport robustness_benchmark(const GaussianScene& content, const RobustnessOptions& opt);

// Toy content model: pretraining defaults on the toy dataset.
GaussianScene toy_content_scene(const ToyOptions& opt, std::uint64_t seed, int iters = 2000);

} // namespace regs::eval
