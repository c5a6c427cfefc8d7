#pragma once

#include "regs/core/image.hpp"
#include "regs/stylize/features.hpp"
#include "regs/stylize/pseudo_view.hpp"

#include <string>
#include <vector>

namespace regs::stylize {

// For every content feature location (row-major), the matched reference
// location as a row-major index into the reference grid.
struct GuidanceIndexMap {
    int width = 0;
    int height = 0;
    int ref_width = 0;
    int ref_height = 0;
    std::vector<int> target;

    int target_x(std::size_t i) const { return target[i] % ref_width; }
    int target_y(std::size_t i) const { return target[i] / ref_width; }
};

// Cosine-distance nearest neighbour; ties go to the lowest reference index.
GuidanceIndexMap match_nearest(const FeatureMap& content, const FeatureMap& ref);

// Re-expresses a guidance map computed on another grid on the given
// content / reference grids by nearest-cell lookup.
GuidanceIndexMap resample_guidance(const GuidanceIndexMap& g, int width, int height, int ref_width,
                                   int ref_height);

struct LossValue {
    double value = 0.0;
    Image grad; // d value / d input, same shape as the differentiated input
};

LossValue loss_view(const Image& render, const PseudoView& pv);
LossValue loss_depth(const Image& d_hat, const Image& d_ref);
LossValue loss_rec(const Image& render, const Image& style_ref);

// Mean cosine distance between stylized features and the gathered reference
// features. Locations whose reference feature is zero contribute nothing.
// grad_features holds d value / d F_stylized in the map's layout.
struct TcmValue {
    double value = 0.0;
    std::vector<double> grad_features;
};
TcmValue loss_tcm(const std::vector<double>& f_stylized, int channels, const GuidanceIndexMap& guidance,
                  const std::vector<double>& f_styleref);
TcmValue loss_tcm(const FeatureMap& f_stylized, const GuidanceIndexMap& guidance, const FeatureMap& f_styleref);

// Mean squared L2 distance between stride-8 patch means of the render and of
// the style reference at the guided location. grad is w.r.t. render.
LossValue loss_color(const Image& render, const Image& style_ref, const GuidanceIndexMap& guidance);

struct LossWeights {
    double rec = 1.0;
    double depth = 10.0;
    double view = 2.0;
    double tcm = 1.0;
    double color = 15.0;

    void validate() const;
};

struct LossParts {
    double rec = 0.0;
    double depth = 0.0;
    double view = 0.0;
    double tcm = 0.0;
    double color = 0.0;
};

double total_loss(const LossParts& parts, const LossWeights& w);

} // namespace regs::stylize
