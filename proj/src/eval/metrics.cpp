#include "regs/eval/metrics.hpp"

#include "regs/core/error.hpp"

#include <algorithm>
#include <cmath>

namespace regs::eval {

namespace {

void require_same(const Image& a, const Image& b) {
    if (!a.same_shape(b) || a.data.empty()) {
        throw InvalidInput("metrics: images must be non-empty and equally shaped");
    }
}

} // namespace

double mse(const Image& a, const Image& b) {
    require_same(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return s / static_cast<double>(a.data.size());
}

double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b);
    if (m <= 0.0) {
        return kPsnrCap;
    }
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

double l1(const Image& a, const Image& b) {
    require_same(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        s += std::abs(a.data[i] - b.data[i]);
    }
    return s / static_cast<double>(a.data.size());
}

} // namespace regs::eval
