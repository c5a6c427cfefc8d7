#pragma once

#include "regs/core/image.hpp"

namespace regs::eval {

inline constexpr double kPsnrCap = 99.0;

// 10 log10(1 / MSE) for images in [0, 1]; identical images give kPsnrCap.
double psnr(const Image& a, const Image& b);
double mse(const Image& a, const Image& b);
double l1(const Image& a, const Image& b);

} // namespace regs::eval
