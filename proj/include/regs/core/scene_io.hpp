#pragma once

#include "regs/core/gaussian.hpp"

#include <filesystem>

namespace regs {

// Binary little-endian PLY, one `vertex` element of float32 properties:
//   x y z scale_0..2 rot_0..3 opacity f_dc_0..2 [f_rest_0..8]
// Scales are log-space, rotations wxyz, opacity is a logit. f_rest is
// channel-major (f_rest_{3c+k} = channel c of linear basis k).
//
// Parameters are narrowed to float32 on save, so load(save(s)) is exact
// for any scene whose values are float-representable (in particular any
// scene that was itself loaded). Statistics are not stored; a loaded scene
// has zeroed statistics.
void scene_save(const GaussianScene& scene, const std::filesystem::path& path);

// Throws DecodeError with kind MalformedHeader, Truncated or UnknownVersion.
GaussianScene scene_load(const std::filesystem::path& path);

} // namespace regs
