#pragma once

#include "regs/raster/rasterizer.hpp"

#include <cstdint>
#include <vector>

namespace regs {

// Forward-pass state kept alive for backward: the depth-sorted splats, the
// per-tile splat lists (CSR) and, per pixel, how many tile-list entries
// were walked before blending stopped.
struct RenderContext {
    Camera camera;
    int degree = 0;
    std::uint64_t scene_fingerprint = 0;
    std::size_t scene_size = 0;
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<Splat2D> splats;
    std::vector<std::size_t> tile_offsets;
    std::vector<std::uint32_t> tile_entries;
    std::vector<std::uint32_t> n_contrib;
};

} // namespace regs
