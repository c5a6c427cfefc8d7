#pragma once

#include "regs/core/camera.hpp"
#include "regs/core/image.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace regs::cli {

// root/images/*.png in file-name order, root/cameras.json with one camera per
// image in the same order, optional root/reference.png with
// root/reference_camera.json and optional root/features/.
struct Dataset {
    std::filesystem::path root;
    std::vector<std::string> names; // image file stems
    std::vector<Image> images;
    std::vector<Camera> cameras;
    std::optional<Image> reference;
    std::optional<Camera> reference_camera;
};

// Throws InvalidInput for a missing or empty images/, a camera count or
// resolution that does not match the images, or a reference without a
// matching camera.
Dataset load_dataset(const std::filesystem::path& root);

void save_dataset(const Dataset& data, const std::filesystem::path& root);

} // namespace regs::cli
