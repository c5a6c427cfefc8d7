#include "regs/cli/dataset.hpp"

#include "regs/core/error.hpp"

#include <algorithm>
#include <cstdio>

namespace regs::cli {

namespace fs = std::filesystem;

Dataset load_dataset(const fs::path& root) {
    Dataset d;
    d.root = root;
    const fs::path images_dir = root / "images";
    if (!fs::is_directory(images_dir)) {
        throw InvalidInput("dataset: missing directory " + images_dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(images_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            files.push_back(entry.path());
        }
    }
    if (files.empty()) {
        throw InvalidInput("dataset: no PNG images in " + images_dir.string());
    }
    std::sort(files.begin(), files.end());
    const fs::path cams_path = root / "cameras.json";
    if (!fs::exists(cams_path)) {
        throw InvalidInput("dataset: missing " + cams_path.string());
    }
    d.cameras = load_cameras_json(cams_path);
    if (d.cameras.size() != files.size()) {
        throw InvalidInput("dataset: " + std::to_string(files.size()) + " images but " +
                           std::to_string(d.cameras.size()) + " cameras");
    }
    for (std::size_t i = 0; i < files.size(); ++i) {
        d.names.push_back(files[i].stem().string());
        d.images.push_back(read_png_rgb(files[i]));
        const Image& img = d.images.back();
        if (img.width != d.cameras[i].width || img.height != d.cameras[i].height) {
            throw InvalidInput("dataset: camera " + std::to_string(i) + " resolution does not match " +
                               files[i].filename().string());
        }
    }
    const fs::path ref_path = root / "reference.png";
    const fs::path ref_cam_path = root / "reference_camera.json";
    if (fs::exists(ref_path)) {
        if (!fs::exists(ref_cam_path)) {
            throw InvalidInput("dataset: reference.png without reference_camera.json");
        }
        d.reference = read_png_rgb(ref_path);
        d.reference_camera = load_camera_json(ref_cam_path);
        if (d.reference->width != d.reference_camera->width || d.reference->height != d.reference_camera->height) {
            throw InvalidInput("dataset: reference camera resolution does not match reference.png");
        }
    }
    return d;
}

void save_dataset(const Dataset& data, const fs::path& root) {
    if (data.images.size() != data.cameras.size() ||
        (!data.names.empty() && data.names.size() != data.images.size())) {
        throw InvalidInput("save_dataset: images, names and cameras differ in count");
    }
    fs::create_directories(root / "images");
    for (std::size_t i = 0; i < data.images.size(); ++i) {
        std::string name;
        if (data.names.empty()) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "view_%03zu", i);
            name = buf;
        } else {
            name = data.names[i];
        }
        write_png_rgb(data.images[i], root / "images" / (name + ".png"));
    }
    save_cameras_json(data.cameras, root / "cameras.json");
    if (data.reference) {
        if (!data.reference_camera) {
            throw InvalidInput("save_dataset: reference image without camera");
        }
        write_png_rgb(*data.reference, root / "reference.png");
        save_cameras_json({*data.reference_camera}, root / "reference_camera.json");
    }
}

} // namespace regs::cli
