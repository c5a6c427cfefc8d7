#include "regs/core/scene_io.hpp"

#include "regs/core/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace regs {

namespace {

static_assert(std::endian::native == std::endian::little, "scene IO assumes a little-endian host");

constexpr int kBaseProps = 14;
constexpr int kRestProps = 9;

std::vector<std::string> property_names(bool with_rest) {
    std::vector<std::string> names = {"x",     "y",     "z",     "scale_0", "scale_1", "scale_2", "rot_0",
                                      "rot_1", "rot_2", "rot_3", "opacity", "f_dc_0",  "f_dc_1",  "f_dc_2"};
    if (with_rest) {
        for (int i = 0; i < kRestProps; ++i) {
            names.push_back("f_rest_" + std::to_string(i));
        }
    }
    return names;
}

void put(std::vector<float>& row, const double* v, int n) {
    for (int i = 0; i < n; ++i) {
        row.push_back(static_cast<float>(v[i]));
    }
}

} // namespace

void scene_save(const GaussianScene& scene, const std::filesystem::path& path) {
    const bool with_rest = scene.sh_degree() == 1;
    for (const auto& g : scene.gaussians) {
        if (g.sh_degree() != scene.sh_degree()) {
            throw InvalidInput("scene_save: mixed SH degrees in one scene");
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InvalidInput("scene_save: cannot open " + path.string());
    }
    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << scene.size() << "\n";
    for (const auto& name : property_names(with_rest)) {
        out << "property float " << name << "\n";
    }
    out << "end_header\n";

    std::vector<float> row;
    for (const auto& g : scene.gaussians) {
        row.clear();
        put(row, g.position.data(), 3);
        put(row, g.log_scale.data(), 3);
        put(row, g.rotation.data(), 4);
        put(row, &g.opacity_logit, 1);
        put(row, g.color_dc.data(), 3);
        if (with_rest) {
            const auto& rest = *g.color_rest;
            for (int c = 0; c < 3; ++c) {
                for (int k = 0; k < 3; ++k) {
                    row.push_back(static_cast<float>(rest[static_cast<std::size_t>(k)][c]));
                }
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) {
        throw InvalidInput("scene_save: write failed for " + path.string());
    }
}

GaussianScene scene_load(const std::filesystem::path& path) {
    using Kind = DecodeError::Kind;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DecodeError(Kind::Io, "scene_load: cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != "ply") {
        throw DecodeError(Kind::MalformedHeader, "scene_load: missing 'ply' magic");
    }
    if (!std::getline(in, line)) {
        throw DecodeError(Kind::MalformedHeader, "scene_load: missing format line");
    }
    {
        std::istringstream ss(line);
        std::string kw, fmt, version;
        ss >> kw >> fmt >> version;
        if (kw != "format") {
            throw DecodeError(Kind::MalformedHeader, "scene_load: expected format line");
        }
        if (fmt != "binary_little_endian") {
            throw DecodeError(Kind::MalformedHeader, "scene_load: unsupported format '" + fmt + "'");
        }
        if (version != "1.0") {
            throw DecodeError(Kind::UnknownVersion, "scene_load: unknown PLY version '" + version + "'");
        }
    }
    long long count = -1;
    std::vector<std::string> props;
    for (;;) {
        if (!std::getline(in, line)) {
            throw DecodeError(Kind::MalformedHeader, "scene_load: header not terminated");
        }
        if (line == "end_header") {
            break;
        }
        std::istringstream ss(line);
        std::string kw;
        ss >> kw;
        if (kw == "comment" || kw == "obj_info") {
            continue;
        }
        if (kw == "element") {
            std::string name;
            ss >> name >> count;
            if (name != "vertex" || !ss || count < 0 || !props.empty()) {
                throw DecodeError(Kind::MalformedHeader, "scene_load: bad element line '" + line + "'");
            }
        } else if (kw == "property") {
            std::string type, name;
            ss >> type >> name;
            if (count < 0 || type != "float") {
                throw DecodeError(Kind::MalformedHeader, "scene_load: bad property line '" + line + "'");
            }
            props.push_back(name);
        } else {
            throw DecodeError(Kind::MalformedHeader, "scene_load: unexpected header line '" + line + "'");
        }
    }
    if (count < 0) {
        throw DecodeError(Kind::MalformedHeader, "scene_load: no vertex element");
    }
    const bool with_rest = props.size() == static_cast<std::size_t>(kBaseProps + kRestProps);
    if (props != property_names(with_rest)) {
        throw DecodeError(Kind::MalformedHeader, "scene_load: unexpected property layout");
    }

    GaussianScene scene;
    scene.gaussians.reserve(static_cast<std::size_t>(count));
    std::vector<float> row(props.size());
    const auto row_bytes = static_cast<std::streamsize>(row.size() * sizeof(float));
    for (long long i = 0; i < count; ++i) {
        in.read(reinterpret_cast<char*>(row.data()), row_bytes);
        if (in.gcount() != row_bytes) {
            throw DecodeError(Kind::Truncated, "scene_load: payload truncated at record " + std::to_string(i));
        }
        Gaussian3D g;
        g.position = Vec3(row[0], row[1], row[2]);
        g.log_scale = Vec3(row[3], row[4], row[5]);
        g.rotation = Vec4(row[6], row[7], row[8], row[9]);
        g.opacity_logit = row[10];
        g.color_dc = Vec3(row[11], row[12], row[13]);
        if (with_rest) {
            ShBand1 rest;
            for (int c = 0; c < 3; ++c) {
                for (int k = 0; k < 3; ++k) {
                    rest[static_cast<std::size_t>(k)][c] = row[static_cast<std::size_t>(kBaseProps + 3 * c + k)];
                }
            }
            g.color_rest = rest;
        }
        scene.gaussians.push_back(g);
    }
    scene.reset_statistics();
    return scene;
}

} // namespace regs
