#include "regs/cli/commands.hpp"

#include "regs/cli/config.hpp"
#include "regs/cli/dataset.hpp"
#include "regs/core/error.hpp"
#include "regs/core/parallel.hpp"
#include "regs/core/scene_io.hpp"
#include "regs/eval/benchmarks.hpp"
#include "regs/eval/gradcheck.hpp"
#include "regs/eval/metrics.hpp"
#include "regs/eval/toy.hpp"
#include "regs/raster/rasterizer.hpp"
#include "regs/stylize/features.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace regs::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) {
        throw InvalidInput("cannot write " + path.string());
    }
    out << text << "\n";
}

fs::path require_out(const CommandOptions& opt) {
    if (opt.out.empty()) {
        throw InvalidInput("--out is required");
    }
    fs::create_directories(opt.out);
    return opt.out;
}

GaussianScene require_scene(const CommandOptions& opt) {
    if (opt.scene.empty()) {
        throw InvalidInput("--scene is required");
    }
    return scene_load(opt.scene);
}

void note(const CommandOptions& opt, const std::string& line) {
    if (opt.log) {
        *opt.log << line << std::endl;
    }
}

// Streams per-iteration metrics to metrics.jsonl and a progress line every
// 100 iterations.
class MetricsSink {
public:
    MetricsSink(const fs::path& path, const CommandOptions& opt) : out_(path), opt_(opt) {
        if (!out_) {
            throw InvalidInput("cannot write " + path.string());
        }
    }
    train::IterCallback callback() {
        return [this](const train::IterMetrics& m, const GaussianScene&) {
            out_ << m.to_json() << "\n";
            if (m.iter % 100 == 0) {
                char buf[128];
                std::snprintf(buf, sizeof(buf), "iter %d loss %.6g gaussians %zu", m.iter, m.loss_total,
                              m.n_gaussians);
                note(opt_, buf);
            }
        };
    }

private:
    std::ofstream out_;
    const CommandOptions& opt_;
};

void write_events(const fs::path& path, const std::vector<control::ControlEvent>& events) {
    std::ofstream out(path);
    for (const auto& e : events) {
        out << e.to_json() << "\n";
    }
}

int diverged(const CommandOptions& opt, const fs::path& out, const train::DivergedError& e) {
    scene_save(e.scene, out / "diverged.ply");
    write_text(out / "diverged.json", json{{"error", e.what()}, {"iter", e.iter}}.dump());
    note(opt, std::string("diverged: ") + e.what() + "; model dumped to " + (out / "diverged.ply").string());
    return kExitDiverged;
}

double mean_psnr(const GaussianScene& scene, const std::vector<Image>& images, const std::vector<Camera>& cams) {
    double sum = 0.0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        sum += eval::psnr(render(scene, cams[i]).color, images[i]);
    }
    return sum / static_cast<double>(images.size());
}

std::vector<Camera> read_camera_list(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidInput("cannot open " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
    if (j.is_array()) {
        return load_cameras_json(path);
    }
    return {load_camera_json(path)};
}

int render_frames(const CommandOptions& opt, const GaussianScene& scene, const std::vector<Camera>& cams) {
    const fs::path out = require_out(opt);
    double render_seconds = 0.0;
    for (std::size_t i = 0; i < cams.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const RenderOutput r = render(scene, cams[i]);
        render_seconds += seconds_since(t0);
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04zu.png", i);
        write_png_rgb(r.color, out / name);
    }
    const double fps = render_seconds > 0.0 ? static_cast<double>(cams.size()) / render_seconds : 0.0;
    const json timing = {{"frames", cams.size()},
                         {"seconds", render_seconds},
                         {"fps", fps},
                         {"n_gaussians", scene.size()}};
    write_text(out / "timing.json", timing.dump(2));
    note(opt, "rendered " + std::to_string(cams.size()) + " frames, " + std::to_string(fps) + " fps");
    return kExitOk;
}

std::string layer_of(const std::string& filename, const std::string& prefix) {
    const std::string suffix = ".fmap";
    if (filename.size() <= prefix.size() + suffix.size() || filename.rfind(prefix, 0) != 0 ||
        filename.compare(filename.size() - suffix.size(), suffix.size(), suffix) != 0) {
        return {};
    }
    return filename.substr(prefix.size(), filename.size() - prefix.size() - suffix.size());
}

train::GuidanceProvider make_guidance(const CommandOptions& opt, const Dataset& data) {
    if (opt.extractor == "builtin") {
        return {};
    }
    const std::string tag = "file:";
    if (opt.extractor.rfind(tag, 0) != 0) {
        throw InvalidInput("unknown extractor '" + opt.extractor + "' (builtin|file:<dir>)");
    }
    fs::path dir = opt.extractor.substr(tag.size());
    if (!fs::is_directory(dir) && fs::is_directory(data.root / dir)) {
        dir = data.root / dir;
    }
    return file_guidance(dir, data.names, data.reference_camera->width, data.reference_camera->height);
}

} // namespace

train::TrainConfig resolve_config(const CommandOptions& opt, train::TrainConfig cfg, std::size_t input_gaussians,
                                  bool budget_is_total) {
    if (!opt.config.empty()) {
        cfg = load_config(opt.config, cfg);
    }
    if (opt.seed) {
        cfg.seed = *opt.seed;
    }
    if (opt.iters) {
        cfg.total_iters = *opt.iters;
    }
    if (opt.budget) {
        cfg.control.max_gaussians = budget_is_total ? *opt.budget : input_gaussians + *opt.budget;
    }
    cfg.validate();
    return cfg;
}

train::GuidanceProvider file_guidance(const fs::path& dir, const std::vector<std::string>& names, int ref_width,
                                      int ref_height) {
    if (!fs::is_directory(dir)) {
        throw InvalidInput("feature directory not found: " + dir.string());
    }
    const std::string ref_prefix = "reference_content.";
    std::map<std::string, stylize::FeatureMap> ref_layers;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string layer = layer_of(entry.path().filename().string(), ref_prefix);
        if (!layer.empty()) {
            ref_layers[layer] = stylize::read_fmap(entry.path());
        }
    }
    if (ref_layers.empty()) {
        throw InvalidInput("no reference_content.<layer>.fmap in " + dir.string());
    }
    for (const auto& name : names) {
        for (const auto& [layer, map] : ref_layers) {
            if (!fs::exists(dir / (name + "." + layer + ".fmap"))) {
                throw InvalidInput("missing feature file " + (dir / (name + "." + layer + ".fmap")).string());
            }
        }
    }
    return [dir, names, ref_layers, ref_width, ref_height](std::size_t view, const Image& content_view,
                                                          const Image&) {
        if (view >= names.size()) {
            throw InvalidInput("file guidance: view index out of range");
        }
        std::vector<stylize::GuidanceIndexMap> out;
        for (const auto& [layer, ref] : ref_layers) {
            const auto f = stylize::read_fmap(dir / (names[view] + "." + layer + ".fmap"));
            if (f.channels != ref.channels) {
                throw InvalidInput("file guidance: channel count differs between " + names[view] +
                                   " and the reference for layer " + layer);
            }
            out.push_back(stylize::resample_guidance(
                stylize::match_nearest(f, ref), stylize::feature_cells(content_view.width),
                stylize::feature_cells(content_view.height), stylize::feature_cells(ref_width),
                stylize::feature_cells(ref_height)));
        }
        return out;
    };
}

int cmd_pretrain(const CommandOptions& opt) {
    if (opt.dataset.empty()) {
        throw InvalidInput("--dataset is required");
    }
    const Dataset data = load_dataset(opt.dataset);
    const auto cfg = resolve_config(opt, train::TrainConfig::pretrain_defaults(), 0, true);
    const fs::path out = require_out(opt);
    write_text(out / "config.json", config_to_json(cfg));
    note(opt, "config " + config_to_json(cfg));

    const auto t0 = std::chrono::steady_clock::now();
    train::TrainResult res;
    {
        MetricsSink sink(out / "metrics.jsonl", opt);
        try {
            res = train::pretrain(data.images, data.cameras, cfg, std::nullopt, sink.callback());
        } catch (const train::DivergedError& e) {
            return diverged(opt, out, e);
        }
    }
    const double seconds = seconds_since(t0);
    scene_save(res.scene, out / "scene.ply");
    write_events(out / "events.jsonl", res.events);

    json summary = {{"n_gaussians", res.scene.size()},
                    {"seconds", seconds},
                    {"extent", res.extent},
                    {"train_psnr", mean_psnr(res.scene, data.images, data.cameras)}};
    if (fs::is_directory(opt.dataset / "heldout")) {
        const Dataset held = load_dataset(opt.dataset / "heldout");
        summary["heldout_psnr"] = mean_psnr(res.scene, held.images, held.cameras);
    }
    write_text(out / "summary.json", summary.dump(2));
    note(opt, "summary " + summary.dump());
    return kExitOk;
}

int cmd_stylize(const CommandOptions& opt) {
    if (opt.dataset.empty()) {
        throw InvalidInput("--dataset is required");
    }
    const Dataset data = load_dataset(opt.dataset);
    if (!data.reference) {
        throw InvalidInput("dataset: missing reference.png");
    }
    const GaussianScene content = require_scene(opt);
    const auto cfg = resolve_config(opt, train::TrainConfig::stylize_defaults(), content.size(), false);
    const auto guidance = make_guidance(opt, data);
    const fs::path out = require_out(opt);
    write_text(out / "config.json", config_to_json(cfg));
    note(opt, "config " + config_to_json(cfg) + " extractor " + opt.extractor);

    const auto t0 = std::chrono::steady_clock::now();
    train::TrainResult res;
    {
        MetricsSink sink(out / "metrics.jsonl", opt);
        try {
            res = train::stylize_scene(content, *data.reference, *data.reference_camera, data.cameras, cfg, guidance,
                                       sink.callback());
        } catch (const train::DivergedError& e) {
            return diverged(opt, out, e);
        }
    }
    const double seconds = seconds_since(t0);
    scene_save(res.scene, out / "scene.ply");
    write_events(out / "events.jsonl", res.events);

    const Image ref_render = render(res.scene, *data.reference_camera).color;
    const json summary = {{"n_gaussians", res.scene.size()},
                          {"seconds", seconds},
                          {"ref_l1", eval::l1(ref_render, *data.reference)},
                          {"ref_psnr", eval::psnr(ref_render, *data.reference)},
                          {"depth_drift", eval::depth_drift(content, res.scene, data.cameras)},
                          {"consistency", eval::consistency_score(res.scene, eval::neighbour_pairs(data.cameras))}};
    write_text(out / "summary.json", summary.dump(2));
    note(opt, "summary " + summary.dump());
    return kExitOk;
}

int cmd_render(const CommandOptions& opt) {
    const GaussianScene scene = require_scene(opt);
    if (opt.cameras.empty()) {
        throw InvalidInput("--cameras is required");
    }
    return render_frames(opt, scene, read_camera_list(opt.cameras));
}

int cmd_render_path(const CommandOptions& opt) {
    const GaussianScene scene = require_scene(opt);
    if (opt.cameras.empty()) {
        throw InvalidInput("--cameras is required");
    }
    return render_frames(opt, scene, camera_path(read_camera_list(opt.cameras), opt.frames));
}

int cmd_gradcheck(const CommandOptions& opt) {
    constexpr int kScenes = 10;
    constexpr double kTol = 1e-3;
    const fs::path out = require_out(opt);
    const Camera cam = eval::gradcheck_camera();
    const std::uint64_t base = opt.seed.value_or(0);
    const auto t0 = std::chrono::steady_clock::now();
    json scenes = json::array();
    bool pass = true;
    double worst = 0.0;
    for (int k = 0; k < kScenes; ++k) {
        const int n = 5 + (k * 7) % 16;
        const auto scene = eval::random_gradcheck_scene(base + static_cast<std::uint64_t>(k), cam, n);
        const auto rep = eval::gradcheck(scene, cam, kTol);
        pass = pass && rep.pass;
        worst = std::max(worst, rep.max_rel_error);
        scenes.push_back({{"seed", base + static_cast<std::uint64_t>(k)},
                          {"gaussians", n},
                          {"checked", rep.checked},
                          {"max_rel_error", rep.max_rel_error},
                          {"worst", rep.worst},
                          {"pass", rep.pass}});
    }
    const json report = {{"scenario", "gradcheck"}, {"tol", kTol},   {"max_rel_error", worst},
                         {"pass", pass},            {"scenes", scenes}, {"seconds", seconds_since(t0)}};
    write_text(out / "report.json", report.dump(2));
    note(opt, std::string("gradcheck ") + (pass ? "pass" : "FAIL") + " max_rel_error " + std::to_string(worst));
    return pass ? kExitOk : kExitCheckFailed;
}

int cmd_bench(const CommandOptions& opt) {
    const std::string& s = opt.scenario;
    if (s != "control" && s != "ablation" && s != "robustness" && s != "throughput") {
        throw InvalidInput("unknown scenario '" + s + "' (control|ablation|robustness|throughput)");
    }
    const fs::path out = require_out(opt);
    const std::uint64_t seed = opt.seed.value_or(0);
    auto content = [&]() {
        if (!opt.scene.empty()) {
            return scene_load(opt.scene);
        }
        note(opt, "pretraining toy content");
        return eval::toy_content_scene(eval::ToyOptions{}, seed);
    };
    eval::BenchmarkReport rep;
    if (s == "control") {
        eval::ControlBenchOptions o;
        o.seed = seed;
        o.style_cells = opt.style_cells;
        if (opt.iters) {
            o.iters = *opt.iters;
        }
        if (opt.budget) {
            o.budget = *opt.budget;
        }
        rep = eval::control_benchmark(o);
    } else if (s == "ablation") {
        eval::AblationOptions o;
        o.seed = seed;
        o.style_cells = opt.style_cells;
        if (opt.iters) {
            o.iters = *opt.iters;
        }
        if (opt.budget) {
            o.budget = *opt.budget;
        }
        rep = eval::ablation_benchmark(content(), o);
    } else if (s == "robustness") {
        eval::RobustnessOptions o;
        o.seeds = {seed, seed + 1};
        o.style_cells = opt.style_cells;
        if (opt.iters) {
            o.iters = *opt.iters;
        }
        if (opt.budget) {
            o.budget = *opt.budget;
        }
        rep = eval::robustness_benchmark(content(), o);
    } else {
        eval::ThroughputBenchOptions o;
        o.seed = seed;
        rep = eval::throughput_benchmark(o);
    }
    write_text(out / "report.json", rep.to_json());
    note(opt, rep.to_json());
    return kExitOk;
}

int cmd_make_toy(const CommandOptions& opt) {
    const fs::path out = require_out(opt);
    const eval::ToyOptions toy;
    const eval::ToyDataset data = eval::make_toy_dataset(eval::toy_content_texture(), toy);
    Dataset train;
    train.images = data.train_images;
    train.cameras = data.train_cameras;
    train.reference_camera = eval::toy_reference_camera(toy);
    train.reference = eval::render_quad(eval::toy_style_texture(opt.style_cells), *train.reference_camera);
    save_dataset(train, out);
    Dataset held;
    held.images = data.test_images;
    held.cameras = data.test_cameras;
    save_dataset(held, out / "heldout");
    note(opt, "toy dataset written to " + out.string());
    return kExitOk;
}

int run_command(const std::string& name, const CommandOptions& opt, std::ostream& err) {
    try {
        if (opt.threads) {
            if (*opt.threads < 1) {
                throw InvalidInput("--threads must be >= 1");
            }
            set_num_threads(*opt.threads);
        }
        if (name == "pretrain") {
            return cmd_pretrain(opt);
        }
        if (name == "stylize") {
            return cmd_stylize(opt);
        }
        if (name == "render") {
            return cmd_render(opt);
        }
        if (name == "render-path") {
            return cmd_render_path(opt);
        }
        if (name == "gradcheck") {
            return cmd_gradcheck(opt);
        }
        if (name == "bench") {
            return cmd_bench(opt);
        }
        if (name == "make-toy") {
            return cmd_make_toy(opt);
        }
        throw InvalidInput("unknown command '" + name + "'");
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalid;
    }
}

} // namespace regs::cli
