#include "regs/cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char** argv) {
    using regs::cli::CommandOptions;
    CLI::App app{"Gaussian splatting scene stylization"};
    app.require_subcommand(1);
    CommandOptions opt;
    opt.log = &std::cerr;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--out", opt.out, "Output directory")->required();
        sub->add_option("--seed", opt.seed, "Random seed");
        sub->add_option("--threads", opt.threads, "Worker threads (default REGS_THREADS or all cores)");
    };
    auto training = [&](CLI::App* sub) {
        sub->add_option("--dataset", opt.dataset, "Dataset root")->required();
        sub->add_option("--config", opt.config, "TOML or JSON config");
        sub->add_option("--iters", opt.iters, "Iterations");
        sub->add_option("--budget", opt.budget, "Gaussian budget");
    };

    auto* pretrain = app.add_subcommand("pretrain", "Fit a content scene to a dataset");
    common(pretrain);
    training(pretrain);

    auto* stylize = app.add_subcommand("stylize", "Stylize a scene with the dataset's reference.png");
    common(stylize);
    training(stylize);
    stylize->add_option("--scene", opt.scene, "Content scene PLY")->required();
    stylize->add_option("--extractor", opt.extractor, "builtin or file:<dir>");

    auto* render = app.add_subcommand("render", "Render a scene at one or more cameras");
    common(render);
    render->add_option("--scene", opt.scene, "Scene PLY")->required();
    render->add_option("--cameras", opt.cameras, "Camera JSON (object or array)")->required();

    auto* render_path = app.add_subcommand("render-path", "Render an interpolated camera path");
    common(render_path);
    render_path->add_option("--scene", opt.scene, "Scene PLY")->required();
    render_path->add_option("--cameras", opt.cameras, "Keyframe camera JSON")->required();
    render_path->add_option("--frames", opt.frames, "Number of frames")->check(CLI::PositiveNumber);

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the rasterizer backward pass");
    common(gradcheck);

    auto* bench = app.add_subcommand("bench", "Run a benchmark scenario");
    common(bench);
    bench->add_option("scenario", opt.scenario, "control|ablation|robustness|throughput")->required();
    bench->add_option("--scene", opt.scene, "Content scene (ablation, robustness)");
    bench->add_option("--iters", opt.iters, "Stylization iterations");
    bench->add_option("--budget", opt.budget, "Added gaussians (control, ablation, robustness)");
    bench->add_option("--style-cells", opt.style_cells, "Style checker cells");

    auto* make_toy = app.add_subcommand("make-toy", "Write the toy checkerboard dataset");
    common(make_toy);
    make_toy->add_option("--style-cells", opt.style_cells, "Style checker cells");

    CLI11_PARSE(app, argc, argv);
    const std::string name = app.get_subcommands().front()->get_name();
    return regs::cli::run_command(name, opt, std::cerr);
}
