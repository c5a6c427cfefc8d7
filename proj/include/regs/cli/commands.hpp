#pragma once

#include "regs/train/train.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace regs::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitDiverged = 3;

struct CommandOptions {
    std::filesystem::path dataset;
    std::filesystem::path scene;
    std::filesystem::path config;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    std::optional<int> iters;
    std::string extractor = "builtin"; // builtin | file:<dir>
    std::optional<std::size_t> budget;
    std::optional<int> threads;
    // render / render-path
    std::filesystem::path cameras;
    int frames = 60;
    // bench / make-toy
    std::string scenario;
    int style_cells = 4;
    std::ostream* log = nullptr; // progress lines; silent when null
};

// Defaults, then the config file, then flags. --budget is the total cap for
// pretraining and the number of gaussians added on top of the input scene
// for stylization.
train::TrainConfig resolve_config(const CommandOptions& opt, train::TrainConfig defaults,
                                  std::size_t input_gaussians = 0, bool budget_is_total = false);

// Guidance from FMAP files: features/<name>.<layer>.fmap for every image and
// features/reference_content.<layer>.fmap for the content render at the
// reference pose, one guidance map per layer.
train::GuidanceProvider file_guidance(const std::filesystem::path& dir, const std::vector<std::string>& names,
                                      int ref_width, int ref_height);

// Each writes into opt.out (created if needed) and returns an exit code.
// Input errors propagate as exceptions; run_command maps them to codes.
int cmd_pretrain(const CommandOptions& opt);   // scene.ply, metrics.jsonl, events.jsonl, config.json, summary.json
int cmd_stylize(const CommandOptions& opt);    // same files
int cmd_render(const CommandOptions& opt);     // frame_NNNN.png, timing.json
int cmd_render_path(const CommandOptions& opt);
int cmd_gradcheck(const CommandOptions& opt);  // report.json; 1 when the check fails
int cmd_bench(const CommandOptions& opt);      // report.json
int cmd_make_toy(const CommandOptions& opt);   // dataset layout plus heldout/

// Dispatch by command name with exception-to-exit-code mapping; errors are
// written to `err`.
int run_command(const std::string& name, const CommandOptions& opt, std::ostream& err);

} // namespace regs::cli
