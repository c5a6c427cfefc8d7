#include "regs/cli/config.hpp"

#include "regs/core/error.hpp"

#include <nlohmann/json.hpp>
#include <tomlplusplus/toml.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace regs::cli {

using nlohmann::json;

namespace {

json toml_to_json(const toml::node& node) {
    if (const auto* t = node.as_table()) {
        json out = json::object();
        for (const auto& [key, value] : *t) {
            out[std::string(key.str())] = toml_to_json(value);
        }
        return out;
    }
    if (const auto* a = node.as_array()) {
        json out = json::array();
        for (const auto& value : *a) {
            out.push_back(toml_to_json(value));
        }
        return out;
    }
    if (const auto* v = node.as_integer()) {
        return v->get();
    }
    if (const auto* v = node.as_floating_point()) {
        return v->get();
    }
    if (const auto* v = node.as_boolean()) {
        return v->get();
    }
    if (const auto* v = node.as_string()) {
        return v->get();
    }
    throw InvalidInput("config: unsupported TOML value type");
}

void check_keys(const json& section, const std::string& name, const std::set<std::string>& allowed) {
    if (!section.is_object()) {
        throw InvalidInput("config: [" + name + "] must be a table");
    }
    for (const auto& [key, value] : section.items()) {
        if (!allowed.count(key)) {
            throw InvalidInput("config: unknown key " + name + "." + key);
        }
    }
}

template <typename T>
void read(const json& section, const char* key, T& out) {
    if (section.contains(key)) {
        out = section.at(key).get<T>();
    }
}

} // namespace

std::string selection_name(control::Selection s) {
    switch (s) {
    case control::Selection::TextureGuided:
        return "texture_guided";
    case control::Selection::Positional:
        return "positional";
    case control::Selection::None:
        return "none";
    }
    return "none";
}

control::Selection parse_selection(const std::string& name) {
    if (name == "texture_guided") {
        return control::Selection::TextureGuided;
    }
    if (name == "positional") {
        return control::Selection::Positional;
    }
    if (name == "none") {
        return control::Selection::None;
    }
    throw InvalidInput("unknown selection '" + name + "' (texture_guided|positional|none)");
}

train::TrainConfig config_from_json(const std::string& json_text, train::TrainConfig cfg) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("config: ") + e.what());
    }
    check_keys(root, "root", {"train", "lr", "weights", "control"});
    try {
        if (root.contains("train")) {
            const auto& t = root["train"];
            check_keys(t, "train",
                       {"iters", "seed", "selection", "pseudo_view", "init_gaussians", "dense_fraction"});
            read(t, "iters", cfg.total_iters);
            read(t, "seed", cfg.seed);
            read(t, "pseudo_view", cfg.pseudo_view);
            read(t, "init_gaussians", cfg.init_gaussians);
            read(t, "dense_fraction", cfg.dense_fraction);
            if (t.contains("selection")) {
                cfg.selection = parse_selection(t["selection"].get<std::string>());
            }
        }
        if (root.contains("lr")) {
            const auto& l = root["lr"];
            check_keys(l, "lr", {"position", "rotation", "log_scale", "opacity", "color"});
            read(l, "position", cfg.lr.position);
            read(l, "rotation", cfg.lr.rotation);
            read(l, "log_scale", cfg.lr.log_scale);
            read(l, "opacity", cfg.lr.opacity);
            read(l, "color", cfg.lr.color);
        }
        if (root.contains("weights")) {
            const auto& w = root["weights"];
            check_keys(w, "weights", {"rec", "depth", "view", "tcm", "color"});
            read(w, "rec", cfg.weights.rec);
            read(w, "depth", cfg.weights.depth);
            read(w, "view", cfg.weights.view);
            read(w, "tcm", cfg.weights.tcm);
            read(w, "color", cfg.weights.color);
        }
        if (root.contains("control")) {
            const auto& c = root["control"];
            check_keys(c, "control",
                       {"warmup_iters", "interval_iters", "stop_fraction", "threshold_start", "threshold_end",
                        "pos_threshold", "prune_opacity", "max_gaussians"});
            read(c, "warmup_iters", cfg.control.warmup_iters);
            read(c, "interval_iters", cfg.control.interval_iters);
            read(c, "stop_fraction", cfg.control.stop_fraction);
            read(c, "threshold_start", cfg.control.threshold_start);
            read(c, "threshold_end", cfg.control.threshold_end);
            read(c, "pos_threshold", cfg.control.pos_threshold);
            read(c, "prune_opacity", cfg.control.prune_opacity);
            if (c.contains("max_gaussians")) {
                if (c["max_gaussians"].is_null()) {
                    cfg.control.max_gaussians.reset();
                } else {
                    const auto m = c["max_gaussians"].get<long long>();
                    if (m < 0) {
                        throw InvalidInput("config: control.max_gaussians must be >= 0");
                    }
                    cfg.control.max_gaussians = static_cast<std::size_t>(m);
                }
            }
        }
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

train::TrainConfig load_config(const std::filesystem::path& path, train::TrainConfig base) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidInput("cannot open config " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    if (path.extension() == ".json") {
        return config_from_json(ss.str(), std::move(base));
    }
    try {
        const toml::table table = toml::parse(ss.str(), path.string());
        return config_from_json(toml_to_json(table).dump(), std::move(base));
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config: " << e.description() << " at " << e.source().begin;
        throw InvalidInput(msg.str());
    }
}

std::string config_to_json(const train::TrainConfig& cfg) {
    json max = cfg.control.max_gaussians ? json(*cfg.control.max_gaussians) : json(nullptr);
    json j = {
        {"train",
         {{"iters", cfg.total_iters},
          {"seed", cfg.seed},
          {"selection", selection_name(cfg.selection)},
          {"pseudo_view", cfg.pseudo_view},
          {"init_gaussians", cfg.init_gaussians},
          {"dense_fraction", cfg.dense_fraction}}},
        {"lr",
         {{"position", cfg.lr.position},
          {"rotation", cfg.lr.rotation},
          {"log_scale", cfg.lr.log_scale},
          {"opacity", cfg.lr.opacity},
          {"color", cfg.lr.color}}},
        {"weights",
         {{"rec", cfg.weights.rec},
          {"depth", cfg.weights.depth},
          {"view", cfg.weights.view},
          {"tcm", cfg.weights.tcm},
          {"color", cfg.weights.color}}},
        {"control",
         {{"warmup_iters", cfg.control.warmup_iters},
          {"interval_iters", cfg.control.interval_iters},
          {"stop_fraction", cfg.control.stop_fraction},
          {"threshold_start", cfg.control.threshold_start},
          {"threshold_end", cfg.control.threshold_end},
          {"pos_threshold", cfg.control.pos_threshold},
          {"prune_opacity", cfg.control.prune_opacity},
          {"max_gaussians", max}}},
    };
    return j.dump();
}

} // namespace regs::cli
