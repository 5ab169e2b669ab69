#include "afnio/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

namespace afnio {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::invalid_argument("unknown config key: " + (where.empty() ? it.key() : where + "." + it.key()));
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

json nio_to_json(const NioConfig& c) {
    json j;
    j["base_resolution"] = c.base_resolution;
    j["token_kernel"] = c.token_kernel;
    j["token_stride"] = c.token_stride;
    j["lifting_channels"] = c.lifting_channels;
    j["level_channels"] = c.level_channels;
    j["level_modes"] = c.level_modes;
    j["small"] = c.small;
    return j;
}

void nio_from_json(const json& j, NioConfig& c, const std::string& where) {
    reject_unknown(j, {"base_resolution", "token_kernel", "token_stride", "lifting_channels", "level_channels",
                       "level_modes", "small"},
                   where);
    read(j, "base_resolution", c.base_resolution);
    read(j, "token_kernel", c.token_kernel);
    read(j, "token_stride", c.token_stride);
    read(j, "lifting_channels", c.lifting_channels);
    read(j, "level_channels", c.level_channels);
    read(j, "level_modes", c.level_modes);
    read(j, "small", c.small);
}

json adacof_to_json(const AdaCoFConfig& c) {
    json j;
    j["kernel_size"] = c.kernel_size;
    j["dilation"] = c.dilation;
    j["unet_widths"] = c.unet_widths;
    j["feature_channels"] = c.feature_channels;
    return j;
}

void adacof_from_json(const json& j, AdaCoFConfig& c, const std::string& where) {
    reject_unknown(j, {"kernel_size", "dilation", "unet_widths", "feature_channels"}, where);
    read(j, "kernel_size", c.kernel_size);
    read(j, "dilation", c.dilation);
    read(j, "unet_widths", c.unet_widths);
    read(j, "feature_channels", c.feature_channels);
}

json model_to_json(const ModelConfig& c) {
    json j;
    j["channels"] = c.channels;
    j["pathway"] = pathway_name(c.pathway);
    j["nio"] = nio_to_json(c.nio);
    j["adacof"] = adacof_to_json(c.adacof);
    j["blend"] = {{"w1", c.blend.w1}, {"w2", c.blend.w2}, {"trainable", c.blend.trainable}};
    return j;
}

void model_from_json(const json& j, ModelConfig& c, const std::string& where) {
    reject_unknown(j, {"channels", "pathway", "nio", "adacof", "blend"}, where);
    read(j, "channels", c.channels);
    if (j.contains("pathway")) c.pathway = pathway_from_name(j.at("pathway").get<std::string>());
    if (j.contains("nio")) nio_from_json(j.at("nio"), c.nio, where + ".nio");
    if (j.contains("adacof")) adacof_from_json(j.at("adacof"), c.adacof, where + ".adacof");
    if (j.contains("blend")) {
        const json& b = j.at("blend");
        reject_unknown(b, {"w1", "w2", "trainable"}, where + ".blend");
        read(b, "w1", c.blend.w1);
        read(b, "w2", c.blend.w2);
        read(b, "trainable", c.blend.trainable);
    }
    c.nio.channels = c.channels;
    c.adacof.channels = c.channels;
}

json synthetic_to_json(const SyntheticSpec& s) { return json::parse(s.to_json()); }

void synthetic_from_json(const json& j, SyntheticSpec& s, const std::string& where) {
    reject_unknown(j, {"seed", "count", "resolution", "motion", "max_displacement", "band_limit", "sequence_length",
                       "channels"},
                   where);
    json full = synthetic_to_json(s);
    for (auto it = j.begin(); it != j.end(); ++it) full[it.key()] = it.value();
    s = SyntheticSpec::from_json(full.dump());
}

}  // namespace

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["model"] = model_to_json(cfg.model);
    j["training"] = {{"lr", cfg.training.lr},
                     {"beta1", cfg.training.beta1},
                     {"beta2", cfg.training.beta2},
                     {"eps", cfg.training.eps},
                     {"weight_decay", cfg.training.weight_decay},
                     {"batch_size", cfg.training.batch_size},
                     {"epochs", cfg.training.epochs},
                     {"loss", cfg.training.loss},
                     {"switch_epoch", cfg.training.switch_epoch},
                     {"perceptual", cfg.training.perceptual},
                     {"val_fraction", cfg.training.val_fraction},
                     {"checkpoint_every", cfg.training.checkpoint_every}};
    j["data"] = {{"root", cfg.data.root},
                 {"crop", cfg.data.crop},
                 {"normalize", cfg.data.normalize},
                 {"synthetic", synthetic_to_json(cfg.data.synthetic)}};
    j["evaluation"] = {{"drops", cfg.evaluation.drops}, {"resolutions", cfg.evaluation.resolutions}};
    return j.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
    json j = json::parse(text);
    RunConfig cfg;
    reject_unknown(j, {"seed", "threads", "model", "training", "data", "evaluation"}, "");
    read(j, "seed", cfg.seed);
    read(j, "threads", cfg.threads);
    if (j.contains("model")) model_from_json(j.at("model"), cfg.model, "model");
    if (j.contains("training")) {
        const json& t = j.at("training");
        reject_unknown(t, {"lr", "beta1", "beta2", "eps", "weight_decay", "batch_size", "epochs", "loss",
                           "switch_epoch", "perceptual", "val_fraction", "checkpoint_every"},
                       "training");
        read(t, "lr", cfg.training.lr);
        read(t, "beta1", cfg.training.beta1);
        read(t, "beta2", cfg.training.beta2);
        read(t, "eps", cfg.training.eps);
        read(t, "weight_decay", cfg.training.weight_decay);
        read(t, "batch_size", cfg.training.batch_size);
        read(t, "epochs", cfg.training.epochs);
        read(t, "loss", cfg.training.loss);
        read(t, "switch_epoch", cfg.training.switch_epoch);
        read(t, "perceptual", cfg.training.perceptual);
        read(t, "val_fraction", cfg.training.val_fraction);
        read(t, "checkpoint_every", cfg.training.checkpoint_every);
        if (cfg.training.loss != "l1" && cfg.training.loss != "l2")
            throw std::invalid_argument("training.loss must be l1 or l2, got '" + cfg.training.loss + "'");
        if (cfg.training.perceptual != "none" && cfg.training.perceptual != "random")
            throw std::invalid_argument("training.perceptual must be none or random");
    }
    if (j.contains("data")) {
        const json& d = j.at("data");
        reject_unknown(d, {"root", "crop", "normalize", "synthetic"}, "data");
        read(d, "root", cfg.data.root);
        read(d, "crop", cfg.data.crop);
        read(d, "normalize", cfg.data.normalize);
        if (d.contains("synthetic")) synthetic_from_json(d.at("synthetic"), cfg.data.synthetic, "data.synthetic");
    }
    if (j.contains("evaluation")) {
        const json& e = j.at("evaluation");
        reject_unknown(e, {"drops", "resolutions"}, "evaluation");
        read(e, "drops", cfg.evaluation.drops);
        read(e, "resolutions", cfg.evaluation.resolutions);
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path.string());
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return run_config_from_json(text);
}

void echo_run_config(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::ofstream os(out_dir / "config.json");
    if (!os) throw std::runtime_error("cannot echo config under " + out_dir.string());
    os << run_config_to_json(cfg);
}

std::string model_config_to_json(const ModelConfig& cfg) { return model_to_json(cfg).dump(2) + "\n"; }

ModelConfig model_config_from_json(const std::string& text) {
    ModelConfig cfg;
    model_from_json(json::parse(text), cfg, "model");
    return cfg;
}

namespace {

void collect_mismatch(const json& a, const json& b, const std::string& path, std::optional<std::string>& out) {
    if (out) return;
    if (a.type() != b.type()) {
        out = path.empty() ? "(root)" : path;
        return;
    }
    if (a.is_object()) {
        std::set<std::string> keys;
        for (auto it = a.begin(); it != a.end(); ++it) keys.insert(it.key());
        for (auto it = b.begin(); it != b.end(); ++it) keys.insert(it.key());
        for (const auto& k : keys) {
            std::string sub = path.empty() ? k : path + "." + k;
            if (!a.contains(k) || !b.contains(k)) {
                out = sub;
                return;
            }
            collect_mismatch(a.at(k), b.at(k), sub, out);
            if (out) return;
        }
        return;
    }
    if (a.is_array()) {
        if (a.size() != b.size()) {
            out = path;
            return;
        }
        for (size_t i = 0; i < a.size(); ++i) {
            collect_mismatch(a.at(i), b.at(i), path + "[" + std::to_string(i) + "]", out);
            if (out) return;
        }
        return;
    }
    if (a != b) out = path.empty() ? "(root)" : path;
}

}  // namespace

std::optional<std::string> first_json_mismatch(const std::string& a, const std::string& b) {
    std::optional<std::string> out;
    collect_mismatch(json::parse(a), json::parse(b), "", out);
    return out;
}

}  // namespace afnio
