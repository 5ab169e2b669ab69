#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "afnio/dataset.hpp"
#include "afnio/model.hpp"

namespace afnio {

struct TrainingConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
    int batch_size = 32;
    int epochs = 3;
    std::string loss = "l1";  // l1 | l2
    int switch_epoch = -1;    // epoch index at which the combined loss takes over; -1 = never
    std::string perceptual = "none";  // none | random
    double val_fraction = 0.1;
    int checkpoint_every = 1;
};

struct DataConfig {
    std::string root;  // dataset directory; empty = use the synthetic block
    int crop = 0;      // random crop side; 0 = none
    bool normalize = false;
    SyntheticSpec synthetic;
};

struct EvalConfig {
    std::vector<int> drops{1};
    std::vector<int> resolutions;
};

/// Fully resolved run configuration. Every field has a default; file values
/// override defaults, CLI flags override file values; unknown keys are
/// rejected. The resolved form is echoed into the run's output directory.
struct RunConfig {
    uint64_t seed = 12345;
    int threads = 1;
    ModelConfig model;
    TrainingConfig training;
    DataConfig data;
    EvalConfig evaluation;
};

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
void echo_run_config(const RunConfig& cfg, const std::filesystem::path& out_dir);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

/// Path of the first leaf where two JSON documents disagree, or nullopt.
std::optional<std::string> first_json_mismatch(const std::string& a, const std::string& b);

}  // namespace afnio
