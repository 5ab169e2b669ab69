#pragma once

#include <optional>

#include "afnio/checkpoint.hpp"
#include "afnio/config.hpp"
#include "afnio/dataset.hpp"
#include "afnio/loss.hpp"
#include "afnio/metrics.hpp"
#include "afnio/model.hpp"
#include "afnio/optim.hpp"

namespace afnio {

struct EpochRecord {
    int epoch = 0;  // 1-based, the epoch just finished
    std::string loss_kind;
    double train_loss = 0;
    std::optional<double> val_psnr;
    std::optional<double> val_ssim;
};

struct TrainResult {
    std::vector<EpochRecord> log;
    double best_psnr = 0;
    double best_ssim = 0;
};

struct TrainOptions {
    TrainingConfig training;
    DataConfig data;  // crop/normalize applied inside the loop
    uint64_t seed = 12345;
    std::filesystem::path out_dir;  // empty = keep everything in memory
};

class TrainError : public std::runtime_error {
public:
    TrainError(const std::string& msg, int batch_index) : std::runtime_error(msg), batch_index_(batch_index) {}
    int batch_index() const { return batch_index_; }

private:
    int batch_index_ = -1;
};

/// Snapshot of model parameters, optimizer moments, epoch counter and RNG
/// state; save -> load -> save is byte-identical.
CheckpointData make_checkpoint(const AdaFNIO<float>& model, const Adam<float>* opt, uint64_t epoch,
                               const std::string& rng_state);

/// Restores parameters (and optimizer state when given) from a checkpoint.
/// A checkpoint whose embedded config disagrees with the model's is
/// rejected naming the first mismatched field.
void restore_checkpoint(const CheckpointData& ckpt, AdaFNIO<float>& model, Adam<float>* opt = nullptr,
                        uint64_t* epoch = nullptr, std::string* rng_state = nullptr);

/// Builds a model from the config embedded in a checkpoint and loads its
/// parameters, frozen for inference.
std::unique_ptr<AdaFNIO<float>> load_model_for_inference(const CheckpointData& ckpt);

/// Deterministic single-threaded training loop with per-epoch validation
/// and checkpointing. Resuming from a checkpoint reproduces the exact
/// metric log of an uninterrupted run with the same seed.
TrainResult train(AdaFNIO<float>& model, const std::vector<Triplet>& dataset, const TrainOptions& opts,
                  const CheckpointData* resume = nullptr);

}  // namespace afnio
