#pragma once

#include "afnio/dataset.hpp"
#include "afnio/model.hpp"

namespace afnio {

struct DropScore {
    int drop = 1;
    double mean_psnr = 0;
    double mean_ssim = 0;
    int frames_scored = 0;
    int sequences_skipped = 0;
};

/// Reconstruction quality with k consecutive frames dropped. Retained
/// anchor frames sit one power-of-two gap apart (2 for drop 1, 4 for
/// drop 2, 8 for drop 4); interior frames are filled by recursive midpoint
/// interpolation, and the k frames after each left anchor are scored
/// against ground truth. Sequences too short for one window are skipped.
DropScore eval_drop(const AdaFNIO<float>& model, const std::vector<std::vector<Tensor<float>>>& sequences, int drop,
                    int threads = 1);

struct ResolutionRow {
    int resolution = 0;
    bool admissible = true;
    double mean_psnr = 0;
    double mean_ssim = 0;
    int count = 0;
};

/// The same weights evaluated on the same underlying band-limited motions
/// sampled at several grid sizes. Inadmissible resolutions are marked and
/// the run continues.
std::vector<ResolutionRow> eval_resolutions(const AdaFNIO<float>& model, const SyntheticSpec& spec,
                                            const std::vector<int>& resolutions, int count, int threads = 1);

bool model_admits(const AdaFNIO<float>& model, int H, int W, std::string* why = nullptr);

}  // namespace afnio
