#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "afnio/fft.hpp"
#include "afnio/rng.hpp"
#include "afnio/tensor.hpp"

namespace afnio {

/// Three consecutive frames; the middle one is the interpolation target.
struct Triplet {
    Tensor<float> first, middle, last;
    std::string id;
};

struct LoadReport {
    std::vector<Triplet> triplets;
    int skipped = 0;
    std::vector<std::string> notes;
};

/// Reads <root>/<sequence_id>/im{1,2,3}.{png,ppm,pgm,pnm} in lexicographic
/// order. Malformed sequences are skipped and counted.
LoadReport load_triplets(const std::filesystem::path& root);

/// Reads one sequence directory im1..imN (N >= 3).
std::vector<Tensor<float>> load_sequence(const std::filesystem::path& dir);

/// Lists sequence directories of a dataset root in lexicographic order.
std::vector<std::filesystem::path> list_sequences(const std::filesystem::path& root);

enum class Motion { translate, rotate_phase };

/// Parameters of the synthetic band-limited generator. Every sequence is a
/// sum of at most 8 sinusoids below the band limit; motion is either a
/// constant-velocity translation (realized as a Fourier phase shift, exact
/// for band-limited periodic signals) or a per-mode phase rotation. The
/// middle frame of any triplet is the exact half-way frame.
struct SyntheticSpec {
    uint64_t seed = 0;
    int count = 0;
    int resolution = 64;
    Motion motion = Motion::translate;
    double max_displacement = 1.5;  // pixels per frame step, per axis
    double band_limit = 0.25;       // highest frequency as a fraction of Nyquist
    int sequence_length = 3;
    int channels = 1;

    void validate() const;
    std::string to_json() const;
    static SyntheticSpec from_json(const std::string& text);
    bool operator==(const SyntheticSpec&) const = default;
};

/// One sequence's analytic parameters; samples at any grid size.
struct SynthItem {
    struct Mode {
        int fy = 0, fx = 0;
        double amp = 0, phase = 0, phase_rate = 0;
    };
    std::vector<Mode> modes;
    double dy = 0, dx = 0;  // displacement per frame step at base resolution
    double offset = 0.5, scale = 0;
    Motion motion = Motion::translate;
    int base_resolution = 0;
    int channels = 1;
};

SynthItem make_synth_item(const SyntheticSpec& spec, int index);

/// Sample an item's frame t (possibly fractional) on a resolution x
/// resolution grid. The displacement scales with resolution so the
/// underlying continuous motion is resolution-independent.
Tensor<double> synth_frame_f64(const SynthItem& item, double t, int resolution);
Tensor<float> synth_frame(const SynthItem& item, double t, int resolution);

std::vector<Triplet> gen_synthetic(const SyntheticSpec& spec);
std::vector<std::vector<Tensor<float>>> gen_sequences(const SyntheticSpec& spec);

/// Write the dataset as <out>/<seq>/imK.png plus a manifest.json carrying
/// the spec, so materialized data reloads interchangeably.
void materialize_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out);

/// (x - min) / (max - min) into [0,1]; constant input maps to zeros.
template <typename T>
Tensor<T> minmax_normalize(const Tensor<T>& x) {
    T lo = x.value()[0], hi = x.value()[0];
    for (T v : x.value()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Tensor<T> out(x.shape());
    if (hi == lo) return out;  // declared convention for constant input
    T inv = T(1) / (hi - lo);
    for (int64_t i = 0; i < x.numel(); ++i) out.data()[i] = (x.data()[i] - lo) * inv;
    return out;
}

/// Joint min-max normalization of a triplet (one affine map for all three
/// frames, so the exact-midpoint property is preserved).
Triplet minmax_normalize(const Triplet& t);

/// The same crop window applied to all three frames.
Triplet random_crop(const Triplet& t, int side, Rng& rng);

}  // namespace afnio
