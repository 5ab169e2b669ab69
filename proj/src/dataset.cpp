#include "afnio/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

#include "afnio/image.hpp"

namespace afnio {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

const char* motion_name(Motion m) { return m == Motion::translate ? "translate" : "rotate-phase"; }

Motion motion_from_name(const std::string& s) {
    if (s == "translate") return Motion::translate;
    if (s == "rotate-phase") return Motion::rotate_phase;
    throw std::invalid_argument("unknown motion family '" + s + "'");
}

std::vector<std::filesystem::path> frame_candidates(const std::filesystem::path& dir, int index) {
    std::vector<std::filesystem::path> out;
    for (const char* ext : {".png", ".ppm", ".pgm", ".pnm"})
        out.push_back(dir / ("im" + std::to_string(index) + ext));
    return out;
}

bool load_frame(const std::filesystem::path& dir, int index, Tensor<float>& out) {
    for (const auto& p : frame_candidates(dir, index)) {
        if (std::filesystem::exists(p)) {
            out = read_image(p);
            return true;
        }
    }
    return false;
}

}  // namespace

std::vector<std::filesystem::path> list_sequences(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root))
        throw std::runtime_error("dataset root does not exist: " + root.string());
    std::vector<std::filesystem::path> dirs;
    for (const auto& e : std::filesystem::directory_iterator(root))
        if (e.is_directory()) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

LoadReport load_triplets(const std::filesystem::path& root) {
    LoadReport rep;
    auto dirs = list_sequences(root);
    if (dirs.empty()) throw std::runtime_error("dataset root has no sequences: " + root.string());
    for (const auto& dir : dirs) {
        Triplet t;
        t.id = dir.filename().string();
        try {
            bool ok = load_frame(dir, 1, t.first) && load_frame(dir, 2, t.middle) && load_frame(dir, 3, t.last);
            if (!ok) {
                ++rep.skipped;
                rep.notes.push_back(t.id + ": missing frame");
                continue;
            }
            if (t.first.shape() != t.middle.shape() || t.first.shape() != t.last.shape()) {
                ++rep.skipped;
                rep.notes.push_back(t.id + ": frame shapes disagree");
                continue;
            }
        } catch (const std::exception& e) {
            ++rep.skipped;
            rep.notes.push_back(t.id + ": " + e.what());
            continue;
        }
        rep.triplets.push_back(std::move(t));
    }
    return rep;
}

std::vector<Tensor<float>> load_sequence(const std::filesystem::path& dir) {
    std::vector<Tensor<float>> frames;
    for (int i = 1;; ++i) {
        Tensor<float> f;
        if (!load_frame(dir, i, f)) break;
        if (!frames.empty() && f.shape() != frames.front().shape())
            throw std::runtime_error(dir.string() + ": frame shapes disagree");
        frames.push_back(std::move(f));
    }
    if (frames.size() < 3) throw std::runtime_error(dir.string() + ": sequence needs at least 3 frames");
    return frames;
}

void SyntheticSpec::validate() const {
    if (count < 0) throw std::invalid_argument("SyntheticSpec: count must be >= 0");
    if (resolution < 8) throw std::invalid_argument("SyntheticSpec: resolution must be >= 8");
    if (band_limit <= 0 || band_limit > 1) throw std::invalid_argument("SyntheticSpec: band limit must be in (0,1]");
    if (max_displacement < 0 || max_displacement > resolution / 4.0)
        throw std::invalid_argument("SyntheticSpec: displacement must be within resolution/4");
    if (sequence_length < 3) throw std::invalid_argument("SyntheticSpec: sequence length must be >= 3");
    if (channels != 1 && channels != 3) throw std::invalid_argument("SyntheticSpec: channels must be 1 or 3");
}

std::string SyntheticSpec::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["count"] = count;
    j["resolution"] = resolution;
    j["motion"] = motion_name(motion);
    j["max_displacement"] = max_displacement;
    j["band_limit"] = band_limit;
    j["sequence_length"] = sequence_length;
    j["channels"] = channels;
    return j.dump(2) + "\n";
}

SyntheticSpec SyntheticSpec::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    SyntheticSpec s;
    s.seed = j.at("seed").get<uint64_t>();
    s.count = j.at("count").get<int>();
    s.resolution = j.at("resolution").get<int>();
    s.motion = motion_from_name(j.at("motion").get<std::string>());
    s.max_displacement = j.at("max_displacement").get<double>();
    s.band_limit = j.at("band_limit").get<double>();
    s.sequence_length = j.at("sequence_length").get<int>();
    s.channels = j.at("channels").get<int>();
    s.validate();
    return s;
}

SynthItem make_synth_item(const SyntheticSpec& spec, int index) {
    spec.validate();
    Rng rng(spec.seed + 0x9E3779B97F4A7C15ULL * static_cast<uint64_t>(index + 1));
    SynthItem item;
    item.motion = spec.motion;
    item.base_resolution = spec.resolution;
    item.channels = spec.channels;

    int band = static_cast<int>(spec.band_limit * spec.resolution / 2.0);
    band = std::max(1, std::min(band, spec.resolution / 2 - 1));
    int k = static_cast<int>(rng.randint(2, 8));
    double amp_sum = 0;
    for (int i = 0; i < k; ++i) {
        SynthItem::Mode m;
        do {
            m.fy = static_cast<int>(rng.randint(-band, band));
            m.fx = static_cast<int>(rng.randint(-band, band));
        } while (m.fy == 0 && m.fx == 0);
        m.amp = rng.uniform(0.3, 1.0);
        m.phase = rng.uniform(0.0, kTwoPi);
        m.phase_rate = rng.uniform(-0.6, 0.6);
        amp_sum += m.amp;
        item.modes.push_back(m);
    }
    // field = 0.5 + scale*sum(amp*cos(...)) stays inside [0.05, 0.95] for
    // every shift, so no clamping is ever needed
    item.scale = 0.9 / (2.0 * amp_sum);
    item.dy = rng.uniform(-spec.max_displacement, spec.max_displacement);
    item.dx = rng.uniform(-spec.max_displacement, spec.max_displacement);
    return item;
}

Tensor<double> synth_frame_f64(const SynthItem& item, double t, int resolution) {
    const int N = resolution;
    Tensor<double> out({item.channels, N, N});
    // displacement expressed at base resolution; the continuous motion is the
    // same at every grid size
    double dy_u = item.dy / item.base_resolution;
    double dx_u = item.dx / item.base_resolution;
    for (int ch = 0; ch < item.channels; ++ch) {
        double* plane = out.data() + static_cast<int64_t>(ch) * N * N;
        for (const auto& m : item.modes) {
            // translation as a phase shift of the mode; per-channel detune so
            // color frames are not trivially identical across channels
            double ph = m.phase + ch * 1.7;
            if (item.motion == Motion::translate)
                ph -= kTwoPi * (m.fy * dy_u + m.fx * dx_u) * t;
            else
                ph += m.phase_rate * t;
            for (int r = 0; r < N; ++r) {
                double row_arg = kTwoPi * m.fy * static_cast<double>(r) / N + ph;
                for (int c = 0; c < N; ++c)
                    plane[static_cast<int64_t>(r) * N + c] +=
                        m.amp * std::cos(row_arg + kTwoPi * m.fx * static_cast<double>(c) / N);
            }
        }
        for (int64_t i = 0; i < static_cast<int64_t>(N) * N; ++i)
            plane[i] = item.offset + item.scale * plane[i];
    }
    return out;
}

Tensor<float> synth_frame(const SynthItem& item, double t, int resolution) {
    auto d = synth_frame_f64(item, t, resolution);
    Tensor<float> out(d.shape());
    for (int64_t i = 0; i < d.numel(); ++i) out.data()[i] = static_cast<float>(d.data()[i]);
    return out;
}

std::vector<Triplet> gen_synthetic(const SyntheticSpec& spec) {
    std::vector<Triplet> out;
    out.reserve(static_cast<size_t>(spec.count));
    for (int i = 0; i < spec.count; ++i) {
        SynthItem item = make_synth_item(spec, i);
        Triplet t;
        char buf[16];
        std::snprintf(buf, sizeof buf, "%05d", i);
        t.id = buf;
        t.first = synth_frame(item, 0.0, spec.resolution);
        t.middle = synth_frame(item, 1.0, spec.resolution);
        t.last = synth_frame(item, 2.0, spec.resolution);
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<std::vector<Tensor<float>>> gen_sequences(const SyntheticSpec& spec) {
    std::vector<std::vector<Tensor<float>>> out;
    out.reserve(static_cast<size_t>(spec.count));
    for (int i = 0; i < spec.count; ++i) {
        SynthItem item = make_synth_item(spec, i);
        std::vector<Tensor<float>> seq;
        for (int t = 0; t < spec.sequence_length; ++t)
            seq.push_back(synth_frame(item, static_cast<double>(t), spec.resolution));
        out.push_back(std::move(seq));
    }
    return out;
}

void materialize_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out) {
    spec.validate();
    std::filesystem::create_directories(out);
    {
        std::ofstream mf(out / "manifest.json");
        if (!mf) throw std::runtime_error("cannot write manifest under " + out.string());
        mf << spec.to_json();
    }
    for (int i = 0; i < spec.count; ++i) {
        SynthItem item = make_synth_item(spec, i);
        char buf[16];
        std::snprintf(buf, sizeof buf, "%05d", i);
        auto dir = out / buf;
        std::filesystem::create_directories(dir);
        for (int t = 0; t < spec.sequence_length; ++t)
            write_png(dir / ("im" + std::to_string(t + 1) + ".png"),
                      synth_frame(item, static_cast<double>(t), spec.resolution));
    }
}

Triplet minmax_normalize(const Triplet& t) {
    float lo = t.first.value()[0], hi = lo;
    for (const auto* f : {&t.first, &t.middle, &t.last})
        for (float v : f->value()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    Triplet out;
    out.id = t.id;
    auto apply = [lo, hi](const Tensor<float>& x) {
        Tensor<float> y(x.shape());
        if (hi == lo) return y;
        float inv = 1.0f / (hi - lo);
        for (int64_t i = 0; i < x.numel(); ++i) y.data()[i] = (x.data()[i] - lo) * inv;
        return y;
    };
    out.first = apply(t.first);
    out.middle = apply(t.middle);
    out.last = apply(t.last);
    return out;
}

Triplet random_crop(const Triplet& t, int side, Rng& rng) {
    int H = t.first.dim(1), W = t.first.dim(2), C = t.first.dim(0);
    if (side > H || side > W)
        throw std::invalid_argument("random_crop: side " + std::to_string(side) + " exceeds frame " +
                                    shape_str(t.first.shape()));
    int r0 = static_cast<int>(rng.randint(0, H - side));
    int c0 = static_cast<int>(rng.randint(0, W - side));
    auto cut = [&](const Tensor<float>& x) {
        Tensor<float> y({C, side, side});
        for (int ch = 0; ch < C; ++ch)
            for (int r = 0; r < side; ++r)
                for (int c = 0; c < side; ++c)
                    y.data()[(static_cast<int64_t>(ch) * side + r) * side + c] =
                        x.data()[(static_cast<int64_t>(ch) * H + r0 + r) * W + c0 + c];
        return y;
    };
    Triplet out;
    out.id = t.id;
    out.first = cut(t.first);
    out.middle = cut(t.middle);
    out.last = cut(t.last);
    return out;
}

}  // namespace afnio
