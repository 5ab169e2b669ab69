// Command-line front end: synthetic data generation, training, single-pair
// inference, drop/resolution evaluation, and the resolution-transfer report.
#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

#include "afnio/eval.hpp"
#include "afnio/image.hpp"
#include "afnio/train.hpp"

using nlohmann::json;

namespace {

afnio::RunConfig resolve_config(const std::string& config_path) {
    if (config_path.empty()) return afnio::RunConfig{};
    return afnio::load_run_config(config_path);
}

std::vector<afnio::Triplet> load_training_data(const afnio::RunConfig& cfg) {
    if (!cfg.data.root.empty()) {
        auto rep = afnio::load_triplets(cfg.data.root);
        for (const auto& note : rep.notes) std::cerr << "skipped " << note << "\n";
        if (rep.skipped > 0) std::cerr << "skipped " << rep.skipped << " sequence(s)\n";
        if (rep.triplets.empty()) throw std::runtime_error("no usable triplets under " + cfg.data.root);
        return rep.triplets;
    }
    if (cfg.data.synthetic.count > 0) return afnio::gen_synthetic(cfg.data.synthetic);
    throw std::runtime_error("no training data: give --data or a synthetic count");
}

int cmd_gen_data(const afnio::SyntheticSpec& spec, const std::string& out) {
    afnio::materialize_synthetic(spec, out);
    json j{{"event", "gen-data"}, {"out", out}, {"count", spec.count}, {"resolution", spec.resolution}};
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_train(afnio::RunConfig cfg, const std::string& out_dir, const std::string& resume_path) {
    if (out_dir.empty()) throw std::runtime_error("train needs --out");
    afnio::echo_run_config(cfg, out_dir);
    auto data = load_training_data(cfg);

    afnio::Rng rng(cfg.seed);
    afnio::AdaFNIO<float> model(cfg.model, rng);

    afnio::CheckpointData resume;
    bool resuming = !resume_path.empty();
    if (resuming) resume = afnio::load_checkpoint(resume_path);

    afnio::TrainOptions opts;
    opts.training = cfg.training;
    opts.data = cfg.data;
    opts.seed = cfg.seed;
    opts.out_dir = out_dir;
    auto result = afnio::train(model, data, opts, resuming ? &resume : nullptr);

    std::ofstream log(std::filesystem::path(out_dir) / "metrics.jsonl",
                      resuming ? std::ios::app : std::ios::trunc);
    auto emit = [&](const json& j) {
        std::cout << j.dump() << "\n";
        log << j.dump() << "\n";
    };
    for (const auto& rec : result.log) {
        json j{{"epoch", rec.epoch}, {"loss_kind", rec.loss_kind}, {"train_loss", rec.train_loss}};
        j["val_psnr"] = rec.val_psnr ? json(*rec.val_psnr) : json(nullptr);
        j["val_ssim"] = rec.val_ssim ? json(*rec.val_ssim) : json(nullptr);
        emit(j);
    }
    emit(json{{"event", "best"}, {"val_psnr", result.best_psnr}, {"val_ssim", result.best_ssim}});
    return 0;
}

int cmd_infer(const std::string& ckpt_path, const std::string& f0, const std::string& f1, const std::string& out) {
    auto model = afnio::load_model_for_inference(afnio::load_checkpoint(ckpt_path));
    auto I0 = afnio::read_image(f0);
    auto I1 = afnio::read_image(f1);
    if (I0.shape() != I1.shape()) throw std::runtime_error("input frames differ in size");
    std::string why;
    if (!afnio::model_admits(*model, I0.dim(1), I0.dim(2), &why)) {
        auto [h, w] = model->cfg.nio.suggest_admissible(I0.dim(1), I0.dim(2));
        throw std::runtime_error("frame size " + std::to_string(I0.dim(1)) + "x" + std::to_string(I0.dim(2)) +
                                 " is inadmissible (" + why + "); nearest admissible is " + std::to_string(h) + "x" +
                                 std::to_string(w));
    }
    afnio::NoGradGuard ng;
    afnio::write_png(out, model->forward(I0, I1));
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir, std::vector<int> drops,
             std::vector<int> resolutions, int count, int threads) {
    auto model = afnio::load_model_for_inference(afnio::load_checkpoint(ckpt_path));

    std::optional<afnio::SyntheticSpec> manifest;
    auto manifest_path = std::filesystem::path(data_dir) / "manifest.json";
    if (std::filesystem::exists(manifest_path)) {
        std::ifstream mf(manifest_path);
        std::string text((std::istreambuf_iterator<char>(mf)), std::istreambuf_iterator<char>());
        manifest = afnio::SyntheticSpec::from_json(text);
    }

    std::vector<std::vector<afnio::Tensor<float>>> sequences;
    for (const auto& dir : afnio::list_sequences(data_dir)) sequences.push_back(afnio::load_sequence(dir));

    for (int drop : drops) {
        auto score = afnio::eval_drop(*model, sequences, drop, threads);
        if (score.frames_scored == 0)
            throw std::runtime_error("drop " + std::to_string(drop) + " unsupported by the sequence length");
        json j{{"drop", drop},
               {"psnr", score.mean_psnr},
               {"ssim", score.mean_ssim},
               {"frames", score.frames_scored},
               {"skipped", score.sequences_skipped}};
        std::cout << j.dump() << "\n";
    }

    if (!resolutions.empty()) {
        if (!manifest)
            throw std::runtime_error("--resolution needs a synthetic dataset with a manifest.json");
        afnio::SyntheticSpec spec = *manifest;
        if (count > 0) spec.count = count;
        auto rows = afnio::eval_resolutions(*model, spec, resolutions, spec.count, threads);
        for (const auto& r : rows) {
            json j{{"resolution", r.resolution}, {"admissible", r.admissible}};
            if (r.admissible) {
                j["psnr"] = r.mean_psnr;
                j["ssim"] = r.mean_ssim;
                j["count"] = r.count;
            }
            std::cout << j.dump() << "\n";
        }
    }
    return 0;
}

int cmd_restest(const std::string& ckpt_path, std::vector<int> resolutions, int count, double band_limit,
                uint64_t seed, int threads) {
    auto model = afnio::load_model_for_inference(afnio::load_checkpoint(ckpt_path));
    int base = model->cfg.nio.base_resolution;
    if (resolutions.empty()) resolutions = {base, 2 * base, 4 * base};

    afnio::SyntheticSpec spec;
    spec.seed = seed;
    spec.count = count;
    spec.resolution = base;
    spec.band_limit = band_limit;
    spec.max_displacement = 1.0;
    spec.channels = model->cfg.channels;

    auto rows = afnio::eval_resolutions(*model, spec, resolutions, count, threads);
    double base_ssim = 0;
    bool have_base = false;
    double max_degradation = 0;
    for (const auto& r : rows) {
        json j{{"resolution", r.resolution}, {"admissible", r.admissible}};
        if (r.admissible) {
            j["psnr"] = r.mean_psnr;
            j["ssim"] = r.mean_ssim;
            if (!have_base) {
                base_ssim = r.mean_ssim;
                have_base = true;
            }
            max_degradation = std::max(max_degradation, base_ssim - r.mean_ssim);
        }
        std::cout << j.dump() << "\n";
    }
    std::cout << json{{"event", "summary"}, {"max_ssim_degradation", max_degradation}}.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AdaFNIO video frame interpolation"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may appear after the subcommand

    std::string config_path, out_dir, data_dir, resume_path, ckpt_path, frame0, frame1, out_image;
    uint64_t seed_flag = 0;
    bool seed_given = false;
    int threads = 1;

    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option_function<uint64_t>(
           "--seed", [&](uint64_t v) { seed_flag = v; seed_given = true; }, "RNG seed override");
    app.add_option("--threads", threads, "worker threads for evaluation");

    auto* gen = app.add_subcommand("gen-data", "materialize a synthetic triplet dataset");
    afnio::SyntheticSpec spec;
    std::string motion = "translate";
    gen->add_option("--out", out_dir, "output directory")->required();
    gen->add_option("--count", spec.count, "number of sequences")->required();
    gen->add_option("--res", spec.resolution, "frame side length");
    gen->add_option("--motion", motion, "translate | rotate-phase");
    gen->add_option("--max-displacement", spec.max_displacement, "pixels per frame step");
    gen->add_option("--band-limit", spec.band_limit, "highest frequency as a fraction of Nyquist");
    gen->add_option("--seq-len", spec.sequence_length, "frames per sequence");
    gen->add_option("--channels", spec.channels, "1 grayscale, 3 color");

    auto* train = app.add_subcommand("train", "train a model");
    std::string loss_flag, pathway_flag;
    int epochs_flag = -1, batch_flag = -1, crop_flag = -1, synth_count = -1, synth_res = -1;
    double lr_flag = -1;
    bool normalize_flag = false;
    train->add_option("--data", data_dir, "triplet dataset root");
    train->add_option("--out", out_dir, "run output directory")->required();
    train->add_option("--epochs", epochs_flag, "training epochs");
    train->add_option("--batch", batch_flag, "batch size");
    train->add_option("--lr", lr_flag, "learning rate");
    train->add_option("--loss", loss_flag, "l1 | l2");
    train->add_option("--pathway", pathway_flag, "full | nio | adacof");
    train->add_option("--crop", crop_flag, "random crop side");
    train->add_flag("--normalize", normalize_flag, "min-max normalize triplets");
    train->add_option("--resume", resume_path, "checkpoint to resume from");
    train->add_option("--synth-count", synth_count, "generate this many synthetic triplets");
    train->add_option("--synth-res", synth_res, "synthetic frame side");

    auto* infer = app.add_subcommand("infer", "interpolate the midpoint of two frames");
    infer->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
    infer->add_option("--frame0", frame0, "first frame image")->required();
    infer->add_option("--frame1", frame1, "second frame image")->required();
    infer->add_option("--out-image", out_image, "output PNG path")->required();

    auto* eval = app.add_subcommand("eval", "score a checkpoint on a dataset");
    std::vector<int> drops, resolutions;
    int eval_count = 0;
    eval->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
    eval->add_option("--data", data_dir, "sequence dataset root")->required();
    eval->add_option("--drop", drops, "drop schedules to score");
    eval->add_option("--resolution", resolutions, "resolution sweep (needs a synthetic manifest)");
    eval->add_option("--count", eval_count, "sequences per resolution row");

    auto* restest = app.add_subcommand("restest", "resolution-transfer report");
    double band_limit = 0.25;
    int res_count = 50;
    restest->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
    restest->add_option("--resolutions", resolutions, "explicit resolution list");
    restest->add_option("--count", res_count, "samples per resolution");
    restest->add_option("--band-limit", band_limit, "synthetic band limit");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            spec.motion = motion == "rotate-phase" ? afnio::Motion::rotate_phase : afnio::Motion::translate;
            if (motion != "translate" && motion != "rotate-phase")
                throw std::runtime_error("unknown motion family '" + motion + "'");
            if (seed_given) spec.seed = seed_flag;
            spec.validate();
            return cmd_gen_data(spec, out_dir);
        }
        if (train->parsed()) {
            afnio::RunConfig cfg = resolve_config(config_path);
            if (seed_given) cfg.seed = seed_flag;
            cfg.threads = threads;
            if (!data_dir.empty()) cfg.data.root = data_dir;
            if (epochs_flag >= 0) cfg.training.epochs = epochs_flag;
            if (batch_flag > 0) cfg.training.batch_size = batch_flag;
            if (lr_flag > 0) cfg.training.lr = lr_flag;
            if (!loss_flag.empty()) {
                if (loss_flag != "l1" && loss_flag != "l2") throw std::runtime_error("--loss must be l1 or l2");
                cfg.training.loss = loss_flag;
            }
            if (!pathway_flag.empty()) cfg.model.pathway = afnio::pathway_from_name(pathway_flag);
            if (crop_flag >= 0) cfg.data.crop = crop_flag;
            if (normalize_flag) cfg.data.normalize = true;
            if (synth_count > 0) cfg.data.synthetic.count = synth_count;
            if (synth_res > 0) cfg.data.synthetic.resolution = synth_res;
            if (cfg.data.root.empty()) cfg.data.synthetic.seed = cfg.seed;
            return cmd_train(std::move(cfg), out_dir, resume_path);
        }
        if (infer->parsed()) return cmd_infer(ckpt_path, frame0, frame1, out_image);
        if (eval->parsed()) {
            if (drops.empty() && resolutions.empty()) drops = {1};
            return cmd_eval(ckpt_path, data_dir, drops, resolutions, eval_count, threads);
        }
        if (restest->parsed())
            return cmd_restest(ckpt_path, resolutions, res_count, band_limit, seed_given ? seed_flag : 12345,
                               threads);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
