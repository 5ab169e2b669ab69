#include "afnio/train.hpp"

#include <algorithm>
#include <cmath>

namespace afnio {

namespace {

AdamConfig<float> adam_config(const TrainingConfig& t) {
    AdamConfig<float> c;
    c.lr = static_cast<float>(t.lr);
    c.beta1 = static_cast<float>(t.beta1);
    c.beta2 = static_cast<float>(t.beta2);
    c.eps = static_cast<float>(t.eps);
    c.weight_decay = static_cast<float>(t.weight_decay);
    return c;
}

Triplet prepare(const Triplet& t, const DataConfig& data, Rng& rng) {
    Triplet s = t;
    if (data.crop > 0 && (s.first.dim(1) > data.crop || s.first.dim(2) > data.crop))
        s = random_crop(s, data.crop, rng);
    if (data.normalize) s = minmax_normalize(s);
    return s;
}

}  // namespace

CheckpointData make_checkpoint(const AdaFNIO<float>& model, const Adam<float>* opt, uint64_t epoch,
                               const std::string& rng_state) {
    CheckpointData ckpt;
    ckpt.config_json = model_config_to_json(model.cfg);
    for (const auto& [name, t] : model.named_params()) ckpt.add_f32(name, t.shape(), t.data());
    if (opt) {
        for (size_t i = 0; i < opt->size(); ++i) {
            const auto& name = opt->name(i);
            const auto& m = opt->first_moment(i);
            const auto& v = opt->second_moment(i);
            ckpt.add_f32("adam.m." + name, {static_cast<int>(m.size())}, m.data());
            ckpt.add_f32("adam.v." + name, {static_cast<int>(v.size())}, v.data());
        }
        ckpt.add_u64("adam.t", static_cast<uint64_t>(opt->step_count()));
    }
    ckpt.add_u64("epoch", epoch);
    ckpt.add_bytes("rng", rng_state);
    return ckpt;
}

void restore_checkpoint(const CheckpointData& ckpt, AdaFNIO<float>& model, Adam<float>* opt, uint64_t* epoch,
                        std::string* rng_state) {
    auto mismatch = first_json_mismatch(ckpt.config_json, model_config_to_json(model.cfg));
    if (mismatch)
        throw std::invalid_argument("checkpoint config does not match the model; first mismatch at " + *mismatch);
    for (auto& [name, t] : model.named_params()) {
        auto vals = ckpt.get_f32(name);
        if (static_cast<int64_t>(vals.size()) != t.numel())
            throw std::invalid_argument("checkpoint record '" + name + "' has " + std::to_string(vals.size()) +
                                        " values, model expects " + std::to_string(t.numel()));
        std::copy(vals.begin(), vals.end(), t.value().begin());
    }
    if (opt) {
        for (size_t i = 0; i < opt->size(); ++i) {
            const auto& name = opt->name(i);
            auto m = ckpt.get_f32("adam.m." + name);
            auto v = ckpt.get_f32("adam.v." + name);
            if (m.size() != opt->first_moment(i).size() || v.size() != opt->second_moment(i).size())
                throw std::invalid_argument("checkpoint optimizer state for '" + name + "' has the wrong size");
            opt->first_moment(i) = std::move(m);
            opt->second_moment(i) = std::move(v);
        }
        opt->set_step_count(static_cast<int64_t>(ckpt.get_u64("adam.t")));
    }
    if (epoch) *epoch = ckpt.get_u64("epoch");
    if (rng_state) *rng_state = ckpt.get_bytes("rng");
}

std::unique_ptr<AdaFNIO<float>> load_model_for_inference(const CheckpointData& ckpt) {
    ModelConfig cfg = model_config_from_json(ckpt.config_json);
    Rng rng(0);
    auto model = std::make_unique<AdaFNIO<float>>(cfg, rng);
    restore_checkpoint(ckpt, *model);
    model->set_trainable(false);
    return model;
}

TrainResult train(AdaFNIO<float>& model, const std::vector<Triplet>& dataset, const TrainOptions& opts,
                  const CheckpointData* resume) {
    const auto& tc = opts.training;
    if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
    if (tc.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");

    // train/validation split fixed by the run seed alone, so a resumed run
    // sees the same partition
    std::vector<int> idx(dataset.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    {
        Rng split_rng(opts.seed ^ 0xA5A5A5A5ULL);
        for (size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[static_cast<size_t>(split_rng.randint(0, static_cast<int64_t>(i) - 1))]);
    }
    int val_n = static_cast<int>(std::lround(tc.val_fraction * static_cast<double>(dataset.size())));
    val_n = std::clamp(val_n, 0, static_cast<int>(dataset.size()) - 1);
    std::vector<int> val_idx(idx.end() - val_n, idx.end());
    std::vector<int> train_idx(idx.begin(), idx.end() - val_n);

    Adam<float> opt(model.named_params(), adam_config(tc));
    Rng rng(opts.seed + 1);
    uint64_t start_epoch = 0;
    if (resume) {
        std::string rng_state;
        restore_checkpoint(*resume, model, &opt, &start_epoch, &rng_state);
        rng.set_state(rng_state);
    }

    std::unique_ptr<FeatureExtractor<float>> extractor;
    if (tc.perceptual == "random") extractor = std::make_unique<RandomConvExtractor<float>>(model.cfg.channels);

    auto loss_fn = [&](const Tensor<float>& pred, const Tensor<float>& target, int epoch) {
        bool combined = tc.switch_epoch >= 0 && epoch >= tc.switch_epoch;
        if (combined) return combined_loss(pred, target, extractor.get());
        if (tc.loss == "l2") return l2_loss(pred, target);
        return l1_loss(pred, target);
    };
    auto loss_kind = [&](int epoch) -> std::string {
        bool combined = tc.switch_epoch >= 0 && epoch >= tc.switch_epoch;
        if (combined) return extractor ? "l1+feat" : "l1";
        return tc.loss;
    };

    auto validate = [&](TrainResult& res, EpochRecord& rec) {
        if (val_idx.empty()) return;
        NoGradGuard ng;
        double psum = 0, ssum = 0;
        Rng val_rng(opts.seed ^ 0x5A5A5A5AULL);  // fixed val crops across epochs
        for (int i : val_idx) {
            Triplet s = prepare(dataset[static_cast<size_t>(i)], opts.data, val_rng);
            auto pred = model.forward(s.first, s.last);
            psum += psnr(pred, s.middle);
            ssum += ssim(pred, s.middle);
        }
        rec.val_psnr = psum / static_cast<double>(val_idx.size());
        rec.val_ssim = ssum / static_cast<double>(val_idx.size());
        res.best_psnr = std::max(res.best_psnr, *rec.val_psnr);
        res.best_ssim = std::max(res.best_ssim, *rec.val_ssim);
    };

    auto checkpoint_path = [&](uint64_t epoch) {
        return opts.out_dir / ("epoch_" + std::to_string(epoch) + ".ckpt");
    };
    auto write_ckpt = [&](const std::filesystem::path& p, uint64_t epoch) {
        if (opts.out_dir.empty()) return;
        std::filesystem::create_directories(opts.out_dir);
        save_checkpoint(p, make_checkpoint(model, &opt, epoch, rng.state()));
    };

    TrainResult res;
    if (tc.epochs == 0 || start_epoch >= static_cast<uint64_t>(tc.epochs)) {
        write_ckpt(opts.out_dir / "final.ckpt", start_epoch);
        return res;
    }

    for (uint64_t epoch = start_epoch; epoch < static_cast<uint64_t>(tc.epochs); ++epoch) {
        // deterministic shuffle from the serialized rng stream
        std::vector<int> order = train_idx;
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<size_t>(rng.randint(0, static_cast<int64_t>(i) - 1))]);

        double loss_acc = 0;
        int64_t seen = 0;
        int batch_index = 0;
        for (size_t off = 0; off < order.size(); off += static_cast<size_t>(tc.batch_size), ++batch_index) {
            size_t n = std::min(static_cast<size_t>(tc.batch_size), order.size() - off);
            opt.zero_grad();
            Tensor<float> batch_loss;
            for (size_t b = 0; b < n; ++b) {
                Triplet s = prepare(dataset[static_cast<size_t>(order[off + b])], opts.data, rng);
                auto pred = model.forward(s.first, s.last);
                auto li = loss_fn(pred, s.middle, static_cast<int>(epoch));
                batch_loss = b == 0 ? li : add(batch_loss, li);
            }
            batch_loss = scalar_mul(batch_loss, 1.0f / static_cast<float>(n));
            float lv = batch_loss.item();
            if (!std::isfinite(lv))
                throw TrainError("non-finite loss in epoch " + std::to_string(epoch + 1) + " at batch " +
                                     std::to_string(batch_index),
                                 batch_index);
            backward(batch_loss);
            opt.step();
            loss_acc += static_cast<double>(lv) * static_cast<double>(n);
            seen += static_cast<int64_t>(n);
        }

        EpochRecord rec;
        rec.epoch = static_cast<int>(epoch) + 1;
        rec.loss_kind = loss_kind(static_cast<int>(epoch));
        rec.train_loss = loss_acc / static_cast<double>(seen);
        validate(res, rec);
        res.log.push_back(rec);

        if (tc.checkpoint_every > 0 && (epoch + 1) % static_cast<uint64_t>(tc.checkpoint_every) == 0)
            write_ckpt(checkpoint_path(epoch + 1), epoch + 1);
    }
    write_ckpt(opts.out_dir / "final.ckpt", static_cast<uint64_t>(tc.epochs));
    return res;
}

}  // namespace afnio
