#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "afnio/train.hpp"
#include "testutil.hpp"

using afnio::Tensor;

TEST_CASE("l1: values and subgradient") {
    Tensor<double> p({2}, {0.0, 1.0});
    Tensor<double> t({2}, {1.0, 0.0});
    p.set_requires_grad();
    auto l = afnio::l1_loss(p, t);
    CHECK(l.item() == doctest::Approx(1.0));
    afnio::backward(l);
    CHECK(p.grad()[0] == doctest::Approx(-0.5));
    CHECK(p.grad()[1] == doctest::Approx(0.5));

    Tensor<double> same({3}, {0.3, 0.4, 0.5});
    CHECK(afnio::l1_loss(same, same).item() == 0.0);
    Tensor<double> shifted({3}, {0.8, 0.9, 1.0});
    CHECK(afnio::l1_loss(shifted, same).item() == doctest::Approx(0.5));
    Tensor<double> bad({2}, 0.0);
    CHECK_THROWS_AS(afnio::l1_loss(bad, same), std::invalid_argument);
}

TEST_CASE("l2: values") {
    Tensor<double> a({4}, {0.1, 0.2, 0.3, 0.4});
    CHECK(afnio::l2_loss(a, a).item() == 0.0);
    Tensor<double> b({4}, {0.2, 0.3, 0.4, 0.5});
    CHECK(afnio::l2_loss(b, a).item() == doctest::Approx(0.01).epsilon(1e-9));
    afnio::Rng rng(1);
    auto p = testutil::random_tensor<double>({4}, rng);
    auto t = testutil::random_tensor<double>({4}, rng);
    double expect = 0;
    for (int i = 0; i < 4; ++i) {
        double d = p.value()[static_cast<size_t>(i)] - t.value()[static_cast<size_t>(i)];
        expect += d * d;
    }
    CHECK(afnio::l2_loss(p, t).item() == doctest::Approx(expect / 4).epsilon(1e-12));
}

TEST_CASE("loss non-negativity and zero-iff-equal") {
    afnio::Rng rng(2);
    for (int i = 0; i < 20; ++i) {
        auto p = testutil::random_tensor<double>({8}, rng);
        auto t = testutil::random_tensor<double>({8}, rng);
        CHECK(afnio::l1_loss(p, t).item() >= 0.0);
        CHECK(afnio::l2_loss(p, t).item() >= 0.0);
        if (p.value() != t.value()) {
            CHECK(afnio::l1_loss(p, t).item() > 0.0);
            CHECK(afnio::l2_loss(p, t).item() > 0.0);
        }
    }
}

TEST_CASE("combined loss: absent, identity and fixed-stack extractors") {
    afnio::Rng rng(3);
    auto p = testutil::random_tensor<double>({1, 6, 6}, rng);
    auto t = testutil::random_tensor<double>({1, 6, 6}, rng);
    auto base = afnio::l1_loss(p, t).item();
    CHECK(afnio::combined_loss<double>(p, t, nullptr).item() == doctest::Approx(base).epsilon(1e-12));

    afnio::IdentityExtractor<double> ident;
    CHECK(afnio::combined_loss<double>(p, t, &ident).item() == doctest::Approx(1.01 * base).epsilon(1e-9));

    afnio::RandomConvExtractor<double> feat(1);
    auto fp = feat(p);
    auto ft = feat(t);
    double expect = base + 0.01 * afnio::l1_loss(fp, ft).item();
    CHECK(afnio::combined_loss<double>(p, t, &feat).item() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("adam: zero gradient leaves parameters, advances the step count") {
    Tensor<float> p({3}, {1.f, 2.f, 3.f});
    p.set_requires_grad();
    p.grad_mut();  // zeros
    afnio::AdamConfig<float> cfg;
    cfg.weight_decay = 0.f;
    afnio::Adam<float> opt({{"p", p}}, cfg);
    opt.step();
    CHECK(p.value() == std::vector<float>{1.f, 2.f, 3.f});
    CHECK(opt.step_count() == 1);
}

TEST_CASE("adam: first-step hand value") {
    Tensor<double> p({1}, {0.0});
    p.set_requires_grad();
    p.grad_mut()[0] = 1.0;
    afnio::AdamConfig<double> cfg;
    cfg.lr = 1e-4;
    cfg.weight_decay = 0.0;
    afnio::Adam<double> opt({{"p", p}}, cfg);
    opt.step();
    // m_hat = 1, v_hat = 1 -> update = -lr / (1 + eps)
    double expect = -1e-4 / (1.0 + 1e-8);
    CHECK(p.value()[0] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(p.value()[0] + 1e-4) < 2e-12);
}

TEST_CASE("adam: two constant-gradient steps stay within [0.9 lr, lr]") {
    Tensor<double> p({1}, {0.0});
    p.set_requires_grad();
    afnio::AdamConfig<double> cfg;
    cfg.lr = 1e-4;
    cfg.weight_decay = 0.0;
    afnio::Adam<double> opt({{"p", p}}, cfg);
    double prev = 0.0;
    for (int step = 0; step < 2; ++step) {
        p.grad_mut()[0] = 1.0;
        opt.step();
        double delta = std::abs(p.value()[0] - prev);
        CHECK(delta <= 1e-4 * 1.0000001);
        CHECK(delta >= 0.9e-4);
        prev = p.value()[0];
    }
}

TEST_CASE("adam: gradient scaling leaves the update direction and near-magnitude") {
    auto run = [](double scale) {
        afnio::Rng rng(4);
        Tensor<double> p({5});
        for (auto& v : p.value()) v = rng.uniform(-1, 1);
        p.set_requires_grad();
        afnio::AdamConfig<double> cfg;
        cfg.weight_decay = 0.0;
        afnio::Adam<double> opt({{"p", p}}, cfg);
        std::vector<double> before = p.value();
        afnio::Rng grng(5);
        std::vector<double> g(5);
        for (auto& v : g) v = rng.uniform(0.5, 2.0);
        for (int s = 0; s < 3; ++s) {
            for (int i = 0; i < 5; ++i) p.grad_mut()[static_cast<size_t>(i)] = g[static_cast<size_t>(i)] * scale;
            opt.step();
        }
        std::vector<double> delta(5);
        for (int i = 0; i < 5; ++i) delta[static_cast<size_t>(i)] = p.value()[static_cast<size_t>(i)] - before[static_cast<size_t>(i)];
        return delta;
    };
    auto d1 = run(1.0);
    auto d2 = run(7.5);
    for (int i = 0; i < 5; ++i) {
        CHECK(d1[static_cast<size_t>(i)] == doctest::Approx(d2[static_cast<size_t>(i)]).epsilon(1e-6));
        CHECK(std::abs(d1[static_cast<size_t>(i)]) <= 3 * 1e-4 * 1.0001);
    }
}

TEST_CASE("adam: decoupled weight decay shrinks parameters before the update") {
    Tensor<double> p({1}, {2.0});
    p.set_requires_grad();
    p.grad_mut()[0] = 0.0;
    afnio::AdamConfig<double> cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.5;
    afnio::Adam<double> opt({{"p", p}}, cfg);
    opt.step();
    CHECK(p.value()[0] == doctest::Approx(2.0 * (1.0 - 0.1 * 0.5)).epsilon(1e-12));
}

TEST_CASE("adam: missing gradient is rejected naming the parameter") {
    Tensor<float> p({2}, 1.f);
    p.set_requires_grad();
    afnio::AdamConfig<float> cfg;
    afnio::Adam<float> opt({{"conv.weight", p}}, cfg);
    CHECK_THROWS_WITH_AS(opt.step(), doctest::Contains("conv.weight"), std::runtime_error);
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

namespace {

afnio::ModelConfig tiny_nio_cfg() {
    afnio::ModelConfig cfg;
    cfg.channels = 1;
    cfg.pathway = afnio::Pathway::nio_only;
    cfg.nio.channels = 1;
    cfg.nio.base_resolution = 16;
    cfg.nio.lifting_channels = 3;
    cfg.nio.level_channels = {3, 4, 4, 5};
    cfg.nio.level_modes = {{{2, 2}, {2, 2}, {1, 1}, {1, 1}}};
    return cfg;
}

std::vector<afnio::Triplet> tiny_dataset(int count, int res = 16) {
    afnio::SyntheticSpec spec;
    spec.seed = 9;
    spec.count = count;
    spec.resolution = res;
    spec.max_displacement = 1.0;
    return afnio::gen_synthetic(spec);
}

}  // namespace

TEST_CASE("zero epochs leaves the initialization checkpoint") {
    auto cfg = tiny_nio_cfg();
    afnio::Rng rng(6);
    afnio::AdaFNIO<float> model(cfg, rng);
    auto before = model.named_params();
    std::vector<std::vector<float>> saved;
    for (auto& [n, t] : before) saved.push_back(t.value());

    afnio::TrainOptions opts;
    opts.training.epochs = 0;
    opts.seed = 1;
    auto res = afnio::train(model, tiny_dataset(4), opts);
    CHECK(res.log.empty());
    auto after = model.named_params();
    for (size_t i = 0; i < after.size(); ++i) CHECK(after[i].second.value() == saved[i]);
}

TEST_CASE("one step on a single sample decreases that sample's loss") {
    auto cfg = tiny_nio_cfg();
    afnio::Rng rng(7);
    afnio::AdaFNIO<float> model(cfg, rng);
    auto data = tiny_dataset(1);
    auto loss_now = [&] {
        afnio::NoGradGuard ng;
        auto pred = model.forward(data[0].first, data[0].last);
        return afnio::l1_loss(pred, data[0].middle).item();
    };
    double before = loss_now();
    afnio::TrainOptions opts;
    opts.training.epochs = 1;
    opts.training.batch_size = 1;
    opts.training.val_fraction = 0.0;
    opts.training.lr = 1e-4;
    opts.seed = 2;
    afnio::train(model, data, opts);
    CHECK(loss_now() < before);
}

TEST_CASE("training determinism: identical seeds give identical logs") {
    auto run = [] {
        auto cfg = tiny_nio_cfg();
        afnio::Rng rng(8);
        afnio::AdaFNIO<float> model(cfg, rng);
        afnio::TrainOptions opts;
        opts.training.epochs = 2;
        opts.training.batch_size = 4;
        opts.seed = 3;
        return afnio::train(model, tiny_dataset(12), opts);
    };
    auto a = run();
    auto b = run();
    REQUIRE(a.log.size() == b.log.size());
    for (size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].train_loss == b.log[i].train_loss);
        CHECK(*a.log[i].val_psnr == *b.log[i].val_psnr);
        CHECK(*a.log[i].val_ssim == *b.log[i].val_ssim);
    }
}

TEST_CASE("loss switch changes the logged definition without a parameter jump") {
    auto cfg = tiny_nio_cfg();
    afnio::Rng rng(9);
    afnio::AdaFNIO<float> model(cfg, rng);
    afnio::TrainOptions opts;
    opts.training.epochs = 2;
    opts.training.batch_size = 4;
    opts.training.switch_epoch = 1;
    opts.training.perceptual = "random";
    opts.seed = 4;
    auto res = afnio::train(model, tiny_dataset(8), opts);
    REQUIRE(res.log.size() == 2);
    CHECK(res.log[0].loss_kind == "l1");
    CHECK(res.log[1].loss_kind == "l1+feat");
    for (auto& [n, t] : model.named_params())
        for (float v : t.value()) CHECK(std::isfinite(v));
}

TEST_CASE("checkpoint roundtrip: save -> load -> save byte-identical") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "afnio_test_ckpt";
    fs::create_directories(dir);
    auto cfg = tiny_nio_cfg();
    afnio::Rng rng(10);
    afnio::AdaFNIO<float> model(cfg, rng);
    afnio::Adam<float> opt(model.named_params(), afnio::AdamConfig<float>{});
    afnio::Rng trng(11);

    auto ckpt = afnio::make_checkpoint(model, &opt, 3, trng.state());
    auto p1 = dir / "a.ckpt";
    auto p2 = dir / "b.ckpt";
    afnio::save_checkpoint(p1, ckpt);
    auto loaded = afnio::load_checkpoint(p1);
    afnio::save_checkpoint(p2, loaded);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    CHECK(!s1.empty());

    // restore recovers parameters bit-exactly
    afnio::Rng rng2(12);
    afnio::AdaFNIO<float> other(cfg, rng2);
    afnio::restore_checkpoint(loaded, other);
    auto a = model.named_params();
    auto b = other.named_params();
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].second.value() == b[i].second.value());
    fs::remove_all(dir);
}

TEST_CASE("checkpoint corruption and mismatches give distinct errors") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "afnio_test_ckpt2";
    fs::create_directories(dir);
    auto cfg = tiny_nio_cfg();
    afnio::Rng rng(13);
    afnio::AdaFNIO<float> model(cfg, rng);
    auto ckpt = afnio::make_checkpoint(model, nullptr, 0, afnio::Rng(1).state());
    auto path = dir / "c.ckpt";
    afnio::save_checkpoint(path, ckpt);

    auto read_all = [&] {
        std::ifstream f(path, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    };
    auto write_all = [&](const std::string& s) {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f.write(s.data(), static_cast<std::streamsize>(s.size()));
    };
    std::string good = read_all();

    // flip one payload byte -> checksum error
    std::string bad = good;
    bad[bad.size() / 2] ^= 0x40;
    write_all(bad);
    try {
        afnio::load_checkpoint(path);
        FAIL("expected checksum failure");
    } catch (const afnio::CheckpointException& e) {
        CHECK(e.kind() == afnio::CheckpointError::checksum_mismatch);
    }

    // truncate -> truncated (CRC of a shorter payload fails or a record
    // overruns; both map to file-level errors, truncation must not pass)
    write_all(good.substr(0, good.size() / 2));
    CHECK_THROWS_AS(afnio::load_checkpoint(path), afnio::CheckpointException);

    // version bump -> version mismatch
    std::string vbad = good;
    vbad[6] = 9;
    write_all(vbad);
    try {
        afnio::load_checkpoint(path);
        FAIL("expected version mismatch");
    } catch (const afnio::CheckpointException& e) {
        CHECK(e.kind() == afnio::CheckpointError::version_mismatch);
    }

    // wrong magic
    std::string mbad = good;
    mbad[0] = 'X';
    write_all(mbad);
    try {
        afnio::load_checkpoint(path);
        FAIL("expected bad magic");
    } catch (const afnio::CheckpointException& e) {
        CHECK(e.kind() == afnio::CheckpointError::bad_magic);
    }

    // config-mismatched restore names the first differing field
    write_all(good);
    auto loaded = afnio::load_checkpoint(path);
    auto cfg2 = cfg;
    cfg2.nio.lifting_channels = 4;
    afnio::Rng rng3(14);
    afnio::AdaFNIO<float> other(cfg2, rng3);
    CHECK_THROWS_WITH_AS(afnio::restore_checkpoint(loaded, other), doctest::Contains("lifting_channels"),
                         std::invalid_argument);
    fs::remove_all(dir);
}

TEST_CASE("resume reproduces the uninterrupted metric log exactly") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "afnio_test_resume";
    fs::remove_all(dir);

    auto make_model = [] {
        auto cfg = tiny_nio_cfg();
        afnio::Rng rng(15);
        return afnio::AdaFNIO<float>(cfg, rng);
    };
    auto data = tiny_dataset(10);

    afnio::TrainOptions full;
    full.training.epochs = 3;
    full.training.batch_size = 4;
    full.seed = 5;
    auto m1 = make_model();
    auto rfull = afnio::train(m1, data, full);

    afnio::TrainOptions part = full;
    part.training.epochs = 2;
    part.out_dir = dir;
    auto m2 = make_model();
    afnio::train(m2, data, part);

    auto ckpt = afnio::load_checkpoint(dir / "final.ckpt");
    auto m3 = make_model();
    afnio::TrainOptions rest = full;  // epochs = 3
    rest.out_dir.clear();
    auto rres = afnio::train(m3, data, rest, &ckpt);
    REQUIRE(rres.log.size() == 1);
    CHECK(rres.log[0].epoch == 3);
    CHECK(rres.log[0].train_loss == rfull.log[2].train_loss);
    CHECK(*rres.log[0].val_psnr == *rfull.log[2].val_psnr);
    CHECK(*rres.log[0].val_ssim == *rfull.log[2].val_ssim);

    // resumed parameters equal the uninterrupted run's parameters bit-exactly
    auto a = m1.named_params();
    auto b = m3.named_params();
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].second.value() == b[i].second.value());
    fs::remove_all(dir);
}
