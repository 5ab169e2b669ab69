#include <doctest.h>

#include "afnio/nio.hpp"
#include "testutil.hpp"

using afnio::NioConfig;
using afnio::NioNet;
using afnio::Tensor;

namespace {

NioConfig tiny_config(int base = 32) {
    NioConfig c;
    c.channels = 1;
    c.base_resolution = base;
    c.lifting_channels = 3;
    c.level_channels = {3, 4, 4, 5};
    c.level_modes = {{{2, 2}, {2, 2}, {1, 1}, {1, 1}}};
    return c;
}

}  // namespace

TEST_CASE("extract_tokens: zero frames and identity lifting") {
    afnio::Rng rng(1);
    NioConfig c = tiny_config();
    NioNet<double> net(c, rng);

    Tensor<double> z({1, 16, 16}, 0.0);
    std::fill(net.token_b.value().begin(), net.token_b.value().end(), 0.0);
    auto t = net.extract_tokens(z, z);
    for (double v : t.value()) CHECK(v == 0.0);

    // 1x1 identity kernel, stride 1, zero bias: tokens = I0 + I1
    NioConfig c1 = tiny_config();
    c1.token_kernel = 1;
    c1.lifting_channels = 1;
    c1.level_channels = {2, 2, 2, 2};
    NioNet<double> net1(c1, rng);
    net1.token_w.value() = {1.0};
    std::fill(net1.token_b.value().begin(), net1.token_b.value().end(), 0.0);
    auto a = testutil::random_tensor<double>({1, 16, 16}, rng);
    auto b = testutil::random_tensor<double>({1, 16, 16}, rng);
    auto tok = net1.extract_tokens(a, b);
    for (int64_t i = 0; i < tok.numel(); ++i)
        CHECK(tok.value()[static_cast<size_t>(i)] == a.value()[static_cast<size_t>(i)] + b.value()[static_cast<size_t>(i)]);
}

TEST_CASE("extract_tokens is exactly symmetric in the frames") {
    afnio::Rng rng(2);
    NioNet<double> net(tiny_config(), rng);
    auto a = testutil::random_tensor<double>({1, 32, 32}, rng);
    auto b = testutil::random_tensor<double>({1, 32, 32}, rng);
    auto t01 = net.extract_tokens(a, b);
    auto t10 = net.extract_tokens(b, a);
    CHECK(t01.value() == t10.value());
}

TEST_CASE("extract_tokens rejects mismatched frames") {
    afnio::Rng rng(3);
    NioNet<double> net(tiny_config(), rng);
    Tensor<double> a({1, 32, 32}, 0.1);
    Tensor<double> b({1, 16, 32}, 0.1);
    CHECK_THROWS_AS(net.extract_tokens(a, b), std::invalid_argument);
}

TEST_CASE("encode halves four times; decode restores the token map") {
    afnio::Rng rng(4);
    NioConfig c = tiny_config(64);
    NioNet<double> net(c, rng);
    auto a = testutil::random_tensor<double>({1, 64, 64}, rng);
    auto b = testutil::random_tensor<double>({1, 64, 64}, rng);
    auto tok = net.extract_tokens(a, b);
    auto latent = net.encode(tok);
    CHECK(latent.shape() == std::vector<int>{c.level_channels[3], 4, 4});
    auto frame = net.decode(latent);
    CHECK(frame.dim(1) == 64);
    CHECK(frame.dim(2) == 64);
    CHECK(frame.dim(0) == c.channels);
}

TEST_CASE("zero input with zero biases stays zero through the net") {
    afnio::Rng rng(5);
    NioNet<double> net(tiny_config(), rng);
    auto np = std::vector<std::pair<std::string, Tensor<double>>>{};
    net.named_params(np);
    for (auto& [name, t] : np)
        if (name.ends_with(".b")) std::fill(t.value().begin(), t.value().end(), 0.0);
    Tensor<double> z({1, 32, 32}, 0.0);
    auto out = net.forward(z, z);
    for (double v : out.value()) CHECK(v == 0.0);
}

TEST_CASE("mode caps are enforced at construction") {
    NioConfig bad = tiny_config(64);
    bad.level_modes = {{{40, 40}, {5, 5}, {3, 3}, {2, 2}}};  // 40 > 64/2 at level 0
    afnio::Rng rng(6);
    CHECK_THROWS_WITH_AS(NioNet<double>(bad, rng), doctest::Contains("cap"), std::invalid_argument);

    // desk default accepted at its base resolution
    NioConfig desk;
    CHECK_NOTHROW(desk.validate());
    CHECK_NOTHROW(NioConfig::paper_scale().validate());
}

TEST_CASE("projection yields the configured channel count") {
    for (int C : {1, 3}) {
        afnio::Rng rng(7);
        NioConfig c = tiny_config();
        c.channels = C;
        NioNet<double> net(c, rng);
        auto a = testutil::random_tensor<double>({C, 32, 32}, rng);
        auto b = testutil::random_tensor<double>({C, 32, 32}, rng);
        auto out = net.forward(a, b);
        CHECK(out.shape() == std::vector<int>{C, 32, 32});
    }
}

TEST_CASE("nio_forward is symmetric and respects the shape contract") {
    afnio::Rng rng(8);
    NioNet<double> net(tiny_config(), rng);
    auto a = testutil::random_tensor<double>({1, 32, 32}, rng);
    auto b = testutil::random_tensor<double>({1, 32, 32}, rng);
    auto y01 = net.forward(a, b);
    auto y10 = net.forward(b, a);
    CHECK(y01.value() == y10.value());
    CHECK(y01.shape() == a.shape());
}

TEST_CASE("trained-size weights run at a larger resolution") {
    afnio::Rng rng(9);
    NioNet<double> net(tiny_config(32), rng);
    auto a = testutil::random_tensor<double>({1, 64, 64}, rng);
    auto b = testutil::random_tensor<double>({1, 64, 64}, rng);
    auto out = net.forward(a, b);
    CHECK(out.shape() == std::vector<int>{1, 64, 64});
}

TEST_CASE("W_NIO = 0 silences the pathway") {
    afnio::Rng rng(10);
    NioNet<double> net(tiny_config(), rng);
    std::fill(net.wnio_w.value().begin(), net.wnio_w.value().end(), 0.0);
    auto a = testutil::random_tensor<double>({1, 32, 32}, rng);
    auto b = testutil::random_tensor<double>({1, 32, 32}, rng);
    auto out = net.forward(a, b);
    for (double v : out.value()) CHECK(v == 0.0);
}

TEST_CASE("inadmissible sizes are rejected naming the nearest admissible size") {
    afnio::Rng rng(11);
    NioNet<double> net(tiny_config(), rng);
    auto a = testutil::random_tensor<double>({1, 24, 24}, rng);
    CHECK_THROWS_WITH_AS(net.forward(a, a), doctest::Contains("32x32"), std::invalid_argument);
}

TEST_CASE("census matches the hand-computed desk value and the live parameter sum") {
    // Desk default: lifting 16, level channels (16,32,32,64), modes
    // (10,10),(5,5),(3,3),(2,2), token 3x3, C=1. Per-block sums:
    //   token 160; enc 104992+30512+47168+35936; dec 35904+47168+30496+104992;
    //   projection 17; output operator 1.
    NioConfig desk;
    CHECK(NioNet<float>::census(desk) == 437346);

    afnio::Rng rng(12);
    NioNet<float> net(desk, rng);
    std::vector<std::pair<std::string, Tensor<float>>> np;
    net.named_params(np);
    int64_t live = 0;
    for (auto& [name, t] : np) live += t.numel();
    CHECK(live == 437346);

    // small variant drops the four decoder spectral blocks
    NioConfig small = desk;
    small.small = true;
    int64_t spectral_dec = 2 * (2 * 2 * 2 * 32 * 32) + 2 * (2 * 3 * 3 * 32 * 32) + 2 * (2 * 5 * 5 * 16 * 16) +
                           2 * (2 * 10 * 10 * 16 * 16);
    CHECK(NioNet<float>::census(small) == 437346 - spectral_dec);

    afnio::Rng rng2(13);
    NioNet<float> snet(small, rng2);
    std::vector<std::pair<std::string, Tensor<float>>> snp;
    snet.named_params(snp);
    int64_t slive = 0;
    for (auto& [name, t] : snp) slive += t.numel();
    CHECK(slive == NioNet<float>::census(small));
}

TEST_CASE("finite differences pass for a coordinate in every stage") {
    afnio::Rng rng(14);
    NioConfig c = tiny_config();
    NioNet<double> net(c, rng);
    auto a = testutil::random_tensor<double>({1, 32, 32}, rng, 0.0, 1.0);
    auto b = testutil::random_tensor<double>({1, 32, 32}, rng, 0.0, 1.0);
    auto target = testutil::random_tensor<double>({1, 32, 32}, rng, 0.0, 1.0);
    auto fwd = [&] {
        auto d = afnio::sub(net.forward(a, b), target);
        return afnio::mean_all(afnio::mul(d, d));
    };
    std::vector<std::pair<std::string, Tensor<double>>> np;
    net.named_params(np);
    afnio::Rng pick(15);
    for (auto& [name, t] : np) {
        auto loss = fwd();
        afnio::backward(loss);
        int64_t i = pick.randint(0, t.numel() - 1);
        double analytic = t.grad()[static_cast<size_t>(i)];
        const double h = 1e-5;
        double save = t.value()[static_cast<size_t>(i)];
        t.value()[static_cast<size_t>(i)] = save + h;
        double up = fwd().item();
        t.value()[static_cast<size_t>(i)] = save - h;
        double dn = fwd().item();
        t.value()[static_cast<size_t>(i)] = save;
        double numeric = (up - dn) / (2 * h);
        double denom = std::max({1e-4, std::abs(analytic), std::abs(numeric)});
        INFO(name, " coord ", i, " analytic ", analytic, " numeric ", numeric);
        CHECK(std::abs(analytic - numeric) / denom < 1e-4);
        for (auto& [n2, t2] : np) t2.zero_grad();
    }
}
