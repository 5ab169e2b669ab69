#include <doctest.h>

#include "afnio/conv.hpp"
#include "testutil.hpp"

using afnio::ResampleMode;
using afnio::Tensor;
using testutil::grad_check;

TEST_CASE("1x1 identity kernel passes input through") {
    afnio::Rng rng(1);
    auto x = testutil::random_tensor<float>({2, 4, 5}, rng);
    Tensor<float> k({2, 2, 1, 1}, {1.f, 0.f, 0.f, 1.f});
    auto y = afnio::conv2d(x, k, 1, 0);
    REQUIRE(y.shape() == x.shape());
    for (size_t i = 0; i < y.value().size(); ++i) CHECK(y.value()[i] == x.value()[i]);
}

TEST_CASE("zero kernel gives zero output") {
    afnio::Rng rng(2);
    auto x = testutil::random_tensor<float>({1, 6, 6}, rng);
    Tensor<float> k({3, 1, 3, 3}, 0.f);
    auto y = afnio::conv2d(x, k, 1, 1);
    for (float v : y.value()) CHECK(v == 0.f);
}

TEST_CASE("conv2d matches the quadruple-loop oracle") {
    afnio::Rng rng(3);
    auto x = testutil::random_tensor<double>({1, 1, 4, 4}, rng);
    auto k = testutil::random_tensor<double>({1, 1, 3, 3}, rng);
    auto y = afnio::conv2d(x, k, 1, 1);
    auto ref = testutil::naive_conv2d(x.value(), 1, 4, 4, k.value(), 1, 3, 3, 1, 1);
    REQUIRE(y.numel() == static_cast<int64_t>(ref.size()));
    for (size_t i = 0; i < ref.size(); ++i)
        CHECK(y.value()[i] == doctest::Approx(ref[i]).epsilon(1e-6));

    // multi-channel, strided, batched
    auto x2 = testutil::random_tensor<double>({2, 3, 7, 6}, rng);
    auto k2 = testutil::random_tensor<double>({4, 3, 3, 3}, rng);
    auto y2 = afnio::conv2d(x2, k2, 2, 1);
    for (int b = 0; b < 2; ++b) {
        std::vector<double> xb(x2.data() + b * 3 * 7 * 6, x2.data() + (b + 1) * 3 * 7 * 6);
        auto refb = testutil::naive_conv2d(xb, 3, 7, 6, k2.value(), 4, 3, 3, 2, 1);
        for (size_t i = 0; i < refb.size(); ++i)
            CHECK(y2.value()[static_cast<size_t>(b) * refb.size() + i] == doctest::Approx(refb[i]).epsilon(1e-9));
    }
}

TEST_CASE("conv2d output geometry") {
    Tensor<float> x({1, 8, 8}, 1.f);
    Tensor<float> k({1, 1, 3, 3}, 1.f);
    auto y = afnio::conv2d(x, k, 2, 1);
    CHECK(y.shape() == std::vector<int>{1, 4, 4});
}

TEST_CASE("conv2d rejects bad configurations") {
    Tensor<float> x({2, 4, 4}, 1.f);
    Tensor<float> k({1, 3, 3, 3}, 1.f);
    CHECK_THROWS_WITH_AS(afnio::conv2d(x, k, 1, 1), doctest::Contains("channel mismatch"), std::invalid_argument);
    Tensor<float> kbig({1, 2, 9, 9}, 1.f);
    CHECK_THROWS_AS(afnio::conv2d(x, kbig, 1, 0), std::invalid_argument);
    Tensor<float> kok({1, 2, 3, 3}, 1.f);
    CHECK_THROWS_AS(afnio::conv2d(x, kok, 0, 0), std::invalid_argument);
}

TEST_CASE("conv2d gradients match finite differences") {
    afnio::Rng rng(4);
    auto x = testutil::random_tensor<double>({2, 5, 5}, rng);
    auto k = testutil::random_tensor<double>({3, 2, 3, 3}, rng);
    auto w = testutil::random_tensor<double>({3, 3, 3}, rng);  // output weighting for stride 1 pad 1
    x.set_requires_grad();
    k.set_requires_grad();
    auto fwd = [&] {
        auto y = afnio::conv2d(x, k, 2, 1);
        return afnio::mean_all(afnio::mul(y, w));
    };
    auto rx = grad_check(fwd, x);
    CHECK(rx.max_rel_err < 1e-5);
    x.zero_grad();
    k.zero_grad();
    auto rk = grad_check(fwd, k);
    CHECK(rk.max_rel_err < 1e-5);
}

TEST_CASE("resample factor 1 is identity") {
    afnio::Rng rng(5);
    auto x = testutil::random_tensor<float>({2, 3, 3}, rng);
    auto up = afnio::resample(x, 1, ResampleMode::nearest_up);
    auto dn = afnio::resample(x, 1, ResampleMode::avg_down);
    CHECK(up.value() == x.value());
    CHECK(dn.value() == x.value());
}

TEST_CASE("nearest_up replicates blocks") {
    Tensor<float> x({1, 2, 2}, {1.f, 2.f, 3.f, 4.f});
    auto y = afnio::resample(x, 2, ResampleMode::nearest_up);
    REQUIRE(y.shape() == std::vector<int>{1, 4, 4});
    std::vector<float> expect = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    CHECK(y.value() == expect);
}

TEST_CASE("avg_down undoes nearest_up exactly") {
    afnio::Rng rng(6);
    auto x = testutil::random_tensor<float>({3, 4, 6}, rng);
    auto y = afnio::resample(afnio::resample(x, 2, ResampleMode::nearest_up), 2, ResampleMode::avg_down);
    REQUIRE(y.shape() == x.shape());
    for (size_t i = 0; i < x.value().size(); ++i)
        CHECK(y.value()[i] == doctest::Approx(x.value()[i]).epsilon(1e-6));
}

TEST_CASE("avg_down rejects indivisible sizes") {
    Tensor<float> x({1, 5, 4}, 1.f);
    CHECK_THROWS_AS(afnio::resample(x, 2, ResampleMode::avg_down), std::invalid_argument);
}

TEST_CASE("resample gradients") {
    afnio::Rng rng(7);
    auto x = testutil::random_tensor<double>({2, 4, 4}, rng);
    x.set_requires_grad();
    auto w = testutil::random_tensor<double>({2, 8, 8}, rng);
    auto r1 = grad_check([&] {
        return afnio::mean_all(afnio::mul(afnio::resample(x, 2, ResampleMode::nearest_up), w));
    }, x);
    CHECK(r1.max_rel_err < 1e-6);
    x.zero_grad();
    auto w2 = testutil::random_tensor<double>({2, 2, 2}, rng);
    auto r2 = grad_check([&] {
        return afnio::mean_all(afnio::mul(afnio::resample(x, 2, ResampleMode::avg_down), w2));
    }, x);
    CHECK(r2.max_rel_err < 1e-6);
}
