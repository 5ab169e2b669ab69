#include <doctest.h>

#include "afnio/conv.hpp"
#include "afnio/tensor.hpp"
#include "testutil.hpp"

using afnio::Tensor;
using testutil::grad_check;

TEST_CASE("add identity and backward sum rule") {
    Tensor<double> x({2}, {1.0, 2.0});
    Tensor<double> z({2}, {0.0, 0.0});
    auto y = afnio::add(x, z);
    CHECK(y.value()[0] == 1.0);
    CHECK(y.value()[1] == 2.0);

    Tensor<double> a({2}, {1.0, 2.0});
    Tensor<double> b({2}, {3.0, 4.0});
    a.set_requires_grad();
    b.set_requires_grad();
    auto s = afnio::sum_all(afnio::add(a, b));
    CHECK(s.item() == doctest::Approx(10.0));
    afnio::backward(s);
    CHECK(a.grad()[0] == 1.0);
    CHECK(a.grad()[1] == 1.0);
    CHECK(b.grad()[0] == 1.0);
    CHECK(b.grad()[1] == 1.0);
}

TEST_CASE("mul by zero absorbs") {
    Tensor<float> x({3}, {1.f, -2.f, 5.f});
    Tensor<float> z({3}, 0.f);
    auto y = afnio::mul(x, z);
    for (float v : y.value()) CHECK(v == 0.f);
}

TEST_CASE("shape mismatch beyond channel broadcast is rejected with diagnostics") {
    Tensor<float> a({2, 3}, 1.f);
    Tensor<float> b({3, 2}, 1.f);
    CHECK_THROWS_WITH_AS(afnio::add(a, b), doctest::Contains("[2,3]"), std::invalid_argument);
    Tensor<float> x({2, 4, 4}, 1.f);
    Tensor<float> bias({3}, 1.f);
    CHECK_THROWS_AS(afnio::bias_add(x, bias), std::invalid_argument);
    Tensor<float> mat({4, 4}, 1.f);
    CHECK_THROWS_AS(afnio::bias_add(mat, bias), std::invalid_argument);
}

TEST_CASE("bias_add broadcasts over channels only") {
    Tensor<double> x({2, 2, 2}, 0.0);
    Tensor<double> b({2}, {1.0, -1.0});
    auto y = afnio::bias_add(x, b);
    for (int i = 0; i < 4; ++i) CHECK(y.value()[static_cast<size_t>(i)] == 1.0);
    for (int i = 4; i < 8; ++i) CHECK(y.value()[static_cast<size_t>(i)] == -1.0);

    afnio::Rng rng(7);
    auto xr = testutil::random_tensor<double>({2, 3, 3}, rng);
    auto br = testutil::random_tensor<double>({2}, rng);
    br.set_requires_grad();
    auto res = grad_check([&] { return afnio::mean_all(afnio::mul(afnio::bias_add(xr, br), xr)); }, br);
    CHECK(res.max_rel_err < 1e-7);
}

TEST_CASE("gelu values and gradient") {
    Tensor<double> x({3}, {0.0, 1.0, 10.0});
    auto y = afnio::gelu(x);
    CHECK(y.value()[0] == 0.0);
    // x*Phi(x) at 1 from an erf series evaluation
    CHECK(y.value()[1] == doctest::Approx(0.841345).epsilon(1e-5));
    CHECK(y.value()[2] == doctest::Approx(10.0).epsilon(1e-6));

    afnio::Rng rng(3);
    auto xr = testutil::random_tensor<double>({4, 4}, rng, -2.0, 2.0);
    xr.set_requires_grad();
    auto res = grad_check([&] { return afnio::sum_all(afnio::gelu(xr)); }, xr);
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("backward rejects non-scalar and double invocation") {
    Tensor<double> x({2}, {3.0, 4.0});
    x.set_requires_grad();
    auto y = afnio::mul(x, x);
    CHECK_THROWS_AS(afnio::backward(y), std::invalid_argument);
    auto loss = afnio::sum_all(y);
    afnio::backward(loss);
    CHECK(x.grad()[0] == 6.0);
    CHECK(x.grad()[1] == 8.0);
    CHECK_THROWS_AS(afnio::backward(loss), std::runtime_error);
}

TEST_CASE("gradient of unrelated tensor stays zero") {
    Tensor<double> x({2}, {1.0, 2.0});
    Tensor<double> t({2}, {5.0, 6.0});
    x.set_requires_grad();
    t.set_requires_grad();
    auto loss = afnio::sum_all(afnio::mul(x, x));
    afnio::backward(loss);
    CHECK_FALSE(t.has_grad());
}

TEST_CASE("gradients accumulate across multiple uses and reset explicitly") {
    Tensor<double> x({1}, {2.0});
    x.set_requires_grad();
    auto loss = afnio::sum_all(afnio::add(afnio::mul(x, x), x));  // x^2 + x
    afnio::backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(5.0));
    auto loss2 = afnio::sum_all(x);
    afnio::backward(loss2);
    CHECK(x.grad()[0] == doctest::Approx(6.0));  // accumulates
    x.zero_grad();
    CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("linearity: backward of a*f(x) is exactly a*grad") {
    Tensor<double> x({3}, {0.5, -1.25, 2.0});
    Tensor<double> y({3}, {1.5, 0.25, -3.0});
    x.set_requires_grad();
    const double a = 3.7;
    auto loss = afnio::scalar_mul(afnio::sum_all(afnio::mul(x, y)), a);
    afnio::backward(loss);
    for (int i = 0; i < 3; ++i) CHECK(x.grad()[static_cast<size_t>(i)] == a * y.value()[static_cast<size_t>(i)]);
}

TEST_CASE("no-grad mode records nothing") {
    Tensor<double> x({2}, {1.0, 2.0});
    x.set_requires_grad();
    afnio::Tensor<double> y;
    {
        afnio::NoGradGuard ng;
        y = afnio::mul(x, x);
    }
    CHECK_FALSE(y.requires_grad());
}

TEST_CASE("softmax0, sigmoid, relu, abs gradients") {
    afnio::Rng rng(11);
    auto x = testutil::random_tensor<double>({4, 3, 3}, rng, -1.5, 1.5);
    x.set_requires_grad();
    auto w = testutil::random_tensor<double>({4, 3, 3}, rng);
    auto res = grad_check([&] { return afnio::mean_all(afnio::mul(afnio::softmax0(x), w)); }, x);
    CHECK(res.max_rel_err < 1e-6);

    x.zero_grad();
    res = grad_check([&] { return afnio::mean_all(afnio::mul(afnio::sigmoid(x), w)); }, x);
    CHECK(res.max_rel_err < 1e-6);

    // keep values away from the relu/abs kinks
    auto x2 = testutil::random_tensor<double>({3, 3}, rng, 0.2, 1.8);
    x2.set_requires_grad();
    res = grad_check([&] { return afnio::sum_all(afnio::relu(x2)); }, x2);
    CHECK(res.max_rel_err < 1e-7);
    x2.zero_grad();
    res = grad_check([&] { return afnio::sum_all(afnio::abs_val(x2)); }, x2);
    CHECK(res.max_rel_err < 1e-7);
}

TEST_CASE("softmax0 rows sum to one") {
    afnio::Rng rng(5);
    auto x = testutil::random_tensor<double>({6, 2, 2}, rng, -3.0, 3.0);
    auto y = afnio::softmax0(x);
    for (int i = 0; i < 4; ++i) {
        double s = 0;
        for (int k = 0; k < 6; ++k) s += y.value()[static_cast<size_t>(k * 4 + i)];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("concat0 and scale_by gradients") {
    afnio::Rng rng(13);
    auto a = testutil::random_tensor<double>({2, 2, 2}, rng);
    auto b = testutil::random_tensor<double>({3, 2, 2}, rng);
    a.set_requires_grad();
    b.set_requires_grad();
    auto y = afnio::concat0(a, b);
    CHECK(y.shape() == std::vector<int>{5, 2, 2});
    auto res = grad_check([&] { return afnio::mean_all(afnio::mul(afnio::concat0(a, b), afnio::concat0(a, b))); }, b);
    CHECK(res.max_rel_err < 1e-6);

    auto s = Tensor<double>::scalar(1.3);
    s.set_requires_grad();
    auto res2 = grad_check([&] { return afnio::sum_all(afnio::scale_by(a, s)); }, s);
    CHECK(res2.max_rel_err < 1e-7);
}

TEST_CASE("determinism: identical seeds give bit-identical forward/backward") {
    auto run = [] {
        afnio::Rng rng(99);
        auto x = testutil::random_tensor<double>({3, 5, 5}, rng);
        auto k = testutil::random_tensor<double>({2, 3, 3, 3}, rng);
        x.set_requires_grad();
        k.set_requires_grad();
        auto loss = afnio::mean_all(afnio::gelu(afnio::conv2d(x, k, 1, 1)));
        afnio::backward(loss);
        std::vector<double> out = {loss.item()};
        out.insert(out.end(), x.grad().begin(), x.grad().end());
        out.insert(out.end(), k.grad().begin(), k.grad().end());
        return out;
    };
    CHECK(run() == run());
}
