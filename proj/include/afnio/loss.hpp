#pragma once

#include <memory>

#include "afnio/conv.hpp"
#include "afnio/rng.hpp"

namespace afnio {

/// Mean absolute difference over all elements.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    check_same_shape(pred, target, "l1_loss");
    return mean_all(abs_val(sub(pred, target)));
}

/// Mean squared difference over all elements.
template <typename T>
Tensor<T> l2_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    check_same_shape(pred, target, "l2_loss");
    auto d = sub(pred, target);
    return mean_all(mul(d, d));
}

/// Pluggable feature extractor for the perceptual term. Implementations
/// must be differentiable through the tensor ops.
template <typename T>
struct FeatureExtractor {
    virtual ~FeatureExtractor() = default;
    virtual Tensor<T> operator()(const Tensor<T>& x) const = 0;
};

template <typename T>
struct IdentityExtractor : FeatureExtractor<T> {
    Tensor<T> operator()(const Tensor<T>& x) const override { return x; }
};

/// Fixed-seed random convolutional stack; a stand-in feature space so the
/// combined-loss path can run without pretrained weights.
template <typename T>
struct RandomConvExtractor : FeatureExtractor<T> {
    Tensor<T> k1, b1, k2, b2;

    explicit RandomConvExtractor(int channels, uint64_t seed = 2202) {
        Rng rng(seed);
        const int hidden = 8;
        auto fill = [&rng](Tensor<T>& t, double limit) {
            for (auto& v : t.value()) v = static_cast<T>(rng.uniform(-limit, limit));
        };
        k1 = Tensor<T>({hidden, channels, 3, 3});
        b1 = Tensor<T>({hidden});
        k2 = Tensor<T>({hidden, hidden, 3, 3});
        b2 = Tensor<T>({hidden});
        fill(k1, std::sqrt(2.0 / (channels * 9.0)));
        fill(b1, 0.1);
        fill(k2, std::sqrt(2.0 / (hidden * 9.0)));
        fill(b2, 0.1);
    }

    Tensor<T> operator()(const Tensor<T>& x) const override {
        auto h = relu(bias_add(conv2d(x, k1, 1, 1), b1));
        return bias_add(conv2d(h, k2, 1, 1), b2);
    }
};

/// L1 plus 0.01 times the mean-absolute feature-space difference; reduces
/// to plain L1 when no extractor is supplied.
template <typename T>
Tensor<T> combined_loss(const Tensor<T>& pred, const Tensor<T>& target, const FeatureExtractor<T>* feat = nullptr) {
    auto base = l1_loss(pred, target);
    if (!feat) return base;
    auto fp = (*feat)(pred);
    auto ft = (*feat)(target);
    auto vgg_term = mean_all(abs_val(sub(fp, ft)));
    return add(base, scalar_mul(vgg_term, T(0.01)));
}

}  // namespace afnio
