#pragma once

#include <string>
#include <vector>

#include "afnio/tensor.hpp"

namespace afnio {

template <typename T>
struct AdamConfig {
    T lr = static_cast<T>(1e-4);
    T beta1 = static_cast<T>(0.9);
    T beta2 = static_cast<T>(0.999);
    T eps = static_cast<T>(1e-8);
    T weight_decay = static_cast<T>(1e-4);
};

/// Adam with bias correction. Weight decay is decoupled: parameters are
/// scaled by (1 - lr*wd) before the moment update is applied.
template <typename T>
class Adam {
public:
    Adam(std::vector<std::pair<std::string, Tensor<T>>> params, AdamConfig<T> cfg)
        : cfg_(cfg), params_(std::move(params)) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(static_cast<size_t>(params_[i].second.numel()), T(0));
            v_[i].assign(static_cast<size_t>(params_[i].second.numel()), T(0));
        }
    }

    void step() {
        ++t_;
        T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(t_));
        T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(t_));
        T decay = T(1) - cfg_.lr * cfg_.weight_decay;
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& [name, p] = params_[i];
            if (!p.requires_grad()) continue;
            if (!p.has_grad()) throw std::runtime_error("adam_step: parameter '" + name + "' has no gradient");
            auto& val = p.value();
            const auto& g = p.grad();
            auto& m = m_[i];
            auto& v = v_[i];
            for (size_t j = 0; j < val.size(); ++j) {
                val[j] *= decay;
                m[j] = cfg_.beta1 * m[j] + (T(1) - cfg_.beta1) * g[j];
                v[j] = cfg_.beta2 * v[j] + (T(1) - cfg_.beta2) * g[j] * g[j];
                T mhat = m[j] / bc1;
                T vhat = v[j] / bc2;
                val[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

    void zero_grad() {
        for (auto& [name, p] : params_) p.zero_grad();
    }

    int64_t step_count() const { return t_; }
    void set_step_count(int64_t t) { t_ = t; }
    const AdamConfig<T>& config() const { return cfg_; }
    size_t size() const { return params_.size(); }
    const std::string& name(size_t i) const { return params_[i].first; }
    std::vector<T>& first_moment(size_t i) { return m_[i]; }
    std::vector<T>& second_moment(size_t i) { return v_[i]; }
    const std::vector<T>& first_moment(size_t i) const { return m_[i]; }
    const std::vector<T>& second_moment(size_t i) const { return v_[i]; }

private:
    AdamConfig<T> cfg_;
    std::vector<std::pair<std::string, Tensor<T>>> params_;
    std::vector<std::vector<T>> m_;
    std::vector<std::vector<T>> v_;
    int64_t t_ = 0;
};

}  // namespace afnio
