#pragma once

#include <memory>

#include "afnio/adacof.hpp"
#include "afnio/nio.hpp"

namespace afnio {

struct BlendWeights {
    double w1 = 0.01;  // operator pathway
    double w2 = 1.0;   // adaptive-flow pathway
    bool trainable = true;
};

enum class Pathway { full, nio_only, adacof_only };

inline const char* pathway_name(Pathway p) {
    switch (p) {
        case Pathway::full: return "full";
        case Pathway::nio_only: return "nio";
        case Pathway::adacof_only: return "adacof";
    }
    return "full";
}

inline Pathway pathway_from_name(const std::string& s) {
    if (s == "full") return Pathway::full;
    if (s == "nio") return Pathway::nio_only;
    if (s == "adacof") return Pathway::adacof_only;
    throw std::invalid_argument("unknown pathway '" + s + "' (expected full|nio|adacof)");
}

struct ModelConfig {
    int channels = 1;
    Pathway pathway = Pathway::full;
    NioConfig nio;
    AdaCoFConfig adacof;
    BlendWeights blend;

    void validate() const {
        if (nio.channels != channels || adacof.channels != channels)
            throw std::invalid_argument("ModelConfig: sub-config channel counts disagree");
        if (!std::isfinite(blend.w1) || !std::isfinite(blend.w2))
            throw std::invalid_argument("ModelConfig: blend weights must be finite");
        if (pathway != Pathway::adacof_only) nio.validate();
        if (pathway != Pathway::nio_only) adacof.validate();
    }
};

struct CensusReport {
    int64_t nio = 0;
    int64_t adacof = 0;
    int64_t blend = 0;
    int64_t total() const { return nio + adacof + blend; }
};

/// Exact trainable-scalar count, by pathway, as a pure function of the
/// configuration.
inline CensusReport parameter_census(const ModelConfig& cfg) {
    CensusReport r;
    if (cfg.pathway != Pathway::adacof_only) r.nio = NioNet<float>::census(cfg.nio);
    if (cfg.pathway != Pathway::nio_only) r.adacof = AdaCoFNet<float>::census(cfg.adacof);
    if (cfg.pathway == Pathway::full) r.blend = 2;
    return r;
}

/// I_half = w1 * N(I0, I1) + w2 * AdaCoF(I0, I1). The two pathways share
/// no parameters; w1 and w2 are trainable scalars.
template <typename T>
struct AdaFNIO {
    ModelConfig cfg;
    std::unique_ptr<NioNet<T>> nio;
    std::unique_ptr<AdaCoFNet<T>> ada;
    Tensor<T> w1, w2;

    AdaFNIO(const ModelConfig& config, Rng& rng) : cfg(config) {
        cfg.nio.channels = cfg.channels;
        cfg.adacof.channels = cfg.channels;
        cfg.validate();
        if (cfg.pathway != Pathway::adacof_only) nio = std::make_unique<NioNet<T>>(cfg.nio, rng);
        if (cfg.pathway != Pathway::nio_only) ada = std::make_unique<AdaCoFNet<T>>(cfg.adacof, rng);
        if (cfg.pathway == Pathway::full) {
            w1 = Tensor<T>::scalar(static_cast<T>(cfg.blend.w1));
            w2 = Tensor<T>::scalar(static_cast<T>(cfg.blend.w2));
            w1.set_requires_grad(cfg.blend.trainable);
            w2.set_requires_grad(cfg.blend.trainable);
        }
    }

    Tensor<T> forward(const Tensor<T>& I0, const Tensor<T>& I1) const {
        switch (cfg.pathway) {
            case Pathway::nio_only:
                return nio->forward(I0, I1);
            case Pathway::adacof_only:
                return ada->forward(I0, I1);
            case Pathway::full:
                break;
        }
        Tensor<T> a, b;
        try {
            a = nio->forward(I0, I1);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("operator pathway: " + std::string(e.what()));
        }
        try {
            b = ada->forward(I0, I1);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("adacof pathway: " + std::string(e.what()));
        }
        return add(scale_by(a, w1), scale_by(b, w2));
    }

    std::vector<std::pair<std::string, Tensor<T>>> named_params() const {
        std::vector<std::pair<std::string, Tensor<T>>> out;
        if (nio) nio->named_params(out);
        if (ada) ada->named_params(out);
        if (cfg.pathway == Pathway::full) {
            out.emplace_back("blend.w1", w1);
            out.emplace_back("blend.w2", w2);
        }
        return out;
    }

    std::vector<Tensor<T>> params() const {
        std::vector<Tensor<T>> out;
        for (auto& [name, t] : named_params()) out.push_back(t);
        return out;
    }

    void set_trainable(bool on) {
        auto np = named_params();
        for (auto& [name, t] : np) {
            bool want = on && (name.rfind("blend.", 0) != 0 || cfg.blend.trainable);
            t.set_requires_grad(want);
        }
    }
};

}  // namespace afnio
