#pragma once

#include <array>
#include <string>

#include "afnio/conv.hpp"
#include "afnio/rng.hpp"

namespace afnio {

struct AdaCoFConfig {
    int channels = 1;
    int kernel_size = 5;  // F, odd
    int dilation = 1;
    std::array<int, 3> unet_widths{32, 64, 96};
    int feature_channels = 64;

    void validate() const {
        if (channels < 1) throw std::invalid_argument("AdaCoFConfig: channels must be >= 1");
        if (kernel_size < 1 || kernel_size % 2 == 0)
            throw std::invalid_argument("AdaCoFConfig: kernel size F must be odd, got " + std::to_string(kernel_size));
        if (dilation < 1) throw std::invalid_argument("AdaCoFConfig: dilation must be >= 1");
        for (int w : unet_widths)
            if (w < 1) throw std::invalid_argument("AdaCoFConfig: widths must be >= 1");
        if (feature_channels < 1) throw std::invalid_argument("AdaCoFConfig: feature channels must be >= 1");
    }
};

/// Per-pixel warp parameters for one source frame: softmax-normalized
/// kernel weights and vertical/horizontal offsets in pixels, all [F*F,H,W].
template <typename T>
struct AdaCoFField {
    Tensor<T> weights;
    Tensor<T> alpha;  // vertical offsets
    Tensor<T> beta;   // horizontal offsets
};

/// out(r,c) = sum_k weights_k(r,c) * I(r + d*i_k + alpha_k(r,c),
///                                     c + d*j_k + beta_k(r,c))
/// with (i_k, j_k) the F x F grid centered at 0 and bilinear sampling at
/// fractional coordinates; samples outside the image read 0.
template <typename T>
Tensor<T> adacof_warp(const Tensor<T>& I, const AdaCoFField<T>& f, int F, int dilation) {
    if (F < 1 || F % 2 == 0) throw std::invalid_argument("adacof_warp: F must be odd, got " + std::to_string(F));
    if (dilation < 1) throw std::invalid_argument("adacof_warp: dilation must be >= 1");
    if (I.rank() != 3) throw std::invalid_argument("adacof_warp: frame must be [C,H,W], got " + shape_str(I.shape()));
    const int C = I.dim(0), H = I.dim(1), W = I.dim(2), K = F * F;
    std::vector<int> fshape{K, H, W};
    if (f.weights.shape() != fshape || f.alpha.shape() != fshape || f.beta.shape() != fshape)
        throw std::invalid_argument("adacof_warp: fields must be " + shape_str(fshape) + ", got weights " +
                                    shape_str(f.weights.shape()));

    const int half = (F - 1) / 2;
    const int64_t hw = static_cast<int64_t>(H) * W;

    auto sample_plane = [H, W](const T* plane, int r0, int c0) -> T {
        if (r0 < 0 || r0 >= H || c0 < 0 || c0 >= W) return T(0);
        return plane[static_cast<int64_t>(r0) * W + c0];
    };

    std::vector<T> out(static_cast<size_t>(C) * hw, T(0));
    {
        const T* pw = f.weights.data();
        const T* pa = f.alpha.data();
        const T* pb = f.beta.data();
        const T* px = I.data();
        for (int k = 0; k < K; ++k) {
            int di = (k / F - half) * dilation;
            int dj = (k % F - half) * dilation;
            for (int r = 0; r < H; ++r)
                for (int c = 0; c < W; ++c) {
                    int64_t idx = static_cast<int64_t>(r) * W + c;
                    T w = pw[k * hw + idx];
                    T rr = static_cast<T>(r + di) + pa[k * hw + idx];
                    T cc = static_cast<T>(c + dj) + pb[k * hw + idx];
                    int r0 = static_cast<int>(std::floor(rr));
                    int c0 = static_cast<int>(std::floor(cc));
                    T fr = rr - static_cast<T>(r0);
                    T fc = cc - static_cast<T>(c0);
                    for (int ch = 0; ch < C; ++ch) {
                        const T* plane = px + static_cast<int64_t>(ch) * hw;
                        T v00 = sample_plane(plane, r0, c0);
                        T v01 = sample_plane(plane, r0, c0 + 1);
                        T v10 = sample_plane(plane, r0 + 1, c0);
                        T v11 = sample_plane(plane, r0 + 1, c0 + 1);
                        T v = (T(1) - fr) * ((T(1) - fc) * v00 + fc * v01) + fr * ((T(1) - fc) * v10 + fc * v11);
                        out[static_cast<size_t>(ch * hw + idx)] += w * v;
                    }
                }
        }
    }

    return make_op<T>({C, H, W}, std::move(out), {I, f.weights, f.alpha, f.beta},
                      [C, H, W, K, F, half, dilation, hw, sample_plane](TensorNode<T>& o) {
        auto& pI = o.parents[0];
        auto& pW = o.parents[1];
        auto& pA = o.parents[2];
        auto& pB = o.parents[3];
        const bool nI = pI->requires_grad, nW = pW->requires_grad, nA = pA->requires_grad, nB = pB->requires_grad;
        if (nI) pI->ensure_grad();
        if (nW) pW->ensure_grad();
        if (nA) pA->ensure_grad();
        if (nB) pB->ensure_grad();
        const T* px = pI->value.data();
        const T* pw = pW->value.data();
        const T* pa = pA->value.data();
        const T* pb = pB->value.data();
        auto scatter = [H, W](T* plane, int r0, int c0, T v) {
            if (r0 < 0 || r0 >= H || c0 < 0 || c0 >= W) return;
            plane[static_cast<int64_t>(r0) * W + c0] += v;
        };
        for (int k = 0; k < K; ++k) {
            int di = (k / F - half) * dilation;
            int dj = (k % F - half) * dilation;
            for (int r = 0; r < H; ++r)
                for (int c = 0; c < W; ++c) {
                    int64_t idx = static_cast<int64_t>(r) * W + c;
                    T w = pw[k * hw + idx];
                    T rr = static_cast<T>(r + di) + pa[k * hw + idx];
                    T cc = static_cast<T>(c + dj) + pb[k * hw + idx];
                    int r0 = static_cast<int>(std::floor(rr));
                    int c0 = static_cast<int>(std::floor(cc));
                    T fr = rr - static_cast<T>(r0);
                    T fc = cc - static_cast<T>(c0);
                    T dw = T(0), da = T(0), db = T(0);
                    for (int ch = 0; ch < C; ++ch) {
                        const T* plane = px + static_cast<int64_t>(ch) * hw;
                        T g = o.grad[static_cast<size_t>(ch * hw + idx)];
                        T v00 = sample_plane(plane, r0, c0);
                        T v01 = sample_plane(plane, r0, c0 + 1);
                        T v10 = sample_plane(plane, r0 + 1, c0);
                        T v11 = sample_plane(plane, r0 + 1, c0 + 1);
                        T v = (T(1) - fr) * ((T(1) - fc) * v00 + fc * v01) + fr * ((T(1) - fc) * v10 + fc * v11);
                        dw += g * v;
                        // derivative of the bilinear sample w.r.t. its coordinates
                        da += g * w * ((T(1) - fc) * (v10 - v00) + fc * (v11 - v01));
                        db += g * w * ((T(1) - fr) * (v01 - v00) + fr * (v11 - v10));
                        if (nI) {
                            T* gp = pI->grad.data() + static_cast<int64_t>(ch) * hw;
                            T gw = g * w;
                            scatter(gp, r0, c0, gw * (T(1) - fr) * (T(1) - fc));
                            scatter(gp, r0, c0 + 1, gw * (T(1) - fr) * fc);
                            scatter(gp, r0 + 1, c0, gw * fr * (T(1) - fc));
                            scatter(gp, r0 + 1, c0 + 1, gw * fr * fc);
                        }
                    }
                    if (nW) pW->grad[static_cast<size_t>(k * hw + idx)] += dw;
                    if (nA) pA->grad[static_cast<size_t>(k * hw + idx)] += da;
                    if (nB) pB->grad[static_cast<size_t>(k * hw + idx)] += db;
                }
        }
    });
}

/// The adaptive-flow pathway: a three-level U-Net over the stacked frames,
/// seven small heads (weight/alpha/beta per frame plus an occlusion mask),
/// and the occlusion-blended pair of warps.
template <typename T>
struct AdaCoFNet {
    struct Conv {
        Tensor<T> w, b;
    };

    AdaCoFConfig cfg;
    Conv enc_in;             // 2C -> w0
    std::array<Conv, 3> down;  // w0->w1, w1->w2, w2->w2, each stride 2
    std::array<Conv, 3> up;    // post-upsample convs
    std::array<Conv, 3> merge;  // after skip concatenation
    struct Head {
        Conv hidden, out;
    };
    std::array<Head, 6> heads;  // weight0, alpha0, beta0, weight1, alpha1, beta1
    Head occ_head;

    struct Fields {
        AdaCoFField<T> f0, f1;
        Tensor<T> occlusion;  // [1,H,W] in [0,1]
    };

    AdaCoFNet(const AdaCoFConfig& config, Rng& rng) : cfg(config) {
        cfg.validate();
        const auto [w0, w1, w2] = std::tuple{cfg.unet_widths[0], cfg.unet_widths[1], cfg.unet_widths[2]};
        const int fc = cfg.feature_channels;
        const int K = cfg.kernel_size * cfg.kernel_size;
        enc_in = make_conv(w0, 2 * cfg.channels, 3, rng);
        down = {make_conv(w1, w0, 3, rng), make_conv(w2, w1, 3, rng), make_conv(w2, w2, 3, rng)};
        up = {make_conv(w2, w2, 3, rng), make_conv(w1, w1, 3, rng), make_conv(w0, w0, 3, rng)};
        merge = {make_conv(w1, 2 * w2, 3, rng), make_conv(w0, 2 * w1, 3, rng), make_conv(fc, 2 * w0, 3, rng)};
        for (auto& h : heads) h = {make_conv(fc, fc, 3, rng), make_conv(K, fc, 3, rng)};
        occ_head = {make_conv(fc, fc, 3, rng), make_conv(1, fc, 3, rng)};
    }

    /// Feature map at input resolution from the strided encoder/decoder
    /// with skip connections; ReLU activations throughout.
    Tensor<T> unet_features(const Tensor<T>& I0, const Tensor<T>& I1) const {
        if (I0.shape() != I1.shape())
            throw std::invalid_argument("unet_features: frame shapes differ, " + shape_str(I0.shape()) + " vs " +
                                        shape_str(I1.shape()));
        if (I0.rank() != 3 || I0.dim(1) % 8 != 0 || I0.dim(2) % 8 != 0)
            throw std::invalid_argument("unet_features: sides of " + shape_str(I0.shape()) +
                                        " must be divisible by 8");
        auto cv = [](const Tensor<T>& x, const Conv& c, int stride) {
            return relu(bias_add(conv2d(x, c.w, stride, 1), c.b));
        };
        auto e0 = cv(concat0(I0, I1), enc_in, 1);
        auto e1 = cv(e0, down[0], 2);
        auto e2 = cv(e1, down[1], 2);
        auto e3 = cv(e2, down[2], 2);
        auto d2 = cv(resample(e3, 2, ResampleMode::nearest_up), up[0], 1);
        auto m2 = cv(concat0(d2, e2), merge[0], 1);
        auto d1 = cv(resample(m2, 2, ResampleMode::nearest_up), up[1], 1);
        auto m1 = cv(concat0(d1, e1), merge[1], 1);
        auto d0 = cv(resample(m1, 2, ResampleMode::nearest_up), up[2], 1);
        return cv(concat0(d0, e0), merge[2], 1);
    }

    /// Weight fields end in a softmax over the F*F axis, the occlusion head
    /// in a sigmoid; offset heads are unbounded.
    Fields kernel_subnets(const Tensor<T>& features) const {
        auto run = [&](const Head& h) {
            auto hid = relu(bias_add(conv2d(features, h.hidden.w, 1, 1), h.hidden.b));
            return bias_add(conv2d(hid, h.out.w, 1, 1), h.out.b);
        };
        Fields f;
        f.f0 = {softmax0(run(heads[0])), run(heads[1]), run(heads[2])};
        f.f1 = {softmax0(run(heads[3])), run(heads[4]), run(heads[5])};
        f.occlusion = sigmoid(run(occ_head));
        return f;
    }

    /// occlusion .* warp(I0) + (1 - occlusion) .* warp(I1)
    Tensor<T> forward(const Tensor<T>& I0, const Tensor<T>& I1) const {
        Fields f = kernel_subnets(unet_features(I0, I1));
        auto warped0 = adacof_warp(I0, f.f0, cfg.kernel_size, cfg.dilation);
        auto warped1 = adacof_warp(I1, f.f1, cfg.kernel_size, cfg.dilation);
        return add(mul_bcast_channel(warped0, f.occlusion), mul_bcast_channel(warped1, one_minus(f.occlusion)));
    }

    void named_params(std::vector<std::pair<std::string, Tensor<T>>>& out) const {
        auto put = [&out](const std::string& name, const Conv& c) {
            out.emplace_back(name + ".w", c.w);
            out.emplace_back(name + ".b", c.b);
        };
        put("ada.enc_in", enc_in);
        for (size_t i = 0; i < 3; ++i) put("ada.down" + std::to_string(i), down[i]);
        for (size_t i = 0; i < 3; ++i) put("ada.up" + std::to_string(i), up[i]);
        for (size_t i = 0; i < 3; ++i) put("ada.merge" + std::to_string(i), merge[i]);
        static const char* head_names[6] = {"weight0", "alpha0", "beta0", "weight1", "alpha1", "beta1"};
        for (size_t i = 0; i < 6; ++i) {
            put("ada.head." + std::string(head_names[i]) + ".hidden", heads[i].hidden);
            put("ada.head." + std::string(head_names[i]) + ".out", heads[i].out);
        }
        put("ada.head.occlusion.hidden", occ_head.hidden);
        put("ada.head.occlusion.out", occ_head.out);
    }

    static int64_t census(const AdaCoFConfig& c) {
        auto conv_params = [](int64_t cout, int64_t cin, int64_t k) { return cout * cin * k * k + cout; };
        int64_t w0 = c.unet_widths[0], w1 = c.unet_widths[1], w2 = c.unet_widths[2];
        int64_t fc = c.feature_channels;
        int64_t K = static_cast<int64_t>(c.kernel_size) * c.kernel_size;
        int64_t total = conv_params(w0, 2 * c.channels, 3);
        total += conv_params(w1, w0, 3) + conv_params(w2, w1, 3) + conv_params(w2, w2, 3);
        total += conv_params(w2, w2, 3) + conv_params(w1, w1, 3) + conv_params(w0, w0, 3);
        total += conv_params(w1, 2 * w2, 3) + conv_params(w0, 2 * w1, 3) + conv_params(fc, 2 * w0, 3);
        total += 6 * (conv_params(fc, fc, 3) + conv_params(K, fc, 3));
        total += conv_params(fc, fc, 3) + conv_params(1, fc, 3);
        return total;
    }

private:
    Conv make_conv(int cout, int cin, int k, Rng& rng) {
        // Kaiming-uniform for the ReLU subnetwork
        double limit = std::sqrt(6.0 / (static_cast<double>(cin) * k * k));
        Conv c{Tensor<T>({cout, cin, k, k}), Tensor<T>({cout})};
        for (auto& v : c.w.value()) v = static_cast<T>(rng.uniform(-limit, limit));
        c.w.set_requires_grad(true);
        c.b.set_requires_grad(true);
        return c;
    }
};

}  // namespace afnio
