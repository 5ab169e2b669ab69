#pragma once

#include <array>
#include <optional>
#include <string>

#include "afnio/spectral.hpp"

namespace afnio {

/// Geometry of the operator pathway: a shared token convolution, four
/// contraction levels with per-level retained modes, a mirrored expansion,
/// and a final projection back to frame channels.
struct NioConfig {
    int channels = 1;  // frame channels (1 grayscale, 3 color)
    int base_resolution = 64;
    int token_kernel = 3;
    int token_stride = 1;
    int lifting_channels = 16;
    std::array<int, 4> level_channels{16, 32, 32, 64};
    std::array<std::array<int, 2>, 4> level_modes{{{10, 10}, {5, 5}, {3, 3}, {2, 2}}};
    bool small = false;  // conv-only decoder (4 spectral layers instead of 8)

    /// Configuration mirroring the published architecture; constructible
    /// for shape checks, far too large to train here.
    static NioConfig paper_scale() {
        NioConfig c;
        c.channels = 3;
        c.base_resolution = 256;
        c.lifting_channels = 32;
        c.level_channels = {32, 64, 64, 128};
        c.level_modes = {{{42, 42}, {21, 21}, {10, 10}, {5, 5}}};
        return c;
    }

    void validate() const {
        if (channels < 1) throw std::invalid_argument("NioConfig: channels must be >= 1");
        if (token_kernel < 1 || token_kernel % 2 == 0)
            throw std::invalid_argument("NioConfig: token kernel must be odd and positive");
        if (token_stride < 1) throw std::invalid_argument("NioConfig: token stride must be >= 1");
        if (lifting_channels < 1) throw std::invalid_argument("NioConfig: lifting channels must be >= 1");
        for (int w : level_channels)
            if (w < 1) throw std::invalid_argument("NioConfig: level channels must be >= 1");
        int side = token_side(base_resolution);
        if (side % 16 != 0)
            throw std::invalid_argument("NioConfig: token map side " + std::to_string(side) +
                                        " must be divisible by 16");
        for (int i = 0; i < 4; ++i) {
            int s = side >> i;
            check_mode_cap(level_modes[static_cast<size_t>(i)][0], level_modes[static_cast<size_t>(i)][1], s, s);
        }
    }

    int token_side(int frame_side) const { return (frame_side - 1) / token_stride + 1; }

    bool axis_admissible(int side, int axis, std::string* why = nullptr) const {
        int tok = token_side(side);
        if (side % token_stride != 0 || tok % 16 != 0) {
            if (why) *why = "side " + std::to_string(side) + " must give a token side divisible by 16";
            return false;
        }
        for (int i = 0; i < 4; ++i) {
            int m = level_modes[static_cast<size_t>(i)][static_cast<size_t>(axis)];
            if (2 * m > (tok >> i)) {
                if (why)
                    *why = "retained modes " + std::to_string(m) + " exceed the cap at level " + std::to_string(i) +
                           " for side " + std::to_string(side);
                return false;
            }
        }
        return true;
    }

    bool admissible(int H, int W, std::string* why = nullptr) const {
        return axis_admissible(H, 0, why) && axis_admissible(W, 1, why);
    }

    /// Smallest (H', W') >= (H, W) the level schedule accepts.
    std::pair<int, int> suggest_admissible(int H, int W) const {
        auto grow = [&](int side, int axis) {
            int s = side;
            for (int guard = 0; guard < 16384 && !axis_admissible(s, axis); ++guard) ++s;
            return s;
        };
        return {grow(H, 0), grow(W, 1)};
    }
};

/// The neural-operator interpolation pathway.
template <typename T>
struct NioNet {
    struct EncStage {
        SpectralWeights<T> R;
        Tensor<T> pw_w, pw_b;      // pointwise branch of the operator layer
        Tensor<T> down_w, down_b;  // stride-2 local conv
    };
    struct DecStage {
        Tensor<T> up_w, up_b;  // local conv after nearest-neighbor upsampling
        std::optional<SpectralWeights<T>> R;
        Tensor<T> pw_w, pw_b;
    };

    NioConfig cfg;
    Tensor<T> token_w, token_b;
    std::vector<EncStage> enc;
    std::vector<DecStage> dec;
    Tensor<T> proj_w, proj_b;
    Tensor<T> wnio_w;  // 1x1 output operator, identity at init

    NioNet(const NioConfig& config, Rng& rng) : cfg(config) {
        cfg.validate();
        const int C = cfg.channels, L = cfg.lifting_channels, k = cfg.token_kernel;
        // Signal-preserving initialization: every convolution starts as a
        // scaled channel-copying stencil plus exploration noise, so the
        // untrained stack already propagates (and roughly averages) its two
        // input frames instead of washing them out. The per-weight movement
        // an Adam run affords is small, so training calibrates a working
        // signal path rather than building one from scratch.
        token_w = pass_through({L, C, k, k}, rng, T(0.5) / static_cast<T>(C));
        token_b = const_param({L}, T(-0.5));  // center [0,1] frames
        int in_ch = L;
        for (int i = 0; i < 4; ++i) {
            // the +2 bias parks the activation in GELU's near-linear region;
            // the following convolution's bias removes the resulting level
            EncStage s{SpectralWeights<T>::init(cfg.level_modes[static_cast<size_t>(i)][0],
                                                cfg.level_modes[static_cast<size_t>(i)][1], in_ch, in_ch, rng),
                       pass_through({in_ch, in_ch, 1, 1}, rng, T(1)), const_param({in_ch}, kGeluBias), Tensor<T>(),
                       Tensor<T>()};
            int out_ch = cfg.level_channels[static_cast<size_t>(i)];
            s.down_w = pass_through({out_ch, in_ch, 3, 3}, rng, T(1));
            s.down_b = const_param({out_ch}, -kGeluLevel);
            enc.push_back(std::move(s));
            in_ch = out_ch;
        }
        for (int i = 0; i < 4; ++i) {
            // decoder level i runs at the spatial size of encoder level 3-i
            int out_ch = i == 3 ? cfg.lifting_channels : cfg.level_channels[static_cast<size_t>(2 - i)];
            DecStage s;
            s.up_w = pass_through({out_ch, in_ch, 3, 3}, rng, T(1));
            s.up_b = const_param({out_ch}, i == 0 ? T(0) : -kGeluLevel);
            if (!cfg.small) {
                s.R = SpectralWeights<T>::init(cfg.level_modes[static_cast<size_t>(3 - i)][0],
                                               cfg.level_modes[static_cast<size_t>(3 - i)][1], out_ch, out_ch, rng);
            }
            s.pw_w = pass_through({out_ch, out_ch, 1, 1}, rng, T(1));
            s.pw_b = const_param({out_ch}, kGeluBias);
            dec.push_back(std::move(s));
            in_ch = out_ch;
        }
        proj_w = pass_through({C, cfg.lifting_channels, 1, 1}, rng, T(1) / static_cast<T>(cfg.lifting_channels));
        proj_b = const_param({C}, T(0.5) - kGeluLevel);  // undo centering and the last level
        wnio_w = Tensor<T>({C, C, 1, 1});
        for (int i = 0; i < C; ++i) wnio_w.value()[static_cast<size_t>(i * C + i)] = T(1);
        wnio_w.set_requires_grad(true);
    }

    /// Shared-weight token extraction: the same convolution is applied to
    /// each frame and the results are summed with one bias. Exactly
    /// symmetric in the two frames.
    Tensor<T> extract_tokens(const Tensor<T>& I0, const Tensor<T>& I1) const {
        if (I0.shape() != I1.shape())
            throw std::invalid_argument("extract_tokens: frame shapes differ, " + shape_str(I0.shape()) + " vs " +
                                        shape_str(I1.shape()));
        int pad = (cfg.token_kernel - 1) / 2;
        auto t0 = conv2d(I0, token_w, cfg.token_stride, pad);
        auto t1 = conv2d(I1, token_w, cfg.token_stride, pad);
        return bias_add(add(t0, t1), token_b);
    }

    /// Four contraction stages: operator layer at the current resolution,
    /// then a stride-2 local convolution halving the spatial size.
    Tensor<T> encode(const Tensor<T>& tokens) const {
        int side_h = tokens.dim(1), side_w = tokens.dim(2);
        if (side_h % 16 != 0 || side_w % 16 != 0)
            throw std::invalid_argument("encode: token map " + shape_str(tokens.shape()) +
                                        " must be divisible by 2 four times");
        Tensor<T> v = tokens;
        for (const auto& s : enc) {
            v = fno_layer(v, s.R, s.pw_w, s.pw_b);
            v = bias_add(conv2d(v, s.down_w, 2, 1), s.down_b);
        }
        return v;
    }

    /// Four expansion stages mirroring encode: nearest-neighbor upsampling,
    /// a local convolution, then the operator layer (conv-only when small).
    /// Ends with the 1x1 projection to frame channels.
    Tensor<T> decode(const Tensor<T>& latent) const {
        Tensor<T> v = latent;
        for (const auto& s : dec) {
            v = resample(v, 2, ResampleMode::nearest_up);
            v = bias_add(conv2d(v, s.up_w, 1, 1), s.up_b);
            if (s.R)
                v = fno_layer(v, *s.R, s.pw_w, s.pw_b);
            else
                v = gelu(bias_add(conv2d(v, s.pw_w, 1, 0), s.pw_b));
        }
        return bias_add(conv2d(v, proj_w, 1, 0), proj_b);
    }

    /// W_NIO * D(E(C_t(I0, I1))): the operator pathway's frame estimate.
    Tensor<T> forward(const Tensor<T>& I0, const Tensor<T>& I1) const {
        std::string why;
        if (I0.rank() != 3 || I0.dim(0) != cfg.channels)
            throw std::invalid_argument("nio_forward: expected [" + std::to_string(cfg.channels) + ",H,W], got " +
                                        shape_str(I0.shape()));
        if (!cfg.admissible(I0.dim(1), I0.dim(2), &why)) {
            auto [h2, w2] = cfg.suggest_admissible(I0.dim(1), I0.dim(2));
            throw std::invalid_argument("nio_forward: inadmissible size " + shape_str(I0.shape()) + " (" + why +
                                        "); nearest admissible is " + std::to_string(h2) + "x" + std::to_string(w2));
        }
        auto out = decode(encode(extract_tokens(I0, I1)));
        if (cfg.token_stride > 1) out = resample(out, cfg.token_stride, ResampleMode::nearest_up);
        return conv2d(out, wnio_w, 1, 0);
    }

    void named_params(std::vector<std::pair<std::string, Tensor<T>>>& out) const {
        out.emplace_back("nio.token.w", token_w);
        out.emplace_back("nio.token.b", token_b);
        for (size_t i = 0; i < enc.size(); ++i) {
            std::string p = "nio.enc" + std::to_string(i) + ".";
            out.emplace_back(p + "spec.re", enc[i].R.re);
            out.emplace_back(p + "spec.im", enc[i].R.im);
            out.emplace_back(p + "pw.w", enc[i].pw_w);
            out.emplace_back(p + "pw.b", enc[i].pw_b);
            out.emplace_back(p + "down.w", enc[i].down_w);
            out.emplace_back(p + "down.b", enc[i].down_b);
        }
        for (size_t i = 0; i < dec.size(); ++i) {
            std::string p = "nio.dec" + std::to_string(i) + ".";
            out.emplace_back(p + "up.w", dec[i].up_w);
            out.emplace_back(p + "up.b", dec[i].up_b);
            if (dec[i].R) {
                out.emplace_back(p + "spec.re", dec[i].R->re);
                out.emplace_back(p + "spec.im", dec[i].R->im);
            }
            out.emplace_back(p + "pw.w", dec[i].pw_w);
            out.emplace_back(p + "pw.b", dec[i].pw_b);
        }
        out.emplace_back("nio.proj.w", proj_w);
        out.emplace_back("nio.proj.b", proj_b);
        out.emplace_back("nio.wnio.w", wnio_w);
    }

    /// Closed-form trainable-parameter count for a configuration.
    static int64_t census(const NioConfig& c) {
        auto conv_params = [](int64_t cout, int64_t cin, int64_t k) { return cout * cin * k * k + cout; };
        int64_t total = conv_params(c.lifting_channels, c.channels, c.token_kernel);
        int64_t in_ch = c.lifting_channels;
        for (int i = 0; i < 4; ++i) {
            int64_t m1 = c.level_modes[static_cast<size_t>(i)][0], m2 = c.level_modes[static_cast<size_t>(i)][1];
            total += 2 * (2 * m1 * m2 * in_ch * in_ch);         // complex spectral weights
            total += conv_params(in_ch, in_ch, 1);              // pointwise branch
            int64_t out_ch = c.level_channels[static_cast<size_t>(i)];
            total += conv_params(out_ch, in_ch, 3);             // downsampling conv
            in_ch = out_ch;
        }
        for (int i = 0; i < 4; ++i) {
            int64_t out_ch = i == 3 ? c.lifting_channels : c.level_channels[static_cast<size_t>(2 - i)];
            total += conv_params(out_ch, in_ch, 3);             // post-upsample conv
            if (!c.small) {
                int64_t m1 = c.level_modes[static_cast<size_t>(3 - i)][0],
                        m2 = c.level_modes[static_cast<size_t>(3 - i)][1];
                total += 2 * (2 * m1 * m2 * out_ch * out_ch);
            }
            total += conv_params(out_ch, out_ch, 1);
            in_ch = out_ch;
        }
        total += conv_params(c.channels, c.lifting_channels, 1);  // projection
        total += static_cast<int64_t>(c.channels) * c.channels;   // output operator, no bias
        return total;
    }

private:
    // Channel-copying stencil of strength `pass` at the kernel center
    // (output channel o reads input channel o mod Cin), plus uniform
    // exploration noise at a fraction of the fan-in scale.
    Tensor<T> pass_through(std::vector<int> shape, Rng& rng, T pass) {
        int cout = shape[0], cin = shape[1], kh = shape[2], kw = shape[3];
        int64_t fan_in = static_cast<int64_t>(cin) * kh * kw;
        double limit = 0.4 * std::sqrt(3.0 / static_cast<double>(fan_in));
        Tensor<T> t(shape);
        for (auto& v : t.value()) v = static_cast<T>(rng.uniform(-limit, limit));
        for (int o = 0; o < cout; ++o)
            t.value()[static_cast<size_t>(((o * cin + o % cin) * kh + kh / 2) * kw + kw / 2)] += pass;
        t.set_requires_grad(true);
        return t;
    }
    Tensor<T> zeros_param(std::vector<int> shape) {
        Tensor<T> t(std::move(shape));
        t.set_requires_grad(true);
        return t;
    }
    Tensor<T> const_param(std::vector<int> shape, T v) {
        Tensor<T> t(std::move(shape), v);
        t.set_requires_grad(true);
        return t;
    }
    static constexpr T kGeluBias = T(2);
    static constexpr T kGeluLevel = T(1.9544997361036416);  // gelu(2)
};

}  // namespace afnio
