#pragma once

#include "afnio/tensor.hpp"

namespace afnio {

namespace detail {

// Shared index arithmetic for the conv kernels. Follows the deep-learning
// convention: cross-correlation, zero padding, no kernel flip.
struct ConvDims {
    int B, Cin, H, W, Cout, KH, KW, stride, pad, OH, OW;
};

inline ConvDims conv_dims(const std::vector<int>& xs, const std::vector<int>& ks, int stride, int pad) {
    if (ks.size() != 4) throw std::invalid_argument("conv2d: kernel must be [Cout,Cin,kH,kW], got " + shape_str(ks));
    if (xs.size() != 3 && xs.size() != 4)
        throw std::invalid_argument("conv2d: input must be [C,H,W] or [B,C,H,W], got " + shape_str(xs));
    ConvDims d{};
    bool batched = xs.size() == 4;
    d.B = batched ? xs[0] : 1;
    d.Cin = xs[batched ? 1 : 0];
    d.H = xs[batched ? 2 : 1];
    d.W = xs[batched ? 3 : 2];
    d.Cout = ks[0];
    d.KH = ks[2];
    d.KW = ks[3];
    d.stride = stride;
    d.pad = pad;
    if (ks[1] != d.Cin)
        throw std::invalid_argument("conv2d: channel mismatch, input has " + std::to_string(d.Cin) +
                                    " channels but kernel expects " + std::to_string(ks[1]));
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    if (pad < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
    if (d.KH > d.H + 2 * pad || d.KW > d.W + 2 * pad)
        throw std::invalid_argument("conv2d: kernel " + shape_str(ks) + " exceeds padded input " + shape_str(xs));
    d.OH = (d.H + 2 * pad - d.KH) / stride + 1;
    d.OW = (d.W + 2 * pad - d.KW) / stride + 1;
    return d;
}

// For fixed kernel tap offset u, the output rows whose input row stays in
// bounds: oh*stride - pad + u in [0, H).
inline void tap_range(int span, int out_span, int stride, int pad, int u, int& lo, int& hi) {
    lo = 0;
    if (pad > u) lo = (pad - u + stride - 1) / stride;
    int num = span - 1 + pad - u;
    hi = num < 0 ? -1 : num / stride;
    if (hi > out_span - 1) hi = out_span - 1;
}

template <typename T>
void conv_forward(const T* X, const T* K, T* Y, const ConvDims& d) {
    for (int b = 0; b < d.B; ++b)
        for (int oc = 0; oc < d.Cout; ++oc) {
            T* out_base = Y + (static_cast<int64_t>(b) * d.Cout + oc) * d.OH * d.OW;
            for (int ic = 0; ic < d.Cin; ++ic) {
                const T* x_base = X + (static_cast<int64_t>(b) * d.Cin + ic) * d.H * d.W;
                const T* k_base = K + ((static_cast<int64_t>(oc) * d.Cin + ic) * d.KH) * d.KW;
                for (int u = 0; u < d.KH; ++u) {
                    int oh_lo, oh_hi;
                    tap_range(d.H, d.OH, d.stride, d.pad, u, oh_lo, oh_hi);
                    for (int v = 0; v < d.KW; ++v) {
                        T w = k_base[u * d.KW + v];
                        int ow_lo, ow_hi;
                        tap_range(d.W, d.OW, d.stride, d.pad, v, ow_lo, ow_hi);
                        for (int oh = oh_lo; oh <= oh_hi; ++oh) {
                            int ih = oh * d.stride - d.pad + u;
                            const T* xrow = x_base + static_cast<int64_t>(ih) * d.W;
                            T* orow = out_base + static_cast<int64_t>(oh) * d.OW;
                            int iw = ow_lo * d.stride - d.pad + v;
                            for (int ow = ow_lo; ow <= ow_hi; ++ow, iw += d.stride) orow[ow] += w * xrow[iw];
                        }
                    }
                }
            }
        }
}

template <typename T>
void conv_backward(const T* X, const T* K, const T* G, T* dX, T* dK, const ConvDims& d) {
    for (int b = 0; b < d.B; ++b)
        for (int oc = 0; oc < d.Cout; ++oc) {
            const T* g_base = G + (static_cast<int64_t>(b) * d.Cout + oc) * d.OH * d.OW;
            for (int ic = 0; ic < d.Cin; ++ic) {
                const T* x_base = X + (static_cast<int64_t>(b) * d.Cin + ic) * d.H * d.W;
                T* dx_base = dX ? dX + (static_cast<int64_t>(b) * d.Cin + ic) * d.H * d.W : nullptr;
                const T* k_base = K + ((static_cast<int64_t>(oc) * d.Cin + ic) * d.KH) * d.KW;
                T* dk_base = dK ? dK + ((static_cast<int64_t>(oc) * d.Cin + ic) * d.KH) * d.KW : nullptr;
                for (int u = 0; u < d.KH; ++u) {
                    int oh_lo, oh_hi;
                    tap_range(d.H, d.OH, d.stride, d.pad, u, oh_lo, oh_hi);
                    for (int v = 0; v < d.KW; ++v) {
                        int ow_lo, ow_hi;
                        tap_range(d.W, d.OW, d.stride, d.pad, v, ow_lo, ow_hi);
                        T w = k_base[u * d.KW + v];
                        T acc = T(0);
                        for (int oh = oh_lo; oh <= oh_hi; ++oh) {
                            int ih = oh * d.stride - d.pad + u;
                            const T* xrow = x_base + static_cast<int64_t>(ih) * d.W;
                            T* dxrow = dx_base ? dx_base + static_cast<int64_t>(ih) * d.W : nullptr;
                            const T* grow = g_base + static_cast<int64_t>(oh) * d.OW;
                            int iw = ow_lo * d.stride - d.pad + v;
                            for (int ow = ow_lo; ow <= ow_hi; ++ow, iw += d.stride) {
                                T g = grow[ow];
                                acc += g * xrow[iw];
                                if (dxrow) dxrow[iw] += w * g;
                            }
                        }
                        if (dk_base) dk_base[u * d.KW + v] += acc;
                    }
                }
            }
        }
}

}  // namespace detail

/// 2-D cross-correlation with zero padding. Input [C,H,W] or [B,C,H,W],
/// kernel [Cout,Cin,kH,kW]. Bias, when wanted, goes through bias_add.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, int stride, int padding) {
    detail::ConvDims d = detail::conv_dims(x.shape(), kernel.shape(), stride, padding);
    std::vector<int> oshape = x.rank() == 4 ? std::vector<int>{d.B, d.Cout, d.OH, d.OW}
                                            : std::vector<int>{d.Cout, d.OH, d.OW};
    std::vector<T> out(static_cast<size_t>(shape_numel(oshape)), T(0));
    detail::conv_forward(x.data(), kernel.data(), out.data(), d);
    return make_op<T>(std::move(oshape), std::move(out), {x, kernel}, [d](TensorNode<T>& o) {
        auto& px = o.parents[0];
        auto& pk = o.parents[1];
        T* dX = nullptr;
        T* dK = nullptr;
        if (px->requires_grad) {
            px->ensure_grad();
            dX = px->grad.data();
        }
        if (pk->requires_grad) {
            pk->ensure_grad();
            dK = pk->grad.data();
        }
        detail::conv_backward(px->value.data(), pk->value.data(), o.grad.data(), dX, dK, d);
    });
}

enum class ResampleMode { nearest_up, avg_down };

/// Integer-factor spatial resampling on [C,H,W] or [B,C,H,W].
template <typename T>
Tensor<T> resample(const Tensor<T>& x, int factor, ResampleMode mode) {
    if (factor < 1) throw std::invalid_argument("resample: factor must be >= 1");
    if (x.rank() != 3 && x.rank() != 4)
        throw std::invalid_argument("resample: input must be [C,H,W] or [B,C,H,W], got " + shape_str(x.shape()));
    int haxis = x.rank() - 2;
    int H = x.dim(haxis), W = x.dim(haxis + 1);
    int64_t planes = x.numel() / (static_cast<int64_t>(H) * W);
    if (mode == ResampleMode::avg_down && (H % factor != 0 || W % factor != 0))
        throw std::invalid_argument("resample: avg_down factor " + std::to_string(factor) +
                                    " does not divide spatial dims of " + shape_str(x.shape()));
    int OH = mode == ResampleMode::nearest_up ? H * factor : H / factor;
    int OW = mode == ResampleMode::nearest_up ? W * factor : W / factor;
    std::vector<int> oshape = x.shape();
    oshape[static_cast<size_t>(haxis)] = OH;
    oshape[static_cast<size_t>(haxis) + 1] = OW;
    std::vector<T> out(static_cast<size_t>(planes) * OH * OW, T(0));

    const T* px = x.data();
    if (mode == ResampleMode::nearest_up) {
        for (int64_t p = 0; p < planes; ++p)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow)
                    out[static_cast<size_t>((p * OH + oh) * OW + ow)] =
                        px[(p * H + oh / factor) * W + ow / factor];
    } else {
        T inv = T(1) / static_cast<T>(factor * factor);
        for (int64_t p = 0; p < planes; ++p)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    T acc = T(0);
                    for (int a = 0; a < factor; ++a)
                        for (int bb = 0; bb < factor; ++bb)
                            acc += px[(p * H + oh * factor + a) * W + ow * factor + bb];
                    out[static_cast<size_t>((p * OH + oh) * OW + ow)] = acc * inv;
                }
    }

    return make_op<T>(std::move(oshape), std::move(out), {x}, [H, W, OH, OW, planes, factor, mode](TensorNode<T>& o) {
        auto& p = o.parents[0];
        p->ensure_grad();
        T* dx = p->grad.data();
        const T* g = o.grad.data();
        if (mode == ResampleMode::nearest_up) {
            for (int64_t pl = 0; pl < planes; ++pl)
                for (int oh = 0; oh < OH; ++oh)
                    for (int ow = 0; ow < OW; ++ow)
                        dx[(pl * H + oh / factor) * W + ow / factor] += g[(pl * OH + oh) * OW + ow];
        } else {
            T inv = T(1) / static_cast<T>(factor * factor);
            for (int64_t pl = 0; pl < planes; ++pl)
                for (int oh = 0; oh < OH; ++oh)
                    for (int ow = 0; ow < OW; ++ow) {
                        T gv = g[(pl * OH + oh) * OW + ow] * inv;
                        for (int a = 0; a < factor; ++a)
                            for (int bb = 0; bb < factor; ++bb)
                                dx[(pl * H + oh * factor + a) * W + ow * factor + bb] += gv;
                    }
        }
    });
}

}  // namespace afnio
