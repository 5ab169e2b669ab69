#pragma once

#include <array>
#include <cmath>

#include "afnio/tensor.hpp"

namespace afnio {

/// Peak signal-to-noise ratio in dB; identical inputs report the 99 dB cap
/// instead of infinity. All accumulation in double.
template <typename T>
double psnr(const Tensor<T>& pred, const Tensor<T>& target, double max_value = 1.0) {
    check_same_shape(pred, target, "psnr");
    double mse = 0;
    for (int64_t i = 0; i < pred.numel(); ++i) {
        double d = static_cast<double>(pred.data()[i]) - static_cast<double>(target.data()[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(pred.numel());
    if (mse == 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(max_value * max_value / mse));
}

namespace metricdetail {

// 11-tap Gaussian, sigma 1.5, normalized.
inline const std::array<double, 11>& gaussian11() {
    static const std::array<double, 11> g = [] {
        std::array<double, 11> w{};
        double sum = 0;
        for (int i = 0; i < 11; ++i) {
            double d = i - 5;
            w[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
            sum += w[static_cast<size_t>(i)];
        }
        for (auto& v : w) v /= sum;
        return w;
    }();
    return g;
}

// Separable valid-mode Gaussian filter; output (H-10) x (W-10).
inline std::vector<double> gauss_filter_valid(const std::vector<double>& img, int H, int W) {
    const auto& g = gaussian11();
    int OW = W - 10;
    std::vector<double> rows(static_cast<size_t>(H) * OW);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < OW; ++c) {
            double acc = 0;
            for (int k = 0; k < 11; ++k) acc += g[static_cast<size_t>(k)] * img[static_cast<size_t>(r) * W + c + k];
            rows[static_cast<size_t>(r) * OW + c] = acc;
        }
    int OH = H - 10;
    std::vector<double> out(static_cast<size_t>(OH) * OW);
    for (int r = 0; r < OH; ++r)
        for (int c = 0; c < OW; ++c) {
            double acc = 0;
            for (int k = 0; k < 11; ++k) acc += g[static_cast<size_t>(k)] * rows[static_cast<size_t>(r + k) * OW + c];
            out[static_cast<size_t>(r) * OW + c] = acc;
        }
    return out;
}

}  // namespace metricdetail

/// Structural similarity, Wang et al. convention: 11x11 Gaussian window
/// (sigma 1.5), C1=(0.01L)^2, C2=(0.03L)^2 with L=1, valid window
/// positions, computed per channel and averaged.
template <typename T>
double ssim(const Tensor<T>& pred, const Tensor<T>& target) {
    check_same_shape(pred, target, "ssim");
    if (pred.rank() != 3) throw std::invalid_argument("ssim: expected [C,H,W], got " + shape_str(pred.shape()));
    int C = pred.dim(0), H = pred.dim(1), W = pred.dim(2);
    if (H < 11 || W < 11)
        throw std::invalid_argument("ssim: frames " + shape_str(pred.shape()) + " smaller than the 11x11 window");
    const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
    double total = 0;
    for (int ch = 0; ch < C; ++ch) {
        int64_t off = static_cast<int64_t>(ch) * H * W;
        std::vector<double> x(static_cast<size_t>(H) * W), y(static_cast<size_t>(H) * W);
        std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
        for (size_t i = 0; i < x.size(); ++i) {
            x[i] = static_cast<double>(pred.data()[off + static_cast<int64_t>(i)]);
            y[i] = static_cast<double>(target.data()[off + static_cast<int64_t>(i)]);
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        auto mx = metricdetail::gauss_filter_valid(x, H, W);
        auto my = metricdetail::gauss_filter_valid(y, H, W);
        auto mxx = metricdetail::gauss_filter_valid(xx, H, W);
        auto myy = metricdetail::gauss_filter_valid(yy, H, W);
        auto mxy = metricdetail::gauss_filter_valid(xy, H, W);
        double acc = 0;
        for (size_t i = 0; i < mx.size(); ++i) {
            double vx = mxx[i] - mx[i] * mx[i];
            double vy = myy[i] - my[i] * my[i];
            double cov = mxy[i] - mx[i] * my[i];
            double num = (2 * mx[i] * my[i] + C1) * (2 * cov + C2);
            double den = (mx[i] * mx[i] + my[i] * my[i] + C1) * (vx + vy + C2);
            acc += num / den;
        }
        total += acc / static_cast<double>(mx.size());
    }
    return total / C;
}

}  // namespace afnio
