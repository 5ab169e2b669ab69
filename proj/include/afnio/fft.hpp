#pragma once

#include <complex>
#include <vector>

#include "afnio/tensor.hpp"

namespace afnio {

template <typename T>
using cplx = std::complex<T>;

namespace fftdetail {

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Twiddle table e^{sign * 2*pi*i * k / n}, computed per index to keep
// rounding independent of call history.
template <typename T>
void fill_twiddles(std::vector<cplx<T>>& tw, int n, bool inverse) {
    tw.resize(static_cast<size_t>(n));
    const double two_pi = 6.283185307179586476925286766559;
    double s = inverse ? 1.0 : -1.0;
    for (int k = 0; k < n; ++k) {
        double ang = s * two_pi * k / n;
        tw[static_cast<size_t>(k)] = cplx<T>(static_cast<T>(std::cos(ang)), static_cast<T>(std::sin(ang)));
    }
}

// Iterative radix-2, in place, unnormalized.
template <typename T>
void fft_pow2(cplx<T>* a, int n, const std::vector<cplx<T>>& tw) {
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j |= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        int step = n / len;
        for (int i = 0; i < n; i += len) {
            for (int k = 0; k < len / 2; ++k) {
                cplx<T> w = tw[static_cast<size_t>(k * step)];
                cplx<T> u = a[i + k];
                cplx<T> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

// Direct O(n^2) transform for sizes without a radix-2 path.
template <typename T>
void dft_direct(cplx<T>* a, int n, const std::vector<cplx<T>>& tw, std::vector<cplx<T>>& scratch) {
    scratch.assign(a, a + n);
    for (int k = 0; k < n; ++k) {
        cplx<T> acc(0, 0);
        int64_t idx = 0;
        for (int m = 0; m < n; ++m) {
            acc += scratch[static_cast<size_t>(m)] * tw[static_cast<size_t>(idx)];
            idx += k;
            if (idx >= n) idx -= n;
        }
        a[k] = acc;
    }
}

template <typename T>
struct Plan1d {
    int n = 0;
    bool inverse = false;
    std::vector<cplx<T>> tw;
    std::vector<cplx<T>> scratch;
    void prepare(int n_, bool inv) {
        if (n == n_ && inverse == inv && !tw.empty()) return;
        n = n_;
        inverse = inv;
        fill_twiddles(tw, n, inv);
    }
    void run(cplx<T>* a) {
        if (is_pow2(n))
            fft_pow2(a, n, tw);
        else
            dft_direct(a, n, tw, scratch);
    }
};

}  // namespace fftdetail

/// Unnormalized 2-D transform over a row-major H x W complex grid,
/// in place. Power-of-two axes take the radix-2 path, others a direct sum.
template <typename T>
void dft2_inplace(std::vector<cplx<T>>& a, int H, int W, bool inverse) {
    if (static_cast<int64_t>(a.size()) != static_cast<int64_t>(H) * W)
        throw std::invalid_argument("dft2_inplace: buffer does not match grid");
    fftdetail::Plan1d<T> plan;
    plan.prepare(W, inverse);
    for (int r = 0; r < H; ++r) plan.run(a.data() + static_cast<int64_t>(r) * W);
    fftdetail::Plan1d<T> colplan;
    colplan.prepare(H, inverse);
    std::vector<cplx<T>> col(static_cast<size_t>(H));
    for (int c = 0; c < W; ++c) {
        for (int r = 0; r < H; ++r) col[static_cast<size_t>(r)] = a[static_cast<size_t>(r) * W + c];
        colplan.run(col.data());
        for (int r = 0; r < H; ++r) a[static_cast<size_t>(r) * W + c] = col[static_cast<size_t>(r)];
    }
}

inline int half_width(int W) { return W / 2 + 1; }

/// Complex Fourier coefficients of a real [C,H,W] signal, stored in the
/// Hermitian half k2 in [0, W/2]. Forward transform is unnormalized.
template <typename T>
struct Spectrum {
    int channels = 0;
    int H = 0;
    int W = 0;
    std::vector<cplx<T>> coeffs;  // (c, k1, k2) row-major, k2 < W/2+1

    int64_t per_channel() const { return static_cast<int64_t>(H) * half_width(W); }
    cplx<T>& at(int c, int k1, int k2) {
        return coeffs[static_cast<size_t>((static_cast<int64_t>(c) * H + k1) * half_width(W) + k2)];
    }
    const cplx<T>& at(int c, int k1, int k2) const {
        return coeffs[static_cast<size_t>((static_cast<int64_t>(c) * H + k1) * half_width(W) + k2)];
    }
};

/// Full unnormalized forward transform of one real channel.
template <typename T>
std::vector<cplx<T>> dft2_real_forward(const T* x, int H, int W) {
    std::vector<cplx<T>> buf(static_cast<size_t>(H) * W);
    for (int64_t i = 0; i < static_cast<int64_t>(H) * W; ++i) buf[static_cast<size_t>(i)] = cplx<T>(x[i], T(0));
    dft2_inplace(buf, H, W, false);
    return buf;
}

/// Expand a Hermitian half-spectrum channel to the full grid via
/// conjugate symmetry: full[k1][k2] = conj(half[(H-k1)%H][W-k2]) for
/// k2 > W/2.
template <typename T>
std::vector<cplx<T>> expand_hermitian(const cplx<T>* half, int H, int W) {
    int Wh = half_width(W);
    std::vector<cplx<T>> full(static_cast<size_t>(H) * W);
    for (int k1 = 0; k1 < H; ++k1) {
        for (int k2 = 0; k2 < Wh; ++k2) full[static_cast<size_t>(k1) * W + k2] = half[static_cast<int64_t>(k1) * Wh + k2];
        for (int k2 = Wh; k2 < W; ++k2) {
            int m1 = (H - k1) % H;
            int m2 = W - k2;
            full[static_cast<size_t>(k1) * W + k2] = std::conj(half[static_cast<int64_t>(m1) * Wh + m2]);
        }
    }
    return full;
}

/// Forward 2-D transform of a real [C,H,W] tensor (unnormalized, per Hermitian
/// half-spectrum storage). The DC coefficient equals the sum of all samples.
template <typename T>
Spectrum<T> fft2(const Tensor<T>& x) {
    if (x.rank() != 3) throw std::invalid_argument("fft2: expected [C,H,W], got " + shape_str(x.shape()));
    Spectrum<T> s;
    s.channels = x.dim(0);
    s.H = x.dim(1);
    s.W = x.dim(2);
    int Wh = half_width(s.W);
    s.coeffs.resize(static_cast<size_t>(s.channels) * s.H * Wh);
    for (int c = 0; c < s.channels; ++c) {
        auto full = dft2_real_forward(x.data() + static_cast<int64_t>(c) * s.H * s.W, s.H, s.W);
        for (int k1 = 0; k1 < s.H; ++k1)
            for (int k2 = 0; k2 < Wh; ++k2) s.at(c, k1, k2) = full[static_cast<size_t>(k1) * s.W + k2];
    }
    return s;
}

/// Inverse transform with 1/(H*W) normalization; the imaginary residue of
/// the reconstruction is discarded (its max magnitude is reported through
/// residue_out when given).
template <typename T>
Tensor<T> ifft2(const Spectrum<T>& s, T* residue_out = nullptr) {
    int Wh = half_width(s.W);
    Tensor<T> out({s.channels, s.H, s.W});
    T* po = out.data();
    T resid = T(0);
    T scale = T(1) / (static_cast<T>(s.H) * static_cast<T>(s.W));
    for (int c = 0; c < s.channels; ++c) {
        auto full = expand_hermitian(s.coeffs.data() + static_cast<int64_t>(c) * s.H * Wh, s.H, s.W);
        dft2_inplace(full, s.H, s.W, true);
        for (int64_t i = 0; i < static_cast<int64_t>(s.H) * s.W; ++i) {
            cplx<T> v = full[static_cast<size_t>(i)] * scale;
            po[static_cast<int64_t>(c) * s.H * s.W + i] = v.real();
            resid = std::max(resid, std::abs(v.imag()));
        }
    }
    if (residue_out) *residue_out = resid;
    return out;
}

/// Translate a real [C,H,W] image by a (possibly fractional) displacement
/// using the shift theorem on signed frequencies. Exact for band-limited
/// periodic signals with no Nyquist content.
template <typename T>
Tensor<T> fourier_shift(const Tensor<T>& x, double dy, double dx) {
    if (x.rank() != 3) throw std::invalid_argument("fourier_shift: expected [C,H,W], got " + shape_str(x.shape()));
    int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const double two_pi = 6.283185307179586476925286766559;
    Tensor<T> out({C, H, W});
    for (int c = 0; c < C; ++c) {
        auto full = dft2_real_forward(x.data() + static_cast<int64_t>(c) * H * W, H, W);
        for (int k1 = 0; k1 < H; ++k1) {
            int f1 = k1 <= H / 2 ? k1 : k1 - H;
            for (int k2 = 0; k2 < W; ++k2) {
                int f2 = k2 <= W / 2 ? k2 : k2 - W;
                double ang = -two_pi * (f1 * dy / H + f2 * dx / W);
                full[static_cast<size_t>(k1) * W + k2] *=
                    cplx<T>(static_cast<T>(std::cos(ang)), static_cast<T>(std::sin(ang)));
            }
        }
        dft2_inplace(full, H, W, true);
        T scale = T(1) / (static_cast<T>(H) * static_cast<T>(W));
        for (int64_t i = 0; i < static_cast<int64_t>(H) * W; ++i)
            out.data()[static_cast<int64_t>(c) * H * W + i] = full[static_cast<size_t>(i)].real() * scale;
    }
    return out;
}

}  // namespace afnio
