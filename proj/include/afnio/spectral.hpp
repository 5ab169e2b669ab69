#pragma once

#include "afnio/conv.hpp"
#include "afnio/fft.hpp"
#include "afnio/rng.hpp"

namespace afnio {

/// Learned complex multipliers for the retained low-frequency modes.
/// Along the full-length axis both frequency corners are parameterized:
/// storage row r < modes1 holds frequency +r, row r >= modes1 holds the
/// negative frequency -(2*modes1 - r), i.e. index H - 2*modes1 + r on an
/// H-point grid. Real and imaginary parts are separate tensors so they
/// participate in gradient tracking.
template <typename T>
struct SpectralWeights {
    int modes1 = 0;
    int modes2 = 0;
    int cin = 0;
    int cout = 0;
    Tensor<T> re;  // [2*modes1, modes2, cin, cout]
    Tensor<T> im;

    static SpectralWeights make(int modes1, int modes2, int cin, int cout) {
        if (modes1 < 1 || modes2 < 1) throw std::invalid_argument("SpectralWeights: modes must be >= 1");
        if (cin < 1 || cout < 1) throw std::invalid_argument("SpectralWeights: channels must be >= 1");
        SpectralWeights w;
        w.modes1 = modes1;
        w.modes2 = modes2;
        w.cin = cin;
        w.cout = cout;
        w.re = Tensor<T>({2 * modes1, modes2, cin, cout});
        w.im = Tensor<T>({2 * modes1, modes2, cin, cout});
        return w;
    }

    /// Entries i.i.d. uniform in (-s, s). A band-limited unit-power input
    /// comes back from the retained modes with power about s^2 * 2/3 * cin,
    /// so s = sqrt(3/(2 cin)) * 0.7 holds the spectral branch at roughly
    /// the pointwise branch's magnitude.
    static SpectralWeights init(int modes1, int modes2, int cin, int cout, Rng& rng) {
        SpectralWeights w = make(modes1, modes2, cin, cout);
        T s = static_cast<T>(0.7 * std::sqrt(1.5 / static_cast<double>(cin)));
        for (auto& v : w.re.value()) v = static_cast<T>(rng.uniform(-s, s));
        for (auto& v : w.im.value()) v = static_cast<T>(rng.uniform(-s, s));
        w.re.set_requires_grad(true);
        w.im.set_requires_grad(true);
        return w;
    }

    int64_t param_count() const { return re.numel() + im.numel(); }

    int row_to_k1(int r, int H) const { return r < modes1 ? r : H - 2 * modes1 + r; }
};

inline void check_mode_cap(int modes1, int modes2, int H, int W) {
    if (2 * modes1 > H || 2 * modes2 > W)
        throw std::invalid_argument("spectral modes (" + std::to_string(modes1) + "," + std::to_string(modes2) +
                                    ") exceed the (H/2, W/2) cap for grid " + std::to_string(H) + "x" +
                                    std::to_string(W));
}

namespace specdetail {

// Hermitian projection of the stored k2 = 0 column: every pair
// (k1, (H-k1)%H) is replaced by its conjugate-symmetric part so the
// inverse transform of the multiplied spectrum is real. Runs over the
// whole column because the mirror of a retained row need not be retained
// (the negative corner reaches frequency -modes1, the positive one stops
// at modes1-1). Linear and self-adjoint, so the backward pass reuses it.
template <typename T>
void project_col0(std::vector<cplx<T>>& yh, int H, int Wh) {
    for (int k1 = 0; k1 < H; ++k1) {
        int k1m = (H - k1) % H;
        if (k1m < k1) continue;  // each pair once
        size_t a = static_cast<size_t>(k1) * Wh;
        size_t b = static_cast<size_t>(k1m) * Wh;
        if (k1m == k1) {
            yh[a] = cplx<T>(yh[a].real(), T(0));
        } else {
            cplx<T> half = (yh[a] + std::conj(yh[b])) * T(0.5);
            yh[a] = half;
            yh[b] = std::conj(half);
        }
    }
}

inline std::vector<int> retained_rows(int modes1, int H) {
    std::vector<int> rows;
    rows.reserve(static_cast<size_t>(2 * modes1));
    for (int r = 0; r < 2 * modes1; ++r) rows.push_back(r < modes1 ? r : H - 2 * modes1 + r);
    return rows;
}

}  // namespace specdetail

/// Global convolution: forward transform, per-mode channel mixing by the
/// retained complex weights, zeroing of all other modes, inverse transform.
/// Output is real with the same spatial size and cout channels;
/// differentiable with respect to x and both parts of R.
template <typename T>
Tensor<T> spectral_conv(const Tensor<T>& x, const SpectralWeights<T>& R, T* residue_out = nullptr) {
    if (x.rank() != 3) throw std::invalid_argument("spectral_conv: expected [C,H,W], got " + shape_str(x.shape()));
    const int Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (Cin != R.cin)
        throw std::invalid_argument("spectral_conv: input has " + std::to_string(Cin) + " channels, weights expect " +
                                    std::to_string(R.cin));
    check_mode_cap(R.modes1, R.modes2, H, W);
    const int Cout = R.cout, m1 = R.modes1, m2 = R.modes2;
    const int Wh = half_width(W);

    // Forward transforms, kept for the weight gradient.
    auto xf = std::make_shared<std::vector<std::vector<cplx<T>>>>();
    xf->reserve(static_cast<size_t>(Cin));
    for (int c = 0; c < Cin; ++c) xf->push_back(dft2_real_forward(x.data() + static_cast<int64_t>(c) * H * W, H, W));

    const std::vector<int> rows = specdetail::retained_rows(m1, H);
    const T* re = R.re.data();
    const T* im = R.im.data();
    auto widx = [m2, Cin, Cout](int r, int k2, int j, int o) {
        return ((static_cast<int64_t>(r) * m2 + k2) * Cin + j) * Cout + o;
    };

    std::vector<std::vector<cplx<T>>> yh(static_cast<size_t>(Cout));
    for (int o = 0; o < Cout; ++o) yh[static_cast<size_t>(o)].assign(static_cast<size_t>(H) * Wh, cplx<T>(0, 0));
    for (int r = 0; r < 2 * m1; ++r) {
        int k1 = rows[static_cast<size_t>(r)];
        for (int k2 = 0; k2 < m2; ++k2) {
            for (int o = 0; o < Cout; ++o) {
                cplx<T> acc(0, 0);
                for (int j = 0; j < Cin; ++j) {
                    cplx<T> w(re[widx(r, k2, j, o)], im[widx(r, k2, j, o)]);
                    acc += w * (*xf)[static_cast<size_t>(j)][static_cast<size_t>(k1) * W + k2];
                }
                yh[static_cast<size_t>(o)][static_cast<size_t>(k1) * Wh + k2] = acc;
            }
        }
    }
    for (int o = 0; o < Cout; ++o) specdetail::project_col0(yh[static_cast<size_t>(o)], H, Wh);

    Tensor<T> out({Cout, H, W});
    T resid = T(0);
    const T inv_hw = T(1) / (static_cast<T>(H) * static_cast<T>(W));
    for (int o = 0; o < Cout; ++o) {
        auto full = expand_hermitian(yh[static_cast<size_t>(o)].data(), H, W);
        dft2_inplace(full, H, W, true);
        for (int64_t i = 0; i < static_cast<int64_t>(H) * W; ++i) {
            cplx<T> v = full[static_cast<size_t>(i)] * inv_hw;
            out.data()[static_cast<int64_t>(o) * H * W + i] = v.real();
            resid = std::max(resid, std::abs(v.imag()));
        }
    }
    if (residue_out) *residue_out = resid;

    Tensor<T> reT = R.re, imT = R.im;
    std::vector<int> oshape = out.shape();
    return make_op<T>(
        std::move(oshape), std::move(out.value()), {x, reT, imT},
        [H, W, Wh, Cin, Cout, m1, m2, rows, xf, widx](TensorNode<T>& o) {
            auto& px = o.parents[0];
            auto& pre = o.parents[1];
            auto& pim = o.parents[2];
            const bool need_x = px->requires_grad;
            const bool need_r = pre->requires_grad || pim->requires_grad;
            const T inv_hw = T(1) / (static_cast<T>(H) * static_cast<T>(W));

            // Adjoint of the half-spectrum inverse transform: forward DFT of
            // the output gradient, scaled by c_k/(H*W) where c_k counts how
            // many full-spectrum positions the stored coefficient covers.
            // Filled over the whole stored grid because the column-0
            // projection mixes retained rows with their mirrors.
            std::vector<std::vector<cplx<T>>> dy(static_cast<size_t>(Cout));
            for (int oc = 0; oc < Cout; ++oc) {
                auto gf = dft2_real_forward(o.grad.data() + static_cast<int64_t>(oc) * H * W, H, W);
                auto& d = dy[static_cast<size_t>(oc)];
                d.assign(static_cast<size_t>(H) * Wh, cplx<T>(0, 0));
                for (int k1 = 0; k1 < H; ++k1)
                    for (int k2 = 0; k2 < Wh; ++k2) {
                        T ck = (k2 == 0 || 2 * k2 == W) ? T(1) : T(2);
                        d[static_cast<size_t>(k1) * Wh + k2] = gf[static_cast<size_t>(k1) * W + k2] * (ck * inv_hw);
                    }
                specdetail::project_col0(d, H, Wh);
            }

            if (need_r) {
                pre->ensure_grad();
                pim->ensure_grad();
                for (int r = 0; r < 2 * m1; ++r) {
                    int k1 = rows[static_cast<size_t>(r)];
                    for (int k2 = 0; k2 < m2; ++k2)
                        for (int oc = 0; oc < Cout; ++oc) {
                            cplx<T> g = dy[static_cast<size_t>(oc)][static_cast<size_t>(k1) * Wh + k2];
                            for (int j = 0; j < Cin; ++j) {
                                cplx<T> gr = g * std::conj((*xf)[static_cast<size_t>(j)][static_cast<size_t>(k1) * W + k2]);
                                pre->grad[static_cast<size_t>(widx(r, k2, j, oc))] += gr.real();
                                pim->grad[static_cast<size_t>(widx(r, k2, j, oc))] += gr.imag();
                            }
                        }
                }
            }

            if (need_x) {
                px->ensure_grad();
                const T* re = pre->value.data();
                const T* im = pim->value.data();
                for (int j = 0; j < Cin; ++j) {
                    // dL/dX on the stored half, then the adjoint of the
                    // restricted forward DFT: zero-pad and run the
                    // unnormalized inverse, keeping the real part.
                    std::vector<cplx<T>> full(static_cast<size_t>(H) * W, cplx<T>(0, 0));
                    for (int r = 0; r < 2 * m1; ++r) {
                        int k1 = rows[static_cast<size_t>(r)];
                        for (int k2 = 0; k2 < m2; ++k2) {
                            cplx<T> acc(0, 0);
                            for (int oc = 0; oc < Cout; ++oc) {
                                cplx<T> w(re[widx(r, k2, j, oc)], im[widx(r, k2, j, oc)]);
                                acc += std::conj(w) * dy[static_cast<size_t>(oc)][static_cast<size_t>(k1) * Wh + k2];
                            }
                            full[static_cast<size_t>(k1) * W + k2] = acc;
                        }
                    }
                    dft2_inplace(full, H, W, true);
                    for (int64_t i = 0; i < static_cast<int64_t>(H) * W; ++i)
                        px->grad[static_cast<size_t>(static_cast<int64_t>(j) * H * W + i)] +=
                            full[static_cast<size_t>(i)].real();
                }
            }
        });
}

/// Named alias of spectral_conv: the same weights applied on a grid of any
/// admissible size. Exists so resolution transfer is an explicit contract.
template <typename T>
Tensor<T> apply_at_resolution(const SpectralWeights<T>& R, const Tensor<T>& x) {
    return spectral_conv(x, R);
}

/// One operator layer: sigma(W*v + b + spectral_conv(v, R)) with a 1x1
/// pointwise convolution W and GELU after the return to the spatial domain.
template <typename T>
Tensor<T> fno_layer(const Tensor<T>& v, const SpectralWeights<T>& R, const Tensor<T>& pw_kernel,
                    const Tensor<T>& bias) {
    if (pw_kernel.rank() != 4 || pw_kernel.dim(2) != 1 || pw_kernel.dim(3) != 1)
        throw std::invalid_argument("fno_layer: pointwise kernel must be [Cout,Cin,1,1], got " +
                                    shape_str(pw_kernel.shape()));
    if (pw_kernel.dim(0) != R.cout || pw_kernel.dim(1) != R.cin)
        throw std::invalid_argument("fno_layer: channel counts of W " + shape_str(pw_kernel.shape()) +
                                    " and R (" + std::to_string(R.cin) + "->" + std::to_string(R.cout) +
                                    ") disagree");
    Tensor<T> local = bias_add(conv2d(v, pw_kernel, 1, 0), bias);
    Tensor<T> global = spectral_conv(v, R);
    return gelu(add(local, global));
}

}  // namespace afnio
