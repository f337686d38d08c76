#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "sclm/threads.hpp"

namespace sclm {

// Dense N x C x H x W tensor, row-major with W fastest.
template <typename T>
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
        : n(n_), c(c_), h(h_), w(w_),
          data(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {
        if (n_ < 1 || c_ < 1 || h_ < 1 || w_ < 1)
            throw std::invalid_argument("Tensor: dimensions must be positive");
    }

    size_t size() const { return data.size(); }
    size_t plane() const { return static_cast<size_t>(h) * w; }

    T& at(int in, int ic, int iy, int ix) {
        return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    const T& at(int in, int ic, int iy, int ix) const {
        return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    bool all_finite() const {
        for (const T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

// Convolution weights [c_out][c_in][k_h][k_w] plus per-output-channel bias.
template <typename T>
struct ConvKernel {
    int c_out = 0, c_in = 0, k_h = 0, k_w = 0;
    std::vector<T> weight;
    std::vector<T> bias;

    ConvKernel() = default;
    ConvKernel(int co, int ci, int kh, int kw)
        : c_out(co), c_in(ci), k_h(kh), k_w(kw),
          weight(static_cast<size_t>(co) * ci * kh * kw, T(0)), bias(co, T(0)) {}

    T& wat(int o, int i, int u, int v) {
        return weight[((static_cast<size_t>(o) * c_in + i) * k_h + u) * k_w + v];
    }
    const T& wat(int o, int i, int u, int v) const {
        return weight[((static_cast<size_t>(o) * c_in + i) * k_h + u) * k_w + v];
    }
};

// Batch-norm parameters. sigma holds sqrt(running_var + eps), so it is
// strictly positive for any trained layer.
template <typename T>
struct BNParams {
    std::vector<T> mu, sigma, gamma, beta;
    T eps = T(1e-5);

    BNParams() = default;
    explicit BNParams(int c)
        : mu(c, T(0)), sigma(c, T(1)), gamma(c, T(1)), beta(c, T(0)) {}

    int channels() const { return static_cast<int>(mu.size()); }
};

enum class BNMode { Train, Infer };

namespace detail {

inline void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace detail

// Cross-correlation with zero padding (deep-learning convention).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvKernel<T>& k, int stride,
                 int pad_h, int pad_w) {
    if (x.c != k.c_in)
        detail::fail("conv2d: input has " + std::to_string(x.c) +
                     " channels, kernel expects " + std::to_string(k.c_in));
    if (stride < 1) detail::fail("conv2d: stride must be >= 1");
    if (pad_h < 0 || pad_w < 0) detail::fail("conv2d: padding must be >= 0");
    const int ph = x.h + 2 * pad_h;
    const int pw = x.w + 2 * pad_w;
    if (ph < k.k_h || pw < k.k_w)
        detail::fail("conv2d: kernel larger than padded input");
    const int oh = (ph - k.k_h) / stride + 1;
    const int ow = (pw - k.k_w) / stride + 1;

    Tensor<T> out(x.n, k.c_out, oh, ow);
    std::vector<T> padded(static_cast<size_t>(x.c) * ph * pw);
    const int64_t work = static_cast<int64_t>(oh) * ow * k.c_out * k.c_in * k.k_h * k.k_w;
    const int threads = work >= (int64_t(1) << 22) ? max_threads() : 1;

    for (int in = 0; in < x.n; ++in) {
        if (pad_h || pad_w) std::fill(padded.begin(), padded.end(), T(0));
        for (int ic = 0; ic < x.c; ++ic)
            for (int iy = 0; iy < x.h; ++iy)
                std::memcpy(&padded[(static_cast<size_t>(ic) * ph + iy + pad_h) * pw + pad_w],
                            &x.at(in, ic, iy, 0), sizeof(T) * x.w);

        parallel_for(0, static_cast<int64_t>(k.c_out) * oh, threads, [&](int64_t r) {
            const int o = static_cast<int>(r / oh);
            const int oy = static_cast<int>(r % oh);
            T* orow = &out.at(in, o, oy, 0);
            for (int ox = 0; ox < ow; ++ox) orow[ox] = k.bias[o];
            for (int i = 0; i < k.c_in; ++i)
                for (int u = 0; u < k.k_h; ++u) {
                    const T* prow = &padded[(static_cast<size_t>(i) * ph + oy * stride + u) * pw];
                    const T* wrow = &k.wat(o, i, u, 0);
                    for (int ox = 0; ox < ow; ++ox) {
                        const T* px = prow + ox * stride;
                        T acc = T(0);
                        for (int v = 0; v < k.k_w; ++v) acc += px[v] * wrow[v];
                        orow[ox] += acc;
                    }
                }
        });
    }
    return out;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvKernel<T>& k, int stride = 1,
                 int padding = 0) {
    return conv2d(x, k, stride, padding, padding);
}

namespace detail {

// Batch statistics (biased variance) per channel over N*H*W.
template <typename T>
void batch_stats(const Tensor<T>& x, std::vector<T>& mu, std::vector<T>& var) {
    mu.assign(x.c, T(0));
    var.assign(x.c, T(0));
    const T m = static_cast<T>(static_cast<size_t>(x.n) * x.h * x.w);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const T* p = &x.at(in, ic, 0, 0);
            T s = T(0);
            for (size_t j = 0; j < x.plane(); ++j) s += p[j];
            mu[ic] += s;
        }
    for (int ic = 0; ic < x.c; ++ic) mu[ic] /= m;
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const T* p = &x.at(in, ic, 0, 0);
            T s = T(0);
            for (size_t j = 0; j < x.plane(); ++j) {
                const T d = p[j] - mu[ic];
                s += d * d;
            }
            var[ic] += s;
        }
    for (int ic = 0; ic < x.c; ++ic) var[ic] /= m;
}

}  // namespace detail

// Infer mode applies the stored statistics; train mode normalizes with batch
// statistics and updates the running ones by exponential moving average.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, BNParams<T>& p, BNMode mode,
                     T momentum = T(0.1)) {
    if (x.c != p.channels()) detail::fail("batch_norm: channel mismatch");
    for (const T s : p.sigma)
        if (!(s > T(0))) detail::fail("batch_norm: sigma must be positive");

    Tensor<T> out(x.n, x.c, x.h, x.w);
    if (mode == BNMode::Infer) {
        for (int in = 0; in < x.n; ++in)
            for (int ic = 0; ic < x.c; ++ic) {
                const T scale = p.gamma[ic] / p.sigma[ic];
                const T shift = p.beta[ic] - p.mu[ic] * scale;
                const T* px = &x.at(in, ic, 0, 0);
                T* po = &out.at(in, ic, 0, 0);
                for (size_t j = 0; j < x.plane(); ++j) po[j] = px[j] * scale + shift;
            }
        return out;
    }

    std::vector<T> mu, var;
    detail::batch_stats(x, mu, var);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const T inv = T(1) / std::sqrt(var[ic] + p.eps);
            const T scale = p.gamma[ic] * inv;
            const T shift = p.beta[ic] - mu[ic] * scale;
            const T* px = &x.at(in, ic, 0, 0);
            T* po = &out.at(in, ic, 0, 0);
            for (size_t j = 0; j < x.plane(); ++j) po[j] = px[j] * scale + shift;
        }
    for (int ic = 0; ic < x.c; ++ic) {
        const T run_var = p.sigma[ic] * p.sigma[ic] - p.eps;
        const T new_var = (T(1) - momentum) * run_var + momentum * var[ic];
        p.mu[ic] = (T(1) - momentum) * p.mu[ic] + momentum * mu[ic];
        p.sigma[ic] = std::sqrt(new_var + p.eps);
    }
    return out;
}

// Average pooling, zero padded; the divisor is always k*k so the operation
// matches its convolution realization exactly (including borders).
template <typename T>
Tensor<T> avg_pool(const Tensor<T>& x, int k, int stride, int padding) {
    if (k < 1) detail::fail("avg_pool: kernel must be >= 1");
    if (stride < 1) detail::fail("avg_pool: stride must be >= 1");
    const int ph = x.h + 2 * padding, pw = x.w + 2 * padding;
    if (ph < k || pw < k) detail::fail("avg_pool: kernel larger than padded input");
    const int oh = (ph - k) / stride + 1, ow = (pw - k) / stride + 1;
    Tensor<T> out(x.n, x.c, oh, ow);
    const T inv = T(1) / (static_cast<T>(k) * static_cast<T>(k));
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    T s = T(0);
                    for (int u = 0; u < k; ++u)
                        for (int v = 0; v < k; ++v) {
                            const int iy = oy * stride + u - padding;
                            const int ix = ox * stride + v - padding;
                            if (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w)
                                s += x.at(in, ic, iy, ix);
                        }
                    out.at(in, ic, oy, ox) = s * inv;
                }
    return out;
}

// Stride-1 max pooling that preserves the spatial size; borders are handled
// by edge replication. Separable (rows then columns), which is equivalent to
// the full k x k window for max.
template <typename T>
Tensor<T> max_pool_same(const Tensor<T>& x, int k) {
    if (k < 1 || k % 2 == 0) detail::fail("max_pool_same: k must be odd");
    const int r = k / 2;
    Tensor<T> tmp(x.n, x.c, x.h, x.w);
    Tensor<T> out(x.n, x.c, x.h, x.w);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            for (int iy = 0; iy < x.h; ++iy) {
                const T* row = &x.at(in, ic, iy, 0);
                for (int ix = 0; ix < x.w; ++ix) {
                    const int lo = std::max(0, ix - r), hi = std::min(x.w - 1, ix + r);
                    T m = row[lo];
                    for (int j = lo + 1; j <= hi; ++j) m = std::max(m, row[j]);
                    tmp.at(in, ic, iy, ix) = m;
                }
            }
            for (int iy = 0; iy < x.h; ++iy) {
                const int lo = std::max(0, iy - r), hi = std::min(x.h - 1, iy + r);
                for (int ix = 0; ix < x.w; ++ix) {
                    T m = tmp.at(in, ic, lo, ix);
                    for (int j = lo + 1; j <= hi; ++j)
                        m = std::max(m, tmp.at(in, ic, j, ix));
                    out.at(in, ic, iy, ix) = m;
                }
            }
        }
    return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    Tensor<T> out(x.n, x.c, x.h, x.w);
    for (size_t j = 0; j < x.size(); ++j) {
        const T v = x.data[j];
        if (v >= T(0)) {
            out.data[j] = T(1) / (T(1) + std::exp(-v));
        } else {
            const T e = std::exp(v);
            out.data[j] = e / (T(1) + e);
        }
    }
    return out;
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
    Tensor<T> out(x.n, x.c, x.h, x.w);
    for (size_t j = 0; j < x.size(); ++j)
        out.data[j] = std::min(hi, std::max(lo, x.data[j]));
    return out;
}

namespace detail {

// Elementwise binary op; a single-channel rhs broadcasts across channels.
template <typename T, typename F>
Tensor<T> zip(const Tensor<T>& a, const Tensor<T>& b, F&& f, const char* name) {
    if (a.same_shape(b)) {
        Tensor<T> out(a.n, a.c, a.h, a.w);
        for (size_t j = 0; j < a.size(); ++j) out.data[j] = f(a.data[j], b.data[j]);
        return out;
    }
    if (b.c == 1 && a.n == b.n && a.h == b.h && a.w == b.w) {
        Tensor<T> out(a.n, a.c, a.h, a.w);
        for (int in = 0; in < a.n; ++in)
            for (int ic = 0; ic < a.c; ++ic) {
                const T* pa = &a.at(in, ic, 0, 0);
                const T* pb = &b.at(in, 0, 0, 0);
                T* po = &out.at(in, ic, 0, 0);
                for (size_t j = 0; j < a.plane(); ++j) po[j] = f(pa[j], pb[j]);
            }
        return out;
    }
    fail(std::string(name) + ": shape mismatch");
    return {};
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::zip(a, b, [](T x, T y) { return x + y; }, "add");
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::zip(a, b, [](T x, T y) { return x - y; }, "sub");
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::zip(a, b, [](T x, T y) { return x * y; }, "mul");
}

// Division with an epsilon floor on the denominator.
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b, T eps) {
    return detail::zip(a, b, [eps](T x, T y) { return x / std::max(y, eps); }, "div");
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
    Tensor<T> out = a;
    for (T& v : out.data) v += s;
    return out;
}
template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
    Tensor<T> out = a;
    for (T& v : out.data) v *= s;
    return out;
}

template <typename T>
T tensor_mean(const Tensor<T>& x) {
    T s = T(0);
    for (const T v : x.data) s += v;
    return s / static_cast<T>(x.size());
}

template <typename T>
T tensor_min(const Tensor<T>& x) {
    return *std::min_element(x.data.begin(), x.data.end());
}
template <typename T>
T tensor_max(const Tensor<T>& x) {
    return *std::max_element(x.data.begin(), x.data.end());
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) detail::fail("max_abs_diff: shape mismatch");
    T m = T(0);
    for (size_t j = 0; j < a.size(); ++j)
        m = std::max(m, std::abs(a.data[j] - b.data[j]));
    return m;
}

template <typename T>
Tensor<T> crop(const Tensor<T>& x, int y0, int x0, int ch, int cw) {
    if (y0 < 0 || x0 < 0 || y0 + ch > x.h || x0 + cw > x.w)
        detail::fail("crop: window out of bounds");
    Tensor<T> out(x.n, x.c, ch, cw);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic)
            for (int iy = 0; iy < ch; ++iy)
                std::memcpy(&out.at(in, ic, iy, 0), &x.at(in, ic, y0 + iy, x0),
                            sizeof(T) * cw);
    return out;
}

template <typename T>
Tensor<T> flip_horizontal(const Tensor<T>& x) {
    Tensor<T> out(x.n, x.c, x.h, x.w);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic)
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix)
                    out.at(in, ic, iy, ix) = x.at(in, ic, iy, x.w - 1 - ix);
    return out;
}

template <typename T>
Tensor<T> flip_vertical(const Tensor<T>& x) {
    Tensor<T> out(x.n, x.c, x.h, x.w);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic)
            for (int iy = 0; iy < x.h; ++iy)
                std::memcpy(&out.at(in, ic, iy, 0), &x.at(in, ic, x.h - 1 - iy, 0),
                            sizeof(T) * x.w);
    return out;
}

// Counter-clockwise quarter turns.
template <typename T>
Tensor<T> rot90(const Tensor<T>& x, int quarter_turns) {
    int q = ((quarter_turns % 4) + 4) % 4;
    Tensor<T> cur = x;
    while (q--) {
        Tensor<T> out(cur.n, cur.c, cur.w, cur.h);
        for (int in = 0; in < cur.n; ++in)
            for (int ic = 0; ic < cur.c; ++ic)
                for (int iy = 0; iy < cur.h; ++iy)
                    for (int ix = 0; ix < cur.w; ++ix)
                        out.at(in, ic, cur.w - 1 - ix, iy) = cur.at(in, ic, iy, ix);
        cur = std::move(out);
    }
    return cur;
}

template <typename U, typename T>
Tensor<U> tensor_cast(const Tensor<T>& x) {
    Tensor<U> out(x.n, x.c, x.h, x.w);
    for (size_t j = 0; j < x.size(); ++j) out.data[j] = static_cast<U>(x.data[j]);
    return out;
}

template <typename U, typename T>
ConvKernel<U> kernel_cast(const ConvKernel<T>& k) {
    ConvKernel<U> out(k.c_out, k.c_in, k.k_h, k.k_w);
    for (size_t j = 0; j < k.weight.size(); ++j) out.weight[j] = static_cast<U>(k.weight[j]);
    for (size_t j = 0; j < k.bias.size(); ++j) out.bias[j] = static_cast<U>(k.bias[j]);
    return out;
}

}  // namespace sclm
