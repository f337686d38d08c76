#pragma once

// Test-only reference implementations, written as plain gather loops with
// explicit bounds checks. They stay independent of the library's padded
// buffer / separable implementations on purpose.

#include <algorithm>
#include <cmath>
#include <vector>

#include "sclm/tensor.hpp"

namespace oracle {

template <typename T>
sclm::Tensor<T> conv2d_naive(const sclm::Tensor<T>& x, const sclm::ConvKernel<T>& k,
                             int stride, int pad_h, int pad_w) {
    const int oh = (x.h + 2 * pad_h - k.k_h) / stride + 1;
    const int ow = (x.w + 2 * pad_w - k.k_w) / stride + 1;
    sclm::Tensor<T> out(x.n, k.c_out, oh, ow);
    for (int n = 0; n < x.n; ++n)
        for (int o = 0; o < k.c_out; ++o)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    T acc = k.bias[o];
                    for (int i = 0; i < k.c_in; ++i)
                        for (int u = 0; u < k.k_h; ++u)
                            for (int v = 0; v < k.k_w; ++v) {
                                const int iy = oy * stride + u - pad_h;
                                const int ix = ox * stride + v - pad_w;
                                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                                acc += x.at(n, i, iy, ix) * k.wat(o, i, u, v);
                            }
                    out.at(n, o, oy, ox) = acc;
                }
    return out;
}

template <typename T>
sclm::Tensor<T> batch_norm_infer_naive(const sclm::Tensor<T>& x,
                                       const sclm::BNParams<T>& p) {
    sclm::Tensor<T> out(x.n, x.c, x.h, x.w);
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c)
            for (int y = 0; y < x.h; ++y)
                for (int w = 0; w < x.w; ++w)
                    out.at(n, c, y, w) =
                        (x.at(n, c, y, w) - p.mu[c]) * (p.gamma[c] / p.sigma[c]) +
                        p.beta[c];
    return out;
}

template <typename T>
sclm::Tensor<T> max_pool_same_naive(const sclm::Tensor<T>& x, int k) {
    const int r = k / 2;
    sclm::Tensor<T> out(x.n, x.c, x.h, x.w);
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c)
            for (int y = 0; y < x.h; ++y)
                for (int w = 0; w < x.w; ++w) {
                    T m = x.at(n, c, y, w);
                    for (int u = -r; u <= r; ++u)
                        for (int v = -r; v <= r; ++v) {
                            const int iy = std::clamp(y + u, 0, x.h - 1);
                            const int ix = std::clamp(w + v, 0, x.w - 1);
                            m = std::max(m, x.at(n, c, iy, ix));
                        }
                    out.at(n, c, y, w) = m;
                }
    return out;
}

template <typename T>
sclm::Tensor<T> avg_pool_naive(const sclm::Tensor<T>& x, int k, int stride, int pad) {
    const int oh = (x.h + 2 * pad - k) / stride + 1;
    const int ow = (x.w + 2 * pad - k) / stride + 1;
    sclm::Tensor<T> out(x.n, x.c, oh, ow);
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    T s = T(0);
                    for (int u = 0; u < k; ++u)
                        for (int v = 0; v < k; ++v) {
                            const int iy = oy * stride + u - pad;
                            const int ix = ox * stride + v - pad;
                            if (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w)
                                s += x.at(n, c, iy, ix);
                        }
                    out.at(n, c, oy, ox) = s / (T(k) * T(k));
                }
    return out;
}

template <typename T>
T l1_naive(const sclm::Tensor<T>& a, const sclm::Tensor<T>& b) {
    T s = T(0);
    for (size_t j = 0; j < a.size(); ++j) s += std::abs(a.data[j] - b.data[j]);
    return s / T(a.size());
}

}  // namespace oracle
