#pragma once

#include <algorithm>
#include <vector>

#include "sclm/tensor.hpp"

namespace sclm {

// Quadratic adjustment curve C(x) = alpha*x^2 + beta*x + gamma. The three
// scalars are shared across all pixels and trained jointly with the
// convolution branches.
template <typename T>
struct CurveParams {
    T alpha = T(0);
    T beta = T(0);
    T gamma = T(1);
};

// Published starting point: C(0)=1.5, C(0.5)=1, C(1)=0.8, so relatively dark
// regions are amplified and bright ones attenuated.
template <typename T>
CurveParams<T> curve_init() {
    return {T(0.6), T(-1.3), T(1.5)};
}

// BT.601 full-range luma.
template <typename T>
Tensor<T> rgb_to_y(const Tensor<T>& x) {
    if (x.c != 3) detail::fail("rgb_to_y: expected 3-channel RGB input");
    Tensor<T> y(x.n, 1, x.h, x.w);
    for (int in = 0; in < x.n; ++in) {
        const T* r = &x.at(in, 0, 0, 0);
        const T* g = &x.at(in, 1, 0, 0);
        const T* b = &x.at(in, 2, 0, 0);
        T* py = &y.at(in, 0, 0, 0);
        for (size_t j = 0; j < x.plane(); ++j)
            py[j] = T(0.299) * r[j] + T(0.587) * g[j] + T(0.114) * b[j];
    }
    return y;
}

// Lower median: deterministic for even pixel counts.
template <typename T>
T lower_median(std::vector<T>& v) {
    const size_t mid = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    return v[mid];
}

// Per-pixel deviation of the Y channel from the whole-image median.
template <typename T>
Tensor<T> condition_map(const Tensor<T>& y) {
    if (y.c != 1) detail::fail("condition_map: expected single-channel input");
    Tensor<T> out(y.n, 1, y.h, y.w);
    std::vector<T> scratch(y.plane());
    for (int in = 0; in < y.n; ++in) {
        const T* p = &y.at(in, 0, 0, 0);
        std::copy(p, p + y.plane(), scratch.begin());
        const T med = lower_median(scratch);
        T* po = &out.at(in, 0, 0, 0);
        for (size_t j = 0; j < y.plane(); ++j) po[j] = p[j] - med;
    }
    return out;
}

// Min-max normalization per image. A constant map normalizes to 0.5, which
// the initial curve maps to a neutral multiplier of 1.
template <typename T>
Tensor<T> normalize_map(const Tensor<T>& m) {
    Tensor<T> out(m.n, m.c, m.h, m.w);
    const size_t per_image = m.size() / m.n;
    for (int in = 0; in < m.n; ++in) {
        const T* p = &m.data[static_cast<size_t>(in) * per_image];
        T* po = &out.data[static_cast<size_t>(in) * per_image];
        const auto [lo, hi] = std::minmax_element(p, p + per_image);
        if (*hi == *lo) {
            std::fill(po, po + per_image, T(0.5));
        } else {
            const T inv = T(1) / (*hi - *lo);
            for (size_t j = 0; j < per_image; ++j) po[j] = (p[j] - *lo) * inv;
        }
    }
    return out;
}

template <typename T>
Tensor<T> smooth_map(const Tensor<T>& m, int k) {
    return max_pool_same(m, k);
}

template <typename T>
Tensor<T> curve_apply(const Tensor<T>& m, const CurveParams<T>& p) {
    Tensor<T> out(m.n, m.c, m.h, m.w);
    for (size_t j = 0; j < m.size(); ++j) {
        const T v = m.data[j];
        out.data[j] = p.alpha * v * v + p.beta * v + p.gamma;
    }
    return out;
}

// Multiply the coarse result by the adaptation map (broadcast across the
// color channels) and clamp to valid pixel range.
template <typename T>
Tensor<T> fuse_output(const Tensor<T>& coarse, const Tensor<T>& cmap) {
    return clamp(mul(coarse, cmap), T(0), T(1));
}

}  // namespace sclm
