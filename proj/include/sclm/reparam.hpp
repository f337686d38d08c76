#pragma once

#include "sclm/glle.hpp"
#include "sclm/tensor.hpp"

namespace sclm {

// Identity (Dirac) kernel: center tap 1 on matching channels.
template <typename T>
ConvKernel<T> dirac_kernel(int c, int k = 3) {
    if (k % 2 == 0) detail::fail("dirac_kernel: k must be odd");
    ConvKernel<T> out(c, c, k, k);
    for (int o = 0; o < c; ++o) out.wat(o, o, k / 2, k / 2) = T(1);
    return out;
}

// Fold batch norm (inference statistics) into the preceding conv:
// W' = (gamma/sigma) * W, b' = (b0 - mu) * (gamma/sigma) + beta.
template <typename T>
ConvKernel<T> fuse_bn(const ConvKernel<T>& k, const BNParams<T>& p) {
    if (k.c_out != p.channels()) detail::fail("fuse_bn: channel mismatch");
    for (const T s : p.sigma)
        if (!(s > T(0))) detail::fail("fuse_bn: sigma must be positive");
    ConvKernel<T> out = k;
    for (int o = 0; o < k.c_out; ++o) {
        const T scale = p.gamma[o] / p.sigma[o];
        for (int i = 0; i < k.c_in; ++i)
            for (int u = 0; u < k.k_h; ++u)
                for (int v = 0; v < k.k_w; ++v) out.wat(o, i, u, v) *= scale;
        out.bias[o] = (k.bias[o] - p.mu[o]) * scale + p.beta[o];
    }
    return out;
}

// Merge a 1x1 conv followed by a KxK conv into a single KxK conv. The 1x1 is
// a channel-mixing matrix, so the merged weight is the channel composition
// and the first bias is pushed through every tap of the second kernel.
template <typename T>
ConvKernel<T> fuse_sequential(const ConvKernel<T>& k1, const ConvKernel<T>& k3) {
    if (k1.k_h != 1 || k1.k_w != 1) detail::fail("fuse_sequential: first conv must be 1x1");
    if (k1.c_out != k3.c_in) detail::fail("fuse_sequential: channel mismatch");
    ConvKernel<T> out(k3.c_out, k1.c_in, k3.k_h, k3.k_w);
    for (int o = 0; o < k3.c_out; ++o) {
        T b = k3.bias[o];
        for (int m = 0; m < k3.c_in; ++m) {
            T tap_sum = T(0);
            for (int u = 0; u < k3.k_h; ++u)
                for (int v = 0; v < k3.k_w; ++v) {
                    const T w3 = k3.wat(o, m, u, v);
                    tap_sum += w3;
                    for (int i = 0; i < k1.c_in; ++i)
                        out.wat(o, i, u, v) += w3 * k1.wat(m, i, 0, 0);
                }
            b += tap_sum * k1.bias[m];
        }
        out.bias[o] = b;
    }
    return out;
}

// Average pooling as a conv with fixed weights 1/k^2 on the diagonal planes.
template <typename T>
ConvKernel<T> avgpool_to_kernel(int c, int k) {
    ConvKernel<T> out(c, c, k, k);
    const T v = T(1) / (static_cast<T>(k) * static_cast<T>(k));
    for (int o = 0; o < c; ++o)
        for (int u = 0; u < k; ++u)
            for (int w = 0; w < k; ++w) out.wat(o, o, u, w) = v;
    return out;
}

// Embed a smaller kernel at the center of a 3x3 one (zero elsewhere).
template <typename T>
ConvKernel<T> pad_to_3x3(const ConvKernel<T>& k) {
    if (k.k_h > 3 || k.k_w > 3) detail::fail("pad_to_3x3: kernel larger than 3x3");
    if (k.k_h % 2 == 0 || k.k_w % 2 == 0) detail::fail("pad_to_3x3: kernel sides must be odd");
    if (k.k_h == 3 && k.k_w == 3) return k;
    ConvKernel<T> out(k.c_out, k.c_in, 3, 3);
    out.bias = k.bias;
    const int du = (3 - k.k_h) / 2, dv = (3 - k.k_w) / 2;
    for (int o = 0; o < k.c_out; ++o)
        for (int i = 0; i < k.c_in; ++i)
            for (int u = 0; u < k.k_h; ++u)
                for (int v = 0; v < k.k_w; ++v)
                    out.wat(o, i, u + du, v + dv) = k.wat(o, i, u, v);
    return out;
}

// Parallel branches sum: elementwise over weights and biases.
template <typename T>
ConvKernel<T> fuse_parallel(const std::vector<ConvKernel<T>>& ks) {
    if (ks.empty()) detail::fail("fuse_parallel: no kernels");
    ConvKernel<T> out = ks[0];
    for (size_t j = 1; j < ks.size(); ++j) {
        const ConvKernel<T>& k = ks[j];
        if (k.c_out != out.c_out || k.c_in != out.c_in || k.k_h != out.k_h ||
            k.k_w != out.k_w)
            detail::fail("fuse_parallel: kernel shapes differ");
        for (size_t i = 0; i < out.weight.size(); ++i) out.weight[i] += k.weight[i];
        for (size_t i = 0; i < out.bias.size(); ++i) out.bias[i] += k.bias[i];
    }
    return out;
}

// Fold an identity skip connection into the kernel weights.
template <typename T>
ConvKernel<T> fold_residual(const ConvKernel<T>& k) {
    if (k.c_out != k.c_in) detail::fail("fold_residual: kernel must map c -> c");
    if (k.k_h != 3 || k.k_w != 3) detail::fail("fold_residual: expected a 3x3 kernel");
    ConvKernel<T> out = k;
    for (int o = 0; o < k.c_out; ++o) out.wat(o, o, 1, 1) += T(1);
    return out;
}

// Collapse one branch (conv sequence -> optional avg pool -> BN) into an
// equivalent 3x3 kernel.
template <typename T>
ConvKernel<T> collapse_branch(const Branch<T>& b) {
    if (b.convs.empty()) detail::fail("collapse_branch: empty conv sequence");
    ConvKernel<T> k = b.convs[0].kernel;
    for (size_t j = 1; j < b.convs.size(); ++j)
        k = fuse_sequential(k, b.convs[j].kernel);
    if (b.has_avg_pool)
        k = fuse_sequential(k, avgpool_to_kernel<T>(k.c_out, b.pool_k));
    k = fuse_bn(k, b.bn);
    return pad_to_3x3(k);
}

// Full structural re-parameterization: every branch becomes a 3x3 kernel,
// the kernels are summed and the residual connection is folded in.
template <typename T>
FusedModel<T> collapse(const BranchModel<T>& m) {
    if (m.branches.empty()) detail::fail("collapse: model has no branches");
    std::vector<ConvKernel<T>> ks;
    ks.reserve(m.branches.size());
    for (const Branch<T>& b : m.branches) ks.push_back(collapse_branch(b));
    ConvKernel<T> k = fuse_parallel(ks);
    if (m.residual) k = fold_residual(k);
    return FusedModel<T>{std::move(k), m.curve};
}

}  // namespace sclm
