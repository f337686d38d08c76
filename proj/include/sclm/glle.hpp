#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sclm/local_adapt.hpp"
#include "sclm/tensor.hpp"

namespace sclm {

enum class Topology { Plain, DiverseBranch, AsymmetricBlock, TripleDuplicate };

inline std::string topology_name(Topology t) {
    switch (t) {
        case Topology::Plain: return "plain";
        case Topology::DiverseBranch: return "db";
        case Topology::AsymmetricBlock: return "ab";
        case Topology::TripleDuplicate: return "td";
    }
    return "?";
}

inline Topology parse_topology(const std::string& s) {
    if (s == "plain") return Topology::Plain;
    if (s == "db") return Topology::DiverseBranch;
    if (s == "ab") return Topology::AsymmetricBlock;
    if (s == "td") return Topology::TripleDuplicate;
    detail::fail("unknown topology '" + s + "' (expected plain|db|ab|td)");
    return Topology::Plain;
}

template <typename T>
struct BranchConv {
    ConvKernel<T> kernel;
    int pad_h = 0, pad_w = 0;
};

// One parallel branch: a short conv sequence, an optional unpadded average
// pool, then batch norm. Sequences put the padding on the leading 1x1 so the
// whole branch collapses into a padded 3x3 conv exactly, borders included.
template <typename T>
struct Branch {
    std::vector<BranchConv<T>> convs;
    bool has_avg_pool = false;
    int pool_k = 3;
    BNParams<T> bn;
};

// Training-time multi-branch topology. The residual connection and the curve
// parameters are part of the model so the whole thing trains end to end.
template <typename T>
struct BranchModel {
    Topology topology = Topology::DiverseBranch;
    std::vector<Branch<T>> branches;
    bool residual = true;
    CurveParams<T> curve = curve_init<T>();
};

// Inference model: one 3x3 conv (residual already folded in) plus the curve.
// 84 conv scalars + 3 curve scalars = 87 parameters.
template <typename T>
struct FusedModel {
    ConvKernel<T> kernel;
    CurveParams<T> curve;
};

namespace detail {

template <typename T>
ConvKernel<T> random_conv(int co, int ci, int kh, int kw, std::mt19937& rng) {
    ConvKernel<T> k(co, ci, kh, kw);
    const T bound = T(1) / std::sqrt(static_cast<T>(ci * kh * kw));
    std::uniform_real_distribution<double> dist(-double(bound), double(bound));
    for (T& v : k.weight) v = static_cast<T>(dist(rng));
    return k;
}

}  // namespace detail

// Fan-in-scaled uniform weight init, zero biases, identity batch norm.
template <typename T>
BranchModel<T> build_topology(Topology t, uint64_t seed, int pool_k = 3) {
    if (pool_k != 1 && pool_k != 3)
        detail::fail("build_topology: avg-pool branch must use k in {1,3}");
    std::mt19937 rng(static_cast<uint32_t>(seed));
    BranchModel<T> m;
    m.topology = t;
    m.curve = curve_init<T>();

    auto conv = [&](int kh, int kw, int ph, int pw) {
        return BranchConv<T>{detail::random_conv<T>(3, 3, kh, kw, rng), ph, pw};
    };
    auto push = [&](std::vector<BranchConv<T>> convs, bool pool = false) {
        Branch<T> b;
        b.convs = std::move(convs);
        b.has_avg_pool = pool;
        b.pool_k = pool_k;
        b.bn = BNParams<T>(3);
        m.branches.push_back(std::move(b));
    };

    switch (t) {
        case Topology::Plain:
            push({conv(3, 3, 1, 1)});
            break;
        case Topology::DiverseBranch:
            push({conv(3, 3, 1, 1)});
            push({conv(1, 1, 0, 0)});
            push({conv(1, 1, 1, 1), conv(3, 3, 0, 0)});
            push({conv(1, 1, (pool_k - 1) / 2, (pool_k - 1) / 2)}, true);
            break;
        case Topology::AsymmetricBlock:
            push({conv(3, 3, 1, 1)});
            push({conv(1, 3, 0, 1)});
            push({conv(3, 1, 1, 0)});
            break;
        case Topology::TripleDuplicate:
            push({conv(3, 3, 1, 1)});
            push({conv(3, 3, 1, 1)});
            push({conv(3, 3, 1, 1)});
            break;
    }
    return m;
}

template <typename T>
Tensor<T> branch_forward(const Tensor<T>& x, Branch<T>& b, BNMode mode) {
    Tensor<T> t = x;
    for (const BranchConv<T>& bc : b.convs)
        t = conv2d(t, bc.kernel, 1, bc.pad_h, bc.pad_w);
    if (b.has_avg_pool) t = avg_pool(t, b.pool_k, 1, 0);
    return batch_norm(t, b.bn, mode);
}

namespace detail {

template <typename T>
void check_unit_range(const Tensor<T>& x, const char* who) {
    if (x.c != 3) fail(std::string(who) + ": expected 3-channel input");
    for (const T v : x.data)
        if (!(v >= T(0) && v <= T(1)))
            fail(std::string(who) + ": input values must lie in [0,1]");
}

}  // namespace detail

// Pre-activation branch sum plus residual. Train mode updates BN running
// statistics as a side effect.
template <typename T>
Tensor<T> branch_sum(const Tensor<T>& x, BranchModel<T>& m, BNMode mode) {
    Tensor<T> s = branch_forward(x, m.branches[0], mode);
    for (size_t i = 1; i < m.branches.size(); ++i)
        s = add(s, branch_forward(x, m.branches[i], mode));
    if (m.residual) s = add(s, x);
    return s;
}

template <typename T>
Tensor<T> estimate_illumination(const Tensor<T>& x, BranchModel<T>& m, BNMode mode) {
    detail::check_unit_range(x, "estimate_illumination");
    return sigmoid(branch_sum(x, m, mode));
}

template <typename T>
Tensor<T> estimate_illumination(const Tensor<T>& x, const FusedModel<T>& m) {
    detail::check_unit_range(x, "estimate_illumination");
    return sigmoid(conv2d(x, m.kernel, 1, 1, 1));
}

// Retinex division: brighten by the estimated illumination, with an epsilon
// floor on the divisor and the result clamped to [0,1].
template <typename T>
Tensor<T> retinex_divide(const Tensor<T>& x, const Tensor<T>& illum, T eps = T(1e-4)) {
    if (!x.same_shape(illum)) detail::fail("retinex_divide: shape mismatch");
    return clamp(div(x, illum, eps), T(0), T(1));
}

struct ParamCount {
    int64_t conv = 0;
    int64_t bn = 0;
    int64_t curve = 0;
    int64_t total() const { return conv + bn + curve; }
};

template <typename T>
ParamCount count_params(const BranchModel<T>& m) {
    ParamCount pc;
    for (const Branch<T>& b : m.branches) {
        for (const BranchConv<T>& bc : b.convs)
            pc.conv += static_cast<int64_t>(bc.kernel.weight.size() + bc.kernel.bias.size());
        pc.bn += 4 * b.bn.channels();
    }
    pc.curve = 3;
    return pc;
}

template <typename T>
ParamCount count_params(const FusedModel<T>& m) {
    ParamCount pc;
    pc.conv = static_cast<int64_t>(m.kernel.weight.size() + m.kernel.bias.size());
    pc.curve = 3;
    return pc;
}

template <typename U, typename T>
BranchModel<U> model_cast(const BranchModel<T>& m) {
    BranchModel<U> out;
    out.topology = m.topology;
    out.residual = m.residual;
    out.curve = {static_cast<U>(m.curve.alpha), static_cast<U>(m.curve.beta),
                 static_cast<U>(m.curve.gamma)};
    for (const Branch<T>& b : m.branches) {
        Branch<U> nb;
        for (const BranchConv<T>& bc : b.convs)
            nb.convs.push_back({kernel_cast<U>(bc.kernel), bc.pad_h, bc.pad_w});
        nb.has_avg_pool = b.has_avg_pool;
        nb.pool_k = b.pool_k;
        nb.bn = BNParams<U>(b.bn.channels());
        for (int i = 0; i < b.bn.channels(); ++i) {
            nb.bn.mu[i] = static_cast<U>(b.bn.mu[i]);
            nb.bn.sigma[i] = static_cast<U>(b.bn.sigma[i]);
            nb.bn.gamma[i] = static_cast<U>(b.bn.gamma[i]);
            nb.bn.beta[i] = static_cast<U>(b.bn.beta[i]);
        }
        nb.bn.eps = static_cast<U>(b.bn.eps);
        out.branches.push_back(std::move(nb));
    }
    return out;
}

template <typename U, typename T>
FusedModel<U> model_cast(const FusedModel<T>& m) {
    return {kernel_cast<U>(m.kernel),
            CurveParams<U>{static_cast<U>(m.curve.alpha), static_cast<U>(m.curve.beta),
                           static_cast<U>(m.curve.gamma)}};
}

}  // namespace sclm
