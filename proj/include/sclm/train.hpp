#pragma once

#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <utility>

#include "sclm/enhance.hpp"

namespace sclm {

template <typename T>
struct TrainConfig {
    T lr_init = T(2e-4);
    T lr_final = T(1e-6);   // cosine-annealed down to this
    T adam_beta1 = T(0.9);
    T adam_beta2 = T(0.999);
    T adam_eps = T(1e-8);
    T bn_momentum = T(0.1);
    int crop = 64;          // desk scale; the reference recipe uses 256
    int batch = 4;          // desk scale; the reference recipe uses 16
    int64_t total_steps = 2000;
    bool augment = true;
    uint64_t seed = 1;
    int pool_k = 7;
    T div_eps = T(1e-4);
};

template <typename T>
T l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    if (!pred.same_shape(target)) detail::fail("l1_loss: shape mismatch");
    T s = T(0);
    for (size_t j = 0; j < pred.size(); ++j)
        s += std::abs(pred.data[j] - target.data[j]);
    return s / static_cast<T>(pred.size());
}

template <typename T>
T cosine_lr(int64_t step, int64_t total, T lr_init, T lr_final) {
    if (total < 1) detail::fail("cosine_lr: total must be >= 1");
    const T phase = static_cast<T>(std::numbers::pi) * static_cast<T>(step) /
                    static_cast<T>(total);
    return lr_final + T(0.5) * (lr_init - lr_final) * (T(1) + std::cos(phase));
}

// Flat view over every trainable scalar, in a fixed order: per branch the
// conv weights and biases, then BN gamma and beta; the curve last. Running
// BN statistics are not trainable.
template <typename T>
std::vector<T*> trainable_params(BranchModel<T>& m) {
    std::vector<T*> ps;
    for (Branch<T>& b : m.branches) {
        for (BranchConv<T>& bc : b.convs) {
            for (T& v : bc.kernel.weight) ps.push_back(&v);
            for (T& v : bc.kernel.bias) ps.push_back(&v);
        }
        for (T& v : b.bn.gamma) ps.push_back(&v);
        for (T& v : b.bn.beta) ps.push_back(&v);
    }
    ps.push_back(&m.curve.alpha);
    ps.push_back(&m.curve.beta);
    ps.push_back(&m.curve.gamma);
    return ps;
}

// Gradient accumulators plus Adam moments, all aligned with
// trainable_params order.
template <typename T>
struct GradState {
    std::vector<T> grad;
    std::vector<T> m, v;
    int64_t step = 0;
    T loss = T(0);
};

template <typename T>
void adam_step(GradState<T>& g, const std::vector<T*>& params, T lr,
               const TrainConfig<T>& cfg) {
    if (g.grad.size() != params.size()) detail::fail("adam_step: size mismatch");
    if (g.m.size() != params.size()) {
        g.m.assign(params.size(), T(0));
        g.v.assign(params.size(), T(0));
        g.step = 0;
    }
    ++g.step;
    const T c1 = T(1) - std::pow(cfg.adam_beta1, static_cast<T>(g.step));
    const T c2 = T(1) - std::pow(cfg.adam_beta2, static_cast<T>(g.step));
    for (size_t i = 0; i < params.size(); ++i) {
        const T gi = g.grad[i];
        g.m[i] = cfg.adam_beta1 * g.m[i] + (T(1) - cfg.adam_beta1) * gi;
        g.v[i] = cfg.adam_beta2 * g.v[i] + (T(1) - cfg.adam_beta2) * gi * gi;
        const T mhat = g.m[i] / c1;
        const T vhat = g.v[i] / c2;
        *params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
}

namespace detail {

template <typename T>
struct BranchCtx {
    std::vector<Tensor<T>> conv_in;  // input to each conv
    Tensor<T> pool_in;
    Tensor<T> bn_in;
    std::vector<T> mu, var;          // batch statistics used by the forward
};

template <typename T>
struct ForwardCtx {
    Tensor<T> x;
    std::vector<BranchCtx<T>> branches;
    Tensor<T> illum;
    Tensor<T> coarse_pre, coarse;
    Tensor<T> cond;                  // adaptation input (no gradient path)
    Tensor<T> en_pre, out;
    T loss = T(0);
};

template <typename T>
Tensor<T> bn_train_forward(const Tensor<T>& x, const BNParams<T>& p,
                           std::vector<T>& mu, std::vector<T>& var) {
    batch_stats(x, mu, var);
    Tensor<T> out(x.n, x.c, x.h, x.w);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const T inv = T(1) / std::sqrt(var[ic] + p.eps);
            const T scale = p.gamma[ic] * inv;
            const T shift = p.beta[ic] - mu[ic] * scale;
            const T* px = &x.at(in, ic, 0, 0);
            T* po = &out.at(in, ic, 0, 0);
            for (size_t j = 0; j < x.plane(); ++j) po[j] = px[j] * scale + shift;
        }
    return out;
}

template <typename T>
void bn_update_running(BNParams<T>& p, const std::vector<T>& mu,
                       const std::vector<T>& var, T momentum) {
    for (int ic = 0; ic < p.channels(); ++ic) {
        const T run_var = p.sigma[ic] * p.sigma[ic] - p.eps;
        const T new_var = (T(1) - momentum) * run_var + momentum * var[ic];
        p.mu[ic] = (T(1) - momentum) * p.mu[ic] + momentum * mu[ic];
        p.sigma[ic] = std::sqrt(new_var + p.eps);
    }
}

// Forward pass that records everything the reverse sweep needs.
template <typename T>
T forward_train(const Tensor<T>& x, const Tensor<T>& target, BranchModel<T>& m,
                const TrainConfig<T>& cfg, ForwardCtx<T>& ctx, bool update_running) {
    check_unit_range(x, "forward_train");
    if (!x.same_shape(target)) fail("forward_train: input/target shape mismatch");
    ctx.x = x;
    ctx.branches.assign(m.branches.size(), BranchCtx<T>{});

    Tensor<T> s = x;  // residual
    for (size_t bi = 0; bi < m.branches.size(); ++bi) {
        Branch<T>& b = m.branches[bi];
        BranchCtx<T>& bc = ctx.branches[bi];
        Tensor<T> t = x;
        for (const BranchConv<T>& cv : b.convs) {
            bc.conv_in.push_back(t);
            t = conv2d(t, cv.kernel, 1, cv.pad_h, cv.pad_w);
        }
        if (b.has_avg_pool) {
            bc.pool_in = t;
            t = avg_pool(t, b.pool_k, 1, 0);
        }
        bc.bn_in = t;
        t = bn_train_forward(t, b.bn, bc.mu, bc.var);
        if (update_running) bn_update_running(b.bn, bc.mu, bc.var, cfg.bn_momentum);
        s = add(s, t);
    }

    ctx.illum = sigmoid(s);
    const T eps = cfg.div_eps;
    ctx.coarse_pre = div(x, ctx.illum, eps);
    ctx.coarse = clamp(ctx.coarse_pre, T(0), T(1));
    ctx.cond = adaptation_input(x, cfg.pool_k);
    const Tensor<T> cmap = curve_apply(ctx.cond, m.curve);
    ctx.en_pre = mul(ctx.coarse, cmap);
    ctx.out = clamp(ctx.en_pre, T(0), T(1));
    ctx.loss = l1_loss(ctx.out, target);
    return ctx.loss;
}

// Stride-1 conv gradients.
template <typename T>
void conv_param_grad(const Tensor<T>& gout, const Tensor<T>& xin,
                     const ConvKernel<T>& k, int pad_h, int pad_w,
                     std::vector<T>& dw, std::vector<T>& db) {
    dw.assign(k.weight.size(), T(0));
    db.assign(k.bias.size(), T(0));
    for (int in = 0; in < gout.n; ++in)
        for (int o = 0; o < k.c_out; ++o) {
            T bs = T(0);
            for (int oy = 0; oy < gout.h; ++oy)
                for (int ox = 0; ox < gout.w; ++ox) {
                    const T g = gout.at(in, o, oy, ox);
                    bs += g;
                    for (int i = 0; i < k.c_in; ++i)
                        for (int u = 0; u < k.k_h; ++u) {
                            const int iy = oy + u - pad_h;
                            if (iy < 0 || iy >= xin.h) continue;
                            for (int v = 0; v < k.k_w; ++v) {
                                const int ix = ox + v - pad_w;
                                if (ix < 0 || ix >= xin.w) continue;
                                dw[((static_cast<size_t>(o) * k.c_in + i) * k.k_h + u) * k.k_w + v] +=
                                    g * xin.at(in, i, iy, ix);
                            }
                        }
                }
            db[o] += bs;
        }
}

template <typename T>
Tensor<T> conv_input_grad(const Tensor<T>& gout, const ConvKernel<T>& k,
                          int in_h, int in_w, int pad_h, int pad_w) {
    Tensor<T> dx(gout.n, k.c_in, in_h, in_w);
    for (int in = 0; in < gout.n; ++in)
        for (int o = 0; o < k.c_out; ++o)
            for (int oy = 0; oy < gout.h; ++oy)
                for (int ox = 0; ox < gout.w; ++ox) {
                    const T g = gout.at(in, o, oy, ox);
                    for (int i = 0; i < k.c_in; ++i)
                        for (int u = 0; u < k.k_h; ++u) {
                            const int iy = oy + u - pad_h;
                            if (iy < 0 || iy >= in_h) continue;
                            for (int v = 0; v < k.k_w; ++v) {
                                const int ix = ox + v - pad_w;
                                if (ix < 0 || ix >= in_w) continue;
                                dx.at(in, i, iy, ix) += g * k.wat(o, i, u, v);
                            }
                        }
                }
    return dx;
}

template <typename T>
Tensor<T> avg_pool_input_grad(const Tensor<T>& gout, int k, int in_h, int in_w) {
    Tensor<T> dx(gout.n, gout.c, in_h, in_w);
    const T inv = T(1) / (static_cast<T>(k) * static_cast<T>(k));
    for (int in = 0; in < gout.n; ++in)
        for (int ic = 0; ic < gout.c; ++ic)
            for (int oy = 0; oy < gout.h; ++oy)
                for (int ox = 0; ox < gout.w; ++ox) {
                    const T g = gout.at(in, ic, oy, ox) * inv;
                    for (int u = 0; u < k; ++u)
                        for (int v = 0; v < k; ++v)
                            dx.at(in, ic, oy + u, ox + v) += g;
                }
    return dx;
}

// Train-mode batch-norm backward: gradients flow through the batch
// statistics as well as the affine parameters.
template <typename T>
Tensor<T> bn_train_backward(const Tensor<T>& gout, const Tensor<T>& xin,
                            const BNParams<T>& p, const std::vector<T>& mu,
                            const std::vector<T>& var, std::vector<T>& dgamma,
                            std::vector<T>& dbeta) {
    dgamma.assign(p.channels(), T(0));
    dbeta.assign(p.channels(), T(0));
    Tensor<T> dx(xin.n, xin.c, xin.h, xin.w);
    const T m = static_cast<T>(static_cast<size_t>(xin.n) * xin.h * xin.w);
    for (int ic = 0; ic < xin.c; ++ic) {
        const T inv = T(1) / std::sqrt(var[ic] + p.eps);
        T sum_g = T(0), sum_gx = T(0);
        for (int in = 0; in < xin.n; ++in) {
            const T* px = &xin.at(in, ic, 0, 0);
            const T* pg = &gout.at(in, ic, 0, 0);
            for (size_t j = 0; j < xin.plane(); ++j) {
                const T xh = (px[j] - mu[ic]) * inv;
                sum_g += pg[j];
                sum_gx += pg[j] * xh;
            }
        }
        dgamma[ic] = sum_gx;
        dbeta[ic] = sum_g;
        const T scale = p.gamma[ic] * inv;
        for (int in = 0; in < xin.n; ++in) {
            const T* px = &xin.at(in, ic, 0, 0);
            const T* pg = &gout.at(in, ic, 0, 0);
            T* pd = &dx.at(in, ic, 0, 0);
            for (size_t j = 0; j < xin.plane(); ++j) {
                const T xh = (px[j] - mu[ic]) * inv;
                pd[j] = scale * (pg[j] - sum_g / m - xh * sum_gx / m);
            }
        }
    }
    return dx;
}

}  // namespace detail

// Reverse-mode gradients of the L1 training loss with respect to every
// trainable parameter. Clamped regions and the epsilon-floored division get
// zero gradient outside their active range; the condition-map path carries
// no gradient because it depends only on the input.
template <typename T>
GradState<T> backward(const Tensor<T>& x, const Tensor<T>& target,
                      BranchModel<T>& m, const TrainConfig<T>& cfg = {},
                      bool update_running = false) {
    detail::ForwardCtx<T> ctx;
    detail::forward_train(x, target, m, cfg, ctx, update_running);

    GradState<T> gs;
    gs.loss = ctx.loss;

    const size_t total = ctx.out.size();
    Tensor<T> gen(ctx.out.n, ctx.out.c, ctx.out.h, ctx.out.w);
    for (size_t j = 0; j < total; ++j) {
        const T d = ctx.out.data[j] - target.data[j];
        T g = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
        const T pre = ctx.en_pre.data[j];
        if (pre < T(0) || pre > T(1)) g = T(0);
        gen.data[j] = g / static_cast<T>(total);
    }

    // en_pre = coarse * C with C broadcast over channels:
    // d(coarse) = g * C, d(C) = sum over channels of g * coarse
    Tensor<T> dcoarse(gen.n, gen.c, gen.h, gen.w);
    Tensor<T> dcmap(gen.n, 1, gen.h, gen.w);
    for (int in = 0; in < gen.n; ++in) {
        const T* pm = &ctx.cond.at(in, 0, 0, 0);
        T* pdm = &dcmap.at(in, 0, 0, 0);
        for (int ic = 0; ic < gen.c; ++ic) {
            const T* pg = &gen.at(in, ic, 0, 0);
            const T* pco = &ctx.coarse.at(in, ic, 0, 0);
            T* pdc = &dcoarse.at(in, ic, 0, 0);
            for (size_t j = 0; j < gen.plane(); ++j) {
                const T v = pm[j];
                pdc[j] = pg[j] * (m.curve.alpha * v * v + m.curve.beta * v + m.curve.gamma);
                pdm[j] += pg[j] * pco[j];
            }
        }
    }

    // curve gradients from dcmap
    T da = T(0), db = T(0), dg = T(0);
    for (int in = 0; in < gen.n; ++in) {
        const T* pm = &ctx.cond.at(in, 0, 0, 0);
        const T* pd = &dcmap.at(in, 0, 0, 0);
        for (size_t j = 0; j < gen.plane(); ++j) {
            da += pd[j] * pm[j] * pm[j];
            db += pd[j] * pm[j];
            dg += pd[j];
        }
    }

    // coarse = clamp(x / max(illum, eps), 0, 1)
    Tensor<T> dillum(gen.n, gen.c, gen.h, gen.w);
    const T eps = cfg.div_eps;
    for (size_t j = 0; j < total; ++j) {
        const T pre = ctx.coarse_pre.data[j];
        T g = dcoarse.data[j];
        if (pre < T(0) || pre > T(1)) g = T(0);
        const T il = ctx.illum.data[j];
        if (il > eps) {
            dillum.data[j] = g * (-ctx.x.data[j] / (il * il));
        } else {
            dillum.data[j] = T(0);
        }
    }

    // illum = sigmoid(s); ds fans out to every branch (residual is input-only)
    Tensor<T> ds(gen.n, gen.c, gen.h, gen.w);
    for (size_t j = 0; j < total; ++j) {
        const T y = ctx.illum.data[j];
        ds.data[j] = dillum.data[j] * y * (T(1) - y);
    }

    // walk branches in flatten order
    for (size_t bi = 0; bi < m.branches.size(); ++bi) {
        Branch<T>& b = m.branches[bi];
        detail::BranchCtx<T>& bc = ctx.branches[bi];
        std::vector<T> dgamma, dbeta;
        Tensor<T> g = detail::bn_train_backward(ds, bc.bn_in, b.bn, bc.mu, bc.var,
                                                dgamma, dbeta);
        if (b.has_avg_pool)
            g = detail::avg_pool_input_grad(g, b.pool_k, bc.pool_in.h, bc.pool_in.w);

        std::vector<std::vector<T>> dws(b.convs.size()), dbs(b.convs.size());
        for (int ci = static_cast<int>(b.convs.size()) - 1; ci >= 0; --ci) {
            const BranchConv<T>& cv = b.convs[ci];
            detail::conv_param_grad(g, bc.conv_in[ci], cv.kernel, cv.pad_h, cv.pad_w,
                                    dws[ci], dbs[ci]);
            if (ci > 0)
                g = detail::conv_input_grad(g, cv.kernel, bc.conv_in[ci].h,
                                            bc.conv_in[ci].w, cv.pad_h, cv.pad_w);
        }
        for (size_t ci = 0; ci < b.convs.size(); ++ci) {
            gs.grad.insert(gs.grad.end(), dws[ci].begin(), dws[ci].end());
            gs.grad.insert(gs.grad.end(), dbs[ci].begin(), dbs[ci].end());
        }
        gs.grad.insert(gs.grad.end(), dgamma.begin(), dgamma.end());
        gs.grad.insert(gs.grad.end(), dbeta.begin(), dbeta.end());
    }
    gs.grad.push_back(da);
    gs.grad.push_back(db);
    gs.grad.push_back(dg);
    return gs;
}

// Loss-only evaluation on a copy of the model (no running-stat side effects);
// the finite-difference oracle drives this.
template <typename T>
T training_loss(const Tensor<T>& x, const Tensor<T>& target,
                const BranchModel<T>& m, const TrainConfig<T>& cfg = {}) {
    BranchModel<T> copy = m;
    detail::ForwardCtx<T> ctx;
    return detail::forward_train(x, target, copy, cfg, ctx, false);
}

template <typename T>
void augment_pair(Tensor<T>& low, Tensor<T>& target, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> coin(0, 1), quarter(0, 3);
    if (coin(rng)) {
        low = flip_horizontal(low);
        target = flip_horizontal(target);
    }
    if (coin(rng)) {
        low = flip_vertical(low);
        target = flip_vertical(target);
    }
    const int q = quarter(rng);
    if (q) {
        low = rot90(low, q);
        target = rot90(target, q);
    }
}

template <typename T>
void augment_pair(Tensor<T>& low, Tensor<T>& target, uint64_t seed) {
    std::mt19937_64 rng(seed);
    augment_pair(low, target, rng);
}

using StepCallback = std::function<void(int64_t step, double lr, double loss)>;

// Supervised training loop: random crops, paired augmentation, Adam with
// cosine annealing. Deterministic for a fixed seed.
template <typename T>
BranchModel<T> train(const std::vector<std::pair<Tensor<T>, Tensor<T>>>& pairs,
                     Topology topo, const TrainConfig<T>& cfg,
                     const StepCallback& on_step = {}) {
    if (pairs.empty()) detail::fail("train: empty dataset");
    if (!(cfg.lr_final < cfg.lr_init)) detail::fail("train: lr_final must be < lr_init");
    if (cfg.total_steps < 1) detail::fail("train: total_steps must be >= 1");
    if (cfg.batch < 1) detail::fail("train: batch must be >= 1");
    for (const auto& [low, tgt] : pairs) {
        if (!low.same_shape(tgt)) detail::fail("train: pair shape mismatch");
        if (cfg.crop > low.h || cfg.crop > low.w)
            detail::fail("train: crop exceeds image size");
    }

    BranchModel<T> model = build_topology<T>(topo, cfg.seed);
    std::vector<T*> params = trainable_params(model);
    GradState<T> state;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<size_t> pick(0, pairs.size() - 1);

    int bad_steps = 0;
    for (int64_t step = 0; step < cfg.total_steps; ++step) {
        Tensor<T> xb(cfg.batch, 3, cfg.crop, cfg.crop);
        Tensor<T> tb(cfg.batch, 3, cfg.crop, cfg.crop);
        for (int s = 0; s < cfg.batch; ++s) {
            const auto& [low, tgt] = pairs[pick(rng)];
            std::uniform_int_distribution<int> ry(0, low.h - cfg.crop);
            std::uniform_int_distribution<int> rx(0, low.w - cfg.crop);
            const int y0 = ry(rng), x0 = rx(rng);
            Tensor<T> cl = crop(low, y0, x0, cfg.crop, cfg.crop);
            Tensor<T> ct = crop(tgt, y0, x0, cfg.crop, cfg.crop);
            if (cfg.augment) augment_pair(cl, ct, rng);
            std::memcpy(&xb.at(s, 0, 0, 0), cl.data.data(), sizeof(T) * cl.size());
            std::memcpy(&tb.at(s, 0, 0, 0), ct.data.data(), sizeof(T) * ct.size());
        }

        const T lr = cosine_lr(step, cfg.total_steps, cfg.lr_init, cfg.lr_final);
        GradState<T> g = backward(xb, tb, model, cfg, true);
        if (!std::isfinite(static_cast<double>(g.loss))) {
            std::fprintf(stderr,
                         "train: non-finite loss at step %lld (lr=%g); step rejected\n",
                         static_cast<long long>(step), static_cast<double>(lr));
            if (++bad_steps >= 10)
                throw std::runtime_error("train: loss diverged (10 consecutive non-finite steps)");
            continue;
        }
        bad_steps = 0;
        state.grad = std::move(g.grad);
        adam_step(state, params, lr, cfg);
        if (on_step) on_step(step, static_cast<double>(lr), static_cast<double>(g.loss));
    }
    return model;
}

}  // namespace sclm
