#pragma once

#include <random>
#include <string>
#include <vector>

#include "sclm/enhance.hpp"
#include "sclm/train.hpp"

namespace sclm {

template <typename T>
Tensor<T> random_unit_tensor(int n, int c, int h, int w, std::mt19937_64& rng,
                             double lo = 0.0, double hi = 1.0) {
    Tensor<T> t(n, c, h, w);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (T& v : t.data) v = static_cast<T>(dist(rng));
    return t;
}

// Overwrite a freshly built model with plausible post-training parameter
// magnitudes: nontrivial biases, BN statistics and affine terms.
inline void randomize_trained_like(BranchModel<float>& m, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> bias(-0.1, 0.1), mu(-0.5, 0.5),
        sigma(0.5, 2.0), gamma(0.5, 1.5), beta(-0.5, 0.5);
    for (Branch<float>& b : m.branches) {
        for (BranchConv<float>& bc : b.convs)
            for (float& v : bc.kernel.bias) v = static_cast<float>(bias(rng));
        for (int i = 0; i < b.bn.channels(); ++i) {
            b.bn.mu[i] = static_cast<float>(mu(rng));
            b.bn.sigma[i] = static_cast<float>(sigma(rng));
            b.bn.gamma[i] = static_cast<float>(gamma(rng));
            b.bn.beta[i] = static_cast<float>(beta(rng));
        }
    }
}

struct FusionCheck {
    std::string topology;
    double max_err_f32 = 0.0;
    double max_err_f64 = 0.0;
    bool pass(double tol32 = 1e-4, double tol64 = 1e-10) const {
        return max_err_f32 < tol32 && max_err_f64 < tol64;
    }
};

// Multi-branch inference forward vs collapsed single conv, on random
// trained-like parameters, in float32 and in a float64 twin of the same
// numbers.
inline std::vector<FusionCheck> run_fusion_checks(int probes = 100, int hw = 32,
                                                  uint64_t seed = 7) {
    std::vector<FusionCheck> out;
    std::mt19937_64 rng(seed);
    const Topology topos[] = {Topology::Plain, Topology::DiverseBranch,
                              Topology::AsymmetricBlock, Topology::TripleDuplicate};
    for (Topology t : topos) {
        BranchModel<float> mf = build_topology<float>(t, rng());
        randomize_trained_like(mf, rng);
        BranchModel<double> md = model_cast<double>(mf);
        const FusedModel<float> ff = collapse(mf);
        const FusedModel<double> fd = collapse(md);

        FusionCheck chk;
        chk.topology = topology_name(t);
        for (int p = 0; p < probes; ++p) {
            const Tensorf xf = random_unit_tensor<float>(1, 3, hw, hw, rng);
            const Tensord xd = tensor_cast<double>(xf);
            const float e32 = max_abs_diff(estimate_illumination(xf, mf, BNMode::Infer),
                                           estimate_illumination(xf, ff));
            const double e64 = max_abs_diff(estimate_illumination(xd, md, BNMode::Infer),
                                            estimate_illumination(xd, fd));
            chk.max_err_f32 = std::max(chk.max_err_f32, static_cast<double>(e32));
            chk.max_err_f64 = std::max(chk.max_err_f64, e64);
        }
        out.push_back(chk);
    }
    return out;
}

struct GradCheckReport {
    int points = 0;            // accepted parameter points
    int params_per_point = 0;
    int rejected_configs = 0;  // too close to a clamp or L1 kink
    double max_rel_err = 0.0;
    bool pass(double tol = 1e-4) const { return points > 0 && max_rel_err < tol; }
};

namespace detail {

// A configuration qualifies only if every pixel sits safely away from the
// clamp boundaries, the division floor and the L1 kink, so that central
// differences stay on one smooth piece.
template <typename T>
bool away_from_kinks(const ForwardCtx<T>& ctx, const Tensor<T>& target, T div_eps) {
    const T margin = T(5e-4);
    for (size_t j = 0; j < ctx.out.size(); ++j) {
        if (std::abs(ctx.coarse_pre.data[j] - T(1)) < margin) return false;
        if (std::abs(ctx.en_pre.data[j] - T(1)) < margin) return false;
        if (ctx.en_pre.data[j] < margin) return false;
        if (ctx.illum.data[j] < T(2) * div_eps) return false;
        if (std::abs(ctx.out.data[j] - target.data[j]) < margin) return false;
    }
    return true;
}

}  // namespace detail

// Central finite differences (float64, h = 1e-5) against the analytic
// reverse sweep, for every trainable parameter, at `points` random
// parameter points.
inline GradCheckReport run_gradient_checks(int points = 20, uint64_t seed = 11,
                                           Topology topo = Topology::DiverseBranch) {
    GradCheckReport rep;
    std::mt19937_64 rng(seed);
    TrainConfig<double> cfg;
    cfg.pool_k = 5;
    const double h = 1e-5;

    std::uniform_real_distribution<double> bias(-0.05, 0.05), gamma(0.2, 0.6),
        beta(-0.3, 0.3), ca(0.2, 0.6), cb(-0.8, -0.3), cg(0.9, 1.1);

    while (rep.points < points) {
        BranchModel<double> m = build_topology<double>(topo, rng());
        for (Branch<double>& b : m.branches) {
            for (BranchConv<double>& bc : b.convs)
                for (double& v : bc.kernel.bias) v = bias(rng);
            for (int i = 0; i < b.bn.channels(); ++i) {
                b.bn.gamma[i] = gamma(rng);
                b.bn.beta[i] = beta(rng);
            }
        }
        m.curve = {ca(rng), cb(rng), cg(rng)};

        const Tensord x = random_unit_tensor<double>(1, 3, 16, 16, rng, 0.02, 0.25);
        const Tensord target = random_unit_tensor<double>(1, 3, 16, 16, rng, 0.25, 0.60);

        detail::ForwardCtx<double> ctx;
        {
            BranchModel<double> probe = m;
            detail::forward_train(x, target, probe, cfg, ctx, false);
        }
        if (!detail::away_from_kinks(ctx, target, cfg.div_eps)) {
            ++rep.rejected_configs;
            continue;
        }

        GradState<double> gs = backward(x, target, m, cfg, false);
        std::vector<double*> params = trainable_params(m);
        rep.params_per_point = static_cast<int>(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            const double saved = *params[i];
            *params[i] = saved + h;
            const double lp = training_loss(x, target, m, cfg);
            *params[i] = saved - h;
            const double lm = training_loss(x, target, m, cfg);
            *params[i] = saved;
            const double fd = (lp - lm) / (2.0 * h);
            const double a = gs.grad[i];
            const double rel = std::abs(a - fd) /
                               std::max({std::abs(a), std::abs(fd), 1e-6});
            rep.max_rel_err = std::max(rep.max_rel_err, rel);
        }
        ++rep.points;
    }
    return rep;
}

struct ValReport {
    double l1 = 0.0;
    double mean_y_out = 0.0;
    double mean_y_target = 0.0;
};

// Inference-path validation: mean L1 and mean output luminance over full
// (uncropped) pairs.
inline ValReport evaluate(const std::vector<std::pair<Tensorf, Tensorf>>& pairs,
                          const FusedModel<float>& m, const EnhanceConfig& cfg = {}) {
    ValReport r;
    for (const auto& [low, tgt] : pairs) {
        const Tensorf out = enhance(low, m, cfg);
        r.l1 += static_cast<double>(l1_loss(out, tgt));
        r.mean_y_out += static_cast<double>(tensor_mean(rgb_to_y(out)));
        r.mean_y_target += static_cast<double>(tensor_mean(rgb_to_y(tgt)));
    }
    const double n = static_cast<double>(pairs.size());
    r.l1 /= n;
    r.mean_y_out /= n;
    r.mean_y_target /= n;
    return r;
}

}  // namespace sclm
