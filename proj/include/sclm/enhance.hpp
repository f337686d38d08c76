#pragma once

#include "sclm/glle.hpp"
#include "sclm/local_adapt.hpp"
#include "sclm/reparam.hpp"

namespace sclm {

struct EnhanceConfig {
    int pool_k = 7;        // local adaptation smoothing window
    double div_eps = 1e-4; // retinex division floor
};

// Adaptation-map input: Y deviation from the median, normalized, smoothed.
// Depends only on the image, never on learnable parameters.
template <typename T>
Tensor<T> adaptation_input(const Tensor<T>& x, int pool_k) {
    return smooth_map(normalize_map(condition_map(rgb_to_y(x))), pool_k);
}

// Full inference pipeline: one conv for the illumination estimate, retinex
// division for the coarse result, then the shared quadratic curve on the
// condition map for local adaptation. The curve is applied exactly once.
template <typename T>
Tensor<T> enhance(const Tensor<T>& x, const FusedModel<T>& m,
                  const EnhanceConfig& cfg = {}) {
    const Tensor<T> illum = estimate_illumination(x, m);
    const Tensor<T> coarse = retinex_divide(x, illum, static_cast<T>(cfg.div_eps));
    const Tensor<T> cmap = curve_apply(adaptation_input(x, cfg.pool_k), m.curve);
    return fuse_output(coarse, cmap);
}

// Same pipeline through the multi-branch estimator (training topology).
template <typename T>
Tensor<T> enhance_train(const Tensor<T>& x, BranchModel<T>& m, BNMode mode,
                        const EnhanceConfig& cfg = {}) {
    const Tensor<T> illum = estimate_illumination(x, m, mode);
    const Tensor<T> coarse = retinex_divide(x, illum, static_cast<T>(cfg.div_eps));
    const Tensor<T> cmap = curve_apply(adaptation_input(x, cfg.pool_k), m.curve);
    return fuse_output(coarse, cmap);
}

}  // namespace sclm
