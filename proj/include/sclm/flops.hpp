#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sclm/glle.hpp"

namespace sclm {

// Convolution cost in multiply-accumulates, with the pointwise pipeline ops
// (sigmoid, division, curve, fusion, pooling) tallied separately.
struct FlopReport {
    uint64_t conv_macs = 0;
    uint64_t pointwise_ops = 0;
    // Headline convention: 1 MAC = 1 FLOP; pass 2 for the 2-FLOPs-per-MAC view.
    double gflops(int flops_per_mac = 1) const {
        return static_cast<double>(conv_macs) * flops_per_mac / 1e9;
    }
    std::string gflops_str(int flops_per_mac = 1) const;  // 2 significant figures
};

FlopReport count_flops(const FusedModel<float>& m, int h, int w, int pool_k = 7);
FlopReport count_flops(const BranchModel<float>& m, int h, int w, int pool_k = 7);

struct BenchRow {
    std::string label;
    int threads = 1;
    double median_ms = 0.0;
    double p95_ms = 0.0;
};

// Wall-clock timing (median / p95 over `repeats`, after warmup) of the fused
// enhance pipeline and of both illumination estimators. Branch rows are
// skipped when no branch model is given.
std::vector<BenchRow> bench_model(const FusedModel<float>& fused,
                                  BranchModel<float>* branch, int h, int w,
                                  int repeats, int pool_k = 7);

// Single measurement helper used by the acceptance checks: median ms of the
// callable over `repeats` runs after `warmup` runs.
double median_ms(const std::function<void()>& fn, int repeats, int warmup = 2);

}  // namespace sclm
