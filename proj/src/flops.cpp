#include "sclm/flops.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

#include "sclm/enhance.hpp"
#include "sclm/threads.hpp"
#include "sclm/verify.hpp"

namespace sclm {

namespace {

uint64_t conv_macs(int out_h, int out_w, int c_out, int c_in, int k_h, int k_w) {
    return static_cast<uint64_t>(out_h) * out_w * c_out * c_in * k_h * k_w;
}

// Per-pixel arithmetic of the rest of the pipeline: sigmoid (3), retinex
// division + clamp (6), luma (5), normalize (2), max-pool window compares
// (pool_k^2), curve (4), output fusion + clamp (6).
uint64_t pointwise(int h, int w, int pool_k) {
    const uint64_t px = static_cast<uint64_t>(h) * w;
    return px * (3 + 6 + 5 + 2 + static_cast<uint64_t>(pool_k) * pool_k + 4 + 6);
}

}  // namespace

std::string FlopReport::gflops_str(int flops_per_mac) const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2g", gflops(flops_per_mac));
    return buf;
}

FlopReport count_flops(const FusedModel<float>& m, int h, int w, int pool_k) {
    FlopReport r;
    r.conv_macs = conv_macs(h, w, m.kernel.c_out, m.kernel.c_in, m.kernel.k_h, m.kernel.k_w);
    r.pointwise_ops = pointwise(h, w, pool_k);
    return r;
}

FlopReport count_flops(const BranchModel<float>& m, int h, int w, int pool_k) {
    FlopReport r;
    for (const Branch<float>& b : m.branches) {
        int th = h, tw = w;
        for (const BranchConv<float>& bc : b.convs) {
            th = th + 2 * bc.pad_h - bc.kernel.k_h + 1;
            tw = tw + 2 * bc.pad_w - bc.kernel.k_w + 1;
            r.conv_macs += conv_macs(th, tw, bc.kernel.c_out, bc.kernel.c_in,
                                     bc.kernel.k_h, bc.kernel.k_w);
        }
        if (b.has_avg_pool) {
            th = th - b.pool_k + 1;
            tw = tw - b.pool_k + 1;
            r.pointwise_ops += static_cast<uint64_t>(th) * tw * 3 * b.pool_k * b.pool_k;
        }
        r.pointwise_ops += static_cast<uint64_t>(th) * tw * 3 * 2;  // batch norm
    }
    r.pointwise_ops += pointwise(h, w, pool_k);
    return r;
}

double median_ms(const std::function<void()>& fn, int repeats, int warmup) {
    for (int i = 0; i < warmup; ++i) fn();
    std::vector<double> ms(repeats);
    for (int i = 0; i < repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        ms[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    std::sort(ms.begin(), ms.end());
    return ms[ms.size() / 2];
}

namespace {

BenchRow time_row(const std::string& label, int threads,
                  const std::function<void()>& fn, int repeats) {
    const int saved = max_threads();
    set_max_threads(threads);
    for (int i = 0; i < 2; ++i) fn();  // warmup
    std::vector<double> ms(repeats);
    for (int i = 0; i < repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        ms[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    set_max_threads(saved);
    std::sort(ms.begin(), ms.end());
    BenchRow row;
    row.label = label;
    row.threads = threads;
    row.median_ms = ms[ms.size() / 2];
    row.p95_ms = ms[std::min(ms.size() - 1, static_cast<size_t>(ms.size() * 95 / 100))];
    return row;
}

}  // namespace

std::vector<BenchRow> bench_model(const FusedModel<float>& fused,
                                  BranchModel<float>* branch, int h, int w,
                                  int repeats, int pool_k) {
    std::mt19937_64 rng(12345);
    const Tensorf x = random_unit_tensor<float>(1, 3, h, w, rng);
    EnhanceConfig cfg;
    cfg.pool_k = pool_k;

    std::vector<BenchRow> rows;
    const int multi = max_threads();
    for (const int threads : {1, multi}) {
        rows.push_back(time_row("fused_enhance", threads,
                                [&] { enhance(x, fused, cfg); }, repeats));
        rows.push_back(time_row("fused_illum", threads,
                                [&] { estimate_illumination(x, fused); }, repeats));
        if (branch)
            rows.push_back(time_row("branch_illum", threads,
                                    [&] { estimate_illumination(x, *branch, BNMode::Infer); },
                                    repeats));
        if (multi == 1) break;  // identical rows otherwise
    }
    return rows;
}

}  // namespace sclm
