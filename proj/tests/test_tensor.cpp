#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "sclm/tensor.hpp"
#include "sclm/verify.hpp"

using namespace sclm;

namespace {

Tensorf random_tensor(int n, int c, int h, int w, uint64_t seed, float lo = -1.0f,
                      float hi = 1.0f) {
    std::mt19937_64 rng(seed);
    return random_unit_tensor<float>(n, c, h, w, rng, lo, hi);
}

ConvKernel<float> random_kernel(int co, int ci, int kh, int kw, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> d(-1.0f, 1.0f);
    ConvKernel<float> k(co, ci, kh, kw);
    for (float& v : k.weight) v = d(rng);
    for (float& v : k.bias) v = d(rng);
    return k;
}

}  // namespace

TEST_CASE("conv2d 1x1 identity over channels") {
    ConvKernel<float> k(3, 3, 1, 1);
    for (int o = 0; o < 3; ++o) k.wat(o, o, 0, 0) = 1.0f;
    const Tensorf x = random_tensor(2, 3, 5, 7, 42);
    const Tensorf y = conv2d(x, k, 1, 0);
    CHECK(max_abs_diff(x, y) == 0.0f);
}

TEST_CASE("conv2d all-zero weights gives constant bias planes") {
    ConvKernel<float> k(2, 3, 3, 3);
    k.bias = {0.5f, -1.25f};
    const Tensorf x = random_tensor(1, 3, 6, 6, 1);
    const Tensorf y = conv2d(x, k, 1, 1);
    for (int c = 0; c < 2; ++c)
        for (int iy = 0; iy < y.h; ++iy)
            for (int ix = 0; ix < y.w; ++ix)
                CHECK(y.at(0, c, iy, ix) == k.bias[c]);
}

TEST_CASE("conv2d matches the naive gather oracle") {
    const Tensorf x = random_tensor(1, 3, 5, 5, 7);
    const ConvKernel<float> k = random_kernel(3, 3, 3, 3, 8);
    for (const int pad : {0, 1, 2}) {
        const Tensorf a = conv2d(x, k, 1, pad);
        const Tensorf b = oracle::conv2d_naive(x, k, 1, pad, pad);
        CHECK(max_abs_diff(a, b) < 1e-6f);
    }
    // strided and asymmetric padding
    const ConvKernel<float> k2 = random_kernel(2, 3, 1, 3, 9);
    CHECK(max_abs_diff(conv2d(x, k2, 2, 0, 1),
                       oracle::conv2d_naive(x, k2, 2, 0, 1)) < 1e-6f);
}

TEST_CASE("conv2d rejects bad arguments") {
    const Tensorf x = random_tensor(1, 2, 4, 4, 3);
    const ConvKernel<float> k = random_kernel(3, 3, 3, 3, 4);
    CHECK_THROWS_AS(conv2d(x, k, 1, 1), std::invalid_argument);
    const ConvKernel<float> k2 = random_kernel(2, 2, 3, 3, 5);
    CHECK_THROWS_AS(conv2d(x, k2, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(conv2d(x, k2, 1, -1), std::invalid_argument);
}

TEST_CASE("conv2d is linear in its input (bias excluded)") {
    ConvKernel<float> k = random_kernel(3, 3, 3, 3, 10);
    k.bias.assign(3, 0.0f);
    const Tensorf x = random_tensor(1, 3, 8, 8, 11);
    const Tensorf y = random_tensor(1, 3, 8, 8, 12);
    const float a = 0.7f, b = -1.3f;
    Tensorf lhs = add(mul_scalar(x, a), mul_scalar(y, b));
    lhs = conv2d(lhs, k, 1, 1);
    const Tensorf rhs = add(mul_scalar(conv2d(x, k, 1, 1), a),
                            mul_scalar(conv2d(y, k, 1, 1), b));
    CHECK(max_abs_diff(lhs, rhs) < 1e-6f);
}

TEST_CASE("conv2d with a Dirac kernel is the identity") {
    ConvKernel<float> k(3, 3, 3, 3);
    for (int o = 0; o < 3; ++o) k.wat(o, o, 1, 1) = 1.0f;
    const Tensorf x = random_tensor(1, 3, 8, 8, 13);
    CHECK(max_abs_diff(conv2d(x, k, 1, 1), x) == 0.0f);
}

TEST_CASE("batch_norm identity parameters pass input through") {
    BNParams<float> p(3);
    const Tensorf x = random_tensor(1, 3, 4, 4, 14);
    Tensorf y = batch_norm(x, p, BNMode::Infer);
    CHECK(max_abs_diff(x, y) == 0.0f);
}

TEST_CASE("batch_norm affine example") {
    BNParams<float> p(2);
    p.gamma = {2.0f, 2.0f};
    p.beta = {1.0f, 1.0f};
    const Tensorf x(1, 2, 3, 3, 0.0f);
    const Tensorf y = batch_norm(x, p, BNMode::Infer);
    for (const float v : y.data) CHECK(v == 1.0f);
}

TEST_CASE("batch_norm infer matches the per-element formula oracle") {
    BNParams<float> p(3);
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<float> d(-0.5f, 0.5f), s(0.5f, 2.0f);
    for (int i = 0; i < 3; ++i) {
        p.mu[i] = d(rng);
        p.sigma[i] = s(rng);
        p.gamma[i] = s(rng);
        p.beta[i] = d(rng);
    }
    const Tensorf x = random_tensor(2, 3, 8, 8, 16);
    CHECK(max_abs_diff(batch_norm(x, p, BNMode::Infer),
                       oracle::batch_norm_infer_naive(x, p)) < 1e-6f);
}

TEST_CASE("batch_norm rejects non-positive sigma") {
    BNParams<float> p(3);
    p.sigma[1] = 0.0f;
    const Tensorf x = random_tensor(1, 3, 4, 4, 17);
    CHECK_THROWS_AS(batch_norm(x, p, BNMode::Infer), std::invalid_argument);
}

TEST_CASE("batch_norm train mode normalizes the batch and updates stats") {
    BNParams<float> p(3);
    const Tensorf x = random_tensor(4, 3, 8, 8, 18, 0.0f, 2.0f);
    const Tensorf y = batch_norm(x, p, BNMode::Train);
    // batch-normalized output: near-zero mean, near-unit variance per channel
    for (int c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        const size_t m = static_cast<size_t>(y.n) * y.plane();
        for (int n = 0; n < y.n; ++n)
            for (size_t j = 0; j < y.plane(); ++j) mean += (&y.at(n, c, 0, 0))[j];
        mean /= static_cast<double>(m);
        for (int n = 0; n < y.n; ++n)
            for (size_t j = 0; j < y.plane(); ++j) {
                const double d = (&y.at(n, c, 0, 0))[j] - mean;
                var += d * d;
            }
        var /= static_cast<double>(m);
        CHECK(std::abs(mean) < 1e-5);
        CHECK(std::abs(var - 1.0) < 1e-3);
        CHECK(p.mu[c] != 0.0f);     // EMA moved off the init
        CHECK(p.sigma[c] > 0.0f);
    }
}

TEST_CASE("avg_pool matches naive oracle, both paddings") {
    const Tensorf x = random_tensor(1, 3, 8, 8, 19);
    CHECK(max_abs_diff(avg_pool(x, 3, 1, 1), oracle::avg_pool_naive(x, 3, 1, 1)) < 1e-6f);
    CHECK(max_abs_diff(avg_pool(x, 3, 1, 0), oracle::avg_pool_naive(x, 3, 1, 0)) < 1e-6f);
    CHECK(max_abs_diff(avg_pool(x, 2, 2, 0), oracle::avg_pool_naive(x, 2, 2, 0)) < 1e-6f);
}

TEST_CASE("max_pool_same keeps constants, rejects even k") {
    const Tensorf x(1, 1, 5, 5, 0.3f);
    const Tensorf y = max_pool_same(x, 3);
    CHECK(max_abs_diff(x, y) == 0.0f);
    CHECK_THROWS_AS(max_pool_same(x, 4), std::invalid_argument);
}

TEST_CASE("max_pool_same dilates a single bright pixel to a plateau") {
    Tensorf x(1, 1, 7, 7, 0.0f);
    x.at(0, 0, 3, 3) = 1.0f;
    const Tensorf y = max_pool_same(x, 3);
    for (int iy = 0; iy < 7; ++iy)
        for (int ix = 0; ix < 7; ++ix) {
            const bool inside = std::abs(iy - 3) <= 1 && std::abs(ix - 3) <= 1;
            CHECK(y.at(0, 0, iy, ix) == (inside ? 1.0f : 0.0f));
        }
}

TEST_CASE("max_pool_same matches the sliding-window oracle") {
    const Tensorf x = random_tensor(1, 3, 8, 8, 20);
    for (const int k : {1, 3, 5, 7})
        CHECK(max_abs_diff(max_pool_same(x, k), oracle::max_pool_same_naive(x, k)) == 0.0f);
}

TEST_CASE("max_pool_same is idempotent on constants and monotone") {
    const Tensorf c(1, 1, 6, 6, 0.42f);
    CHECK(max_abs_diff(max_pool_same(max_pool_same(c, 3), 3), max_pool_same(c, 3)) == 0.0f);

    const Tensorf x = random_tensor(1, 1, 8, 8, 21, 0.0f, 1.0f);
    Tensorf y = x;
    for (float& v : y.data) v += 0.25f;  // x <= y elementwise
    const Tensorf px = max_pool_same(x, 5), py = max_pool_same(y, 5);
    for (size_t j = 0; j < px.size(); ++j) CHECK(px.data[j] <= py.data[j]);
}

TEST_CASE("elementwise ops and scalar broadcast") {
    const Tensorf a = random_tensor(1, 3, 4, 4, 22, 0.0f, 1.0f);
    const Tensorf b = random_tensor(1, 3, 4, 4, 23, 0.5f, 1.5f);
    const Tensorf s = add(a, b), d = sub(a, b), m = mul(a, b), q = div(a, b, 1e-4f);
    for (size_t j = 0; j < a.size(); ++j) {
        CHECK(s.data[j] == a.data[j] + b.data[j]);
        CHECK(d.data[j] == a.data[j] - b.data[j]);
        CHECK(m.data[j] == a.data[j] * b.data[j]);
        CHECK(q.data[j] == a.data[j] / b.data[j]);
    }
    // single-channel rhs broadcasts across channels
    const Tensorf c1 = random_tensor(1, 1, 4, 4, 24, 0.5f, 2.0f);
    const Tensorf bc = mul(a, c1);
    for (int ch = 0; ch < 3; ++ch)
        for (int iy = 0; iy < 4; ++iy)
            for (int ix = 0; ix < 4; ++ix)
                CHECK(bc.at(0, ch, iy, ix) == a.at(0, ch, iy, ix) * c1.at(0, 0, iy, ix));
}

TEST_CASE("div floors the denominator") {
    const Tensorf a(1, 1, 2, 2, 1.0f);
    Tensorf b(1, 1, 2, 2, 0.0f);
    const Tensorf q = div(a, b, 1e-4f);
    CHECK(q.all_finite());
    for (const float v : q.data) CHECK(v == 1.0f / 1e-4f);
}

TEST_CASE("every op keeps outputs finite on random unit inputs") {
    const Tensorf x = random_tensor(1, 3, 8, 8, 25, 0.0f, 1.0f);
    const ConvKernel<float> k = random_kernel(3, 3, 3, 3, 26);
    CHECK(conv2d(x, k, 1, 1).all_finite());
    CHECK(sigmoid(x).all_finite());
    CHECK(max_pool_same(x, 7).all_finite());
    CHECK(avg_pool(x, 3, 1, 1).all_finite());
    BNParams<float> p(3);
    CHECK(batch_norm(x, p, BNMode::Infer).all_finite());
}

TEST_CASE("rot90 and flips are involutive where expected") {
    const Tensorf x = random_tensor(1, 3, 6, 6, 27);
    CHECK(max_abs_diff(flip_horizontal(flip_horizontal(x)), x) == 0.0f);
    CHECK(max_abs_diff(flip_vertical(flip_vertical(x)), x) == 0.0f);
    CHECK(max_abs_diff(rot90(x, 4), x) == 0.0f);
    CHECK(max_abs_diff(rot90(rot90(x, 1), 3), x) == 0.0f);
}
