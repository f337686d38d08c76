#include "sclm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "sclm/image_io.hpp"
#include "sclm/local_adapt.hpp"

namespace sclm {

namespace {

void check_tiers(const SynthConfig& cfg) {
    if (cfg.exposure_tiers.empty())
        detail::fail("synth_pair: no exposure tiers configured");
    for (const float ev : cfg.exposure_tiers)
        if (ev > 0.0f)
            detail::fail("synth_pair: exposure tiers must be <= 0 EV (low light only)");
}

Tensorf degrade(const Tensorf& img, float ev, float jitter) {
    const float scale = std::pow(2.0f, ev);
    const float exponent = 1.0f + jitter;
    Tensorf low(img.n, img.c, img.h, img.w);
    for (size_t j = 0; j < img.size(); ++j) {
        const float v = std::min(1.0f, std::max(0.0f, img.data[j] * scale));
        low.data[j] = std::pow(v, exponent);
    }
    return low;
}

}  // namespace

std::pair<Tensorf, Tensorf> synth_pair(const Tensorf& img, const SynthConfig& cfg,
                                       uint64_t seed) {
    check_tiers(cfg);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<size_t> pick(0, cfg.exposure_tiers.size() - 1);
    std::uniform_real_distribution<float> jit(-cfg.jitter, cfg.jitter);
    const float ev = cfg.exposure_tiers[pick(rng)];
    const float jitter = cfg.jitter > 0.0f ? jit(rng) : 0.0f;
    return {degrade(img, ev, jitter), img};
}

std::vector<std::pair<Tensorf, Tensorf>> make_dataset(
    const std::vector<Tensorf>& images, const SynthConfig& cfg, uint64_t seed) {
    check_tiers(cfg);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> jit(-cfg.jitter, cfg.jitter);
    std::vector<std::pair<Tensorf, Tensorf>> pairs;
    pairs.reserve(images.size() * cfg.exposure_tiers.size());
    for (const Tensorf& img : images)
        for (const float ev : cfg.exposure_tiers) {
            const float jitter = cfg.jitter > 0.0f ? jit(rng) : 0.0f;
            pairs.emplace_back(degrade(img, ev, jitter), img);
        }
    return pairs;
}

DirStats dataset_stats(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir))
        throw std::runtime_error("dataset_stats: not a directory: " + dir);
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && is_image_path(e.path().string()))
            paths.push_back(e.path().string());
    std::sort(paths.begin(), paths.end());

    DirStats st;
    st.dir = dir;
    for (const std::string& p : paths) {
        const Tensorf img = load_image(p);
        st.mean_y += static_cast<double>(tensor_mean(rgb_to_y(img))) * 255.0;
        ++st.images;
    }
    if (st.images > 0) st.mean_y /= st.images;
    return st;
}

}  // namespace sclm
