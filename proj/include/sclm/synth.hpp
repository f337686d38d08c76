#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sclm/tensor.hpp"

namespace sclm {

// Synthetic low-light degradation: exposure-value scaling plus a small gamma
// jitter. Only underexposure tiers are allowed.
struct SynthConfig {
    std::vector<float> exposure_tiers{-1.5f, -1.0f};  // EV offsets, all <= 0
    float jitter = 0.1f;                              // gamma jitter half-range
    bool noise = false;                               // reserved; off by default
};

// low = clamp(img * 2^EV, 0, 1) ^ (1 + jitter), target = img.
// The tier is drawn from the config; jitter is uniform in [-jitter, +jitter].
std::pair<Tensorf, Tensorf> synth_pair(const Tensorf& img, const SynthConfig& cfg,
                                       uint64_t seed);

// One pair per (image, tier) combination, deterministically seeded.
std::vector<std::pair<Tensorf, Tensorf>> make_dataset(
    const std::vector<Tensorf>& images, const SynthConfig& cfg, uint64_t seed);

struct DirStats {
    std::string dir;
    int images = 0;
    double mean_y = 0.0;  // average Y channel on the 0-255 scale
};

// Average Y-channel illuminance of every image in a directory (png/ppm),
// aggregated in sorted path order.
DirStats dataset_stats(const std::string& dir);

}  // namespace sclm
