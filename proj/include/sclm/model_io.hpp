#pragma once

#include <cstdint>
#include <string>

#include "sclm/glle.hpp"

namespace sclm {

// On-disk model: versioned JSON with base64-encoded little-endian float32
// arrays. Round-trips bitwise.
struct ModelFile {
    int format_version = 1;
    std::string kind;  // "branch" | "fused"
    Topology topology = Topology::DiverseBranch;
    BranchModel<float> branch;  // valid when kind == "branch"
    FusedModel<float> fused;    // valid when kind == "fused"
    uint64_t seed = 0;          // provenance
    int64_t steps = 0;
};

ModelFile load_model(const std::string& path);
void save_model(const std::string& path, const ModelFile& mf);

ModelFile make_branch_file(const BranchModel<float>& m, uint64_t seed, int64_t steps);
ModelFile make_fused_file(const FusedModel<float>& m, Topology source_topology,
                          uint64_t seed, int64_t steps);

// A fused model regardless of the file kind (branch files are collapsed).
FusedModel<float> fused_from_file(const ModelFile& mf);

}  // namespace sclm
