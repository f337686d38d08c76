#include "sclm/model_io.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"
#include "sclm/reparam.hpp"

namespace sclm {

namespace {

using nlohmann::json;

const char* kB64 =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(const uint8_t* p, size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (size_t i = 0; i < len; i += 3) {
        uint32_t v = uint32_t(p[i]) << 16;
        if (i + 1 < len) v |= uint32_t(p[i + 1]) << 8;
        if (i + 2 < len) v |= uint32_t(p[i + 2]);
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out.push_back(i + 1 < len ? kB64[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < len ? kB64[v & 63] : '=');
    }
    return out;
}

std::vector<uint8_t> b64_decode(const std::string& s) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (s.size() % 4 != 0) throw std::runtime_error("model file: bad base64 length");
    std::vector<uint8_t> out;
    out.reserve(s.size() / 4 * 3);
    for (size_t i = 0; i < s.size(); i += 4) {
        int n = 0;
        uint32_t v = 0;
        for (int j = 0; j < 4; ++j) {
            const char c = s[i + j];
            if (c == '=') break;
            const int d = val(c);
            if (d < 0) throw std::runtime_error("model file: bad base64 character");
            v = (v << 6) | uint32_t(d);
            ++n;
        }
        v <<= 6 * (4 - n);
        if (n >= 2) out.push_back(uint8_t(v >> 16));
        if (n >= 3) out.push_back(uint8_t(v >> 8));
        if (n == 4) out.push_back(uint8_t(v));
    }
    return out;
}

// Little-endian float32 payloads (byte-swapped on big-endian hosts).
std::string encode_floats(const std::vector<float>& v) {
    std::vector<uint8_t> bytes(v.size() * 4);
    for (size_t i = 0; i < v.size(); ++i) {
        uint32_t u;
        std::memcpy(&u, &v[i], 4);
        bytes[4 * i + 0] = uint8_t(u);
        bytes[4 * i + 1] = uint8_t(u >> 8);
        bytes[4 * i + 2] = uint8_t(u >> 16);
        bytes[4 * i + 3] = uint8_t(u >> 24);
    }
    return b64_encode(bytes.data(), bytes.size());
}

std::vector<float> decode_floats(const std::string& s, size_t expected) {
    const std::vector<uint8_t> bytes = b64_decode(s);
    if (bytes.size() != expected * 4)
        throw std::runtime_error("model file: array size mismatch");
    std::vector<float> v(expected);
    for (size_t i = 0; i < expected; ++i) {
        const uint32_t u = uint32_t(bytes[4 * i]) | uint32_t(bytes[4 * i + 1]) << 8 |
                           uint32_t(bytes[4 * i + 2]) << 16 |
                           uint32_t(bytes[4 * i + 3]) << 24;
        std::memcpy(&v[i], &u, 4);
    }
    return v;
}

json kernel_to_json(const ConvKernel<float>& k) {
    return json{{"c_out", k.c_out}, {"c_in", k.c_in},   {"k_h", k.k_h},
                {"k_w", k.k_w},     {"weight", encode_floats(k.weight)},
                {"bias", encode_floats(k.bias)}};
}

ConvKernel<float> kernel_from_json(const json& j) {
    ConvKernel<float> k(j.at("c_out").get<int>(), j.at("c_in").get<int>(),
                        j.at("k_h").get<int>(), j.at("k_w").get<int>());
    k.weight = decode_floats(j.at("weight").get<std::string>(), k.weight.size());
    k.bias = decode_floats(j.at("bias").get<std::string>(), k.bias.size());
    return k;
}

void check_finite(const std::vector<float>& v, const char* what) {
    for (const float x : v)
        if (!std::isfinite(x))
            throw std::runtime_error(std::string("model file: non-finite ") + what);
}

}  // namespace

ModelFile make_branch_file(const BranchModel<float>& m, uint64_t seed, int64_t steps) {
    ModelFile mf;
    mf.kind = "branch";
    mf.topology = m.topology;
    mf.branch = m;
    mf.seed = seed;
    mf.steps = steps;
    return mf;
}

ModelFile make_fused_file(const FusedModel<float>& m, Topology source_topology,
                          uint64_t seed, int64_t steps) {
    ModelFile mf;
    mf.kind = "fused";
    mf.topology = source_topology;
    mf.fused = m;
    mf.seed = seed;
    mf.steps = steps;
    return mf;
}

FusedModel<float> fused_from_file(const ModelFile& mf) {
    return mf.kind == "fused" ? mf.fused : collapse(mf.branch);
}

void save_model(const std::string& path, const ModelFile& mf) {
    json j;
    j["format_version"] = mf.format_version;
    j["kind"] = mf.kind;
    j["topology"] = topology_name(mf.topology);
    j["provenance"] = {{"seed", mf.seed}, {"steps", mf.steps}};
    const CurveParams<float>& cv = mf.kind == "fused" ? mf.fused.curve : mf.branch.curve;
    j["curve"] = {{"alpha", cv.alpha}, {"beta", cv.beta}, {"gamma", cv.gamma}};

    if (mf.kind == "fused") {
        j["kernel"] = kernel_to_json(mf.fused.kernel);
    } else if (mf.kind == "branch") {
        json branches = json::array();
        for (const Branch<float>& b : mf.branch.branches) {
            json jb;
            jb["convs"] = json::array();
            for (const BranchConv<float>& bc : b.convs) {
                json jc = kernel_to_json(bc.kernel);
                jc["pad_h"] = bc.pad_h;
                jc["pad_w"] = bc.pad_w;
                jb["convs"].push_back(jc);
            }
            jb["avg_pool_k"] = b.has_avg_pool ? b.pool_k : 0;
            jb["bn"] = {{"mu", encode_floats(b.bn.mu)},
                        {"sigma", encode_floats(b.bn.sigma)},
                        {"gamma", encode_floats(b.bn.gamma)},
                        {"beta", encode_floats(b.bn.beta)},
                        {"eps", b.bn.eps}};
            branches.push_back(jb);
        }
        j["branches"] = branches;
    } else {
        throw std::runtime_error("save_model: unknown kind '" + mf.kind + "'");
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_model: cannot open " + path);
    f << j.dump(2) << "\n";
    if (!f) throw std::runtime_error("save_model: write failed for " + path);
}

ModelFile load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_model: cannot open " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("load_model: " + path + ": " + e.what());
    }

    ModelFile mf;
    mf.format_version = j.at("format_version").get<int>();
    if (mf.format_version != 1)
        throw std::runtime_error("load_model: unsupported format_version");
    mf.kind = j.at("kind").get<std::string>();
    mf.topology = parse_topology(j.at("topology").get<std::string>());
    if (j.contains("provenance")) {
        mf.seed = j["provenance"].value("seed", uint64_t(0));
        mf.steps = j["provenance"].value("steps", int64_t(0));
    }
    CurveParams<float> cv{j.at("curve").at("alpha").get<float>(),
                          j.at("curve").at("beta").get<float>(),
                          j.at("curve").at("gamma").get<float>()};
    if (!std::isfinite(cv.alpha) || !std::isfinite(cv.beta) || !std::isfinite(cv.gamma))
        throw std::runtime_error("model file: non-finite curve");

    if (mf.kind == "fused") {
        mf.fused.kernel = kernel_from_json(j.at("kernel"));
        mf.fused.curve = cv;
        check_finite(mf.fused.kernel.weight, "kernel weight");
        check_finite(mf.fused.kernel.bias, "kernel bias");
        if (count_params(mf.fused).total() != 87)
            throw std::runtime_error("model file: fused model must hold exactly 87 scalars");
    } else if (mf.kind == "branch") {
        mf.branch.topology = mf.topology;
        mf.branch.curve = cv;
        for (const json& jb : j.at("branches")) {
            Branch<float> b;
            for (const json& jc : jb.at("convs")) {
                BranchConv<float> bc;
                bc.kernel = kernel_from_json(jc);
                bc.pad_h = jc.value("pad_h", 0);
                bc.pad_w = jc.value("pad_w", 0);
                check_finite(bc.kernel.weight, "conv weight");
                check_finite(bc.kernel.bias, "conv bias");
                b.convs.push_back(std::move(bc));
            }
            const int pk = jb.value("avg_pool_k", 0);
            b.has_avg_pool = pk > 0;
            b.pool_k = pk > 0 ? pk : 3;
            const json& jbn = jb.at("bn");
            const int ch = b.convs.empty() ? 3 : b.convs.back().kernel.c_out;
            b.bn = BNParams<float>(ch);
            b.bn.mu = decode_floats(jbn.at("mu").get<std::string>(), ch);
            b.bn.sigma = decode_floats(jbn.at("sigma").get<std::string>(), ch);
            b.bn.gamma = decode_floats(jbn.at("gamma").get<std::string>(), ch);
            b.bn.beta = decode_floats(jbn.at("beta").get<std::string>(), ch);
            b.bn.eps = jbn.value("eps", 1e-5f);
            check_finite(b.bn.mu, "bn mu");
            check_finite(b.bn.sigma, "bn sigma");
            check_finite(b.bn.gamma, "bn gamma");
            check_finite(b.bn.beta, "bn beta");
            mf.branch.branches.push_back(std::move(b));
        }
    } else {
        throw std::runtime_error("load_model: unknown kind '" + mf.kind + "'");
    }
    return mf;
}

}  // namespace sclm
