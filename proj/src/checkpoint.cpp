#include "mcsp/checkpoint.hpp"

#include "mcsp/errors.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

namespace mcsp {

namespace {

constexpr char kMagic[5] = {'M', 'C', 'S', 'P', '1'};
constexpr std::uint8_t kDtypeF64 = 1;

template <typename T>
void write_le(std::ostream& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::string& path) {
    char buf[sizeof(T)];
    in.read(buf, sizeof(T));
    if (!in) throw IoError("truncated checkpoint: " + path);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);

    out.write(kMagic, sizeof(kMagic));
    nlohmann::json meta;
    meta["config"] = ckpt.config_text;
    meta["step"] = ckpt.step;
    meta["seed"] = ckpt.seed;
    meta["rng_state"] = ckpt.rng_state;
    const std::string meta_text = meta.dump();
    write_le<std::uint64_t>(out, meta_text.size());
    out.write(meta_text.data(), std::streamsize(meta_text.size()));

    write_le<std::uint64_t>(out, ckpt.arrays.size());
    for (const auto& [name, value] : ckpt.arrays) {
        write_le<std::uint32_t>(out, std::uint32_t(name.size()));
        out.write(name.data(), std::streamsize(name.size()));
        write_le<std::uint8_t>(out, kDtypeF64);
        write_le<std::uint8_t>(out, 2);
        write_le<std::uint64_t>(out, std::uint64_t(value.rows()));
        write_le<std::uint64_t>(out, std::uint64_t(value.cols()));
        for (Eigen::Index r = 0; r < value.rows(); ++r) {
            for (Eigen::Index c = 0; c < value.cols(); ++c) {
                write_le<double>(out, value(r, c));
            }
        }
    }
    if (!out) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);

    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw IoError("not a checkpoint file (bad magic): " + path);
    }

    const auto meta_len = read_le<std::uint64_t>(in, path);
    std::string meta_text(meta_len, '\0');
    in.read(meta_text.data(), std::streamsize(meta_len));
    if (!in) throw IoError("truncated checkpoint metadata: " + path);

    Checkpoint ckpt;
    try {
        const auto meta = nlohmann::json::parse(meta_text);
        ckpt.config_text = meta.at("config").get<std::string>();
        ckpt.step = meta.at("step").get<std::uint64_t>();
        ckpt.seed = meta.at("seed").get<std::uint64_t>();
        ckpt.rng_state = meta.at("rng_state").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad checkpoint metadata in " + path + ": " + e.what());
    }

    const auto count = read_le<std::uint64_t>(in, path);
    ckpt.arrays.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = read_le<std::uint32_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), std::streamsize(name_len));
        if (!in) throw IoError("truncated checkpoint record name: " + path);
        const auto dtype = read_le<std::uint8_t>(in, path);
        if (dtype != kDtypeF64) {
            throw IoError("unsupported dtype tag " + std::to_string(int(dtype)) + " in " + path);
        }
        const auto rank = read_le<std::uint8_t>(in, path);
        if (rank != 2) {
            throw IoError("unsupported rank " + std::to_string(int(rank)) + " in " + path);
        }
        const auto rows = read_le<std::uint64_t>(in, path);
        const auto cols = read_le<std::uint64_t>(in, path);
        Matrix value(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index r = 0; r < value.rows(); ++r) {
            for (Eigen::Index c = 0; c < value.cols(); ++c) {
                value(r, c) = read_le<double>(in, path);
            }
        }
        ckpt.arrays.emplace_back(std::move(name), std::move(value));
    }
    return ckpt;
}

Checkpoint make_checkpoint(const ParamStore& ps, const RunConfig& cfg, std::uint64_t step,
                           const std::string& rng_state) {
    Checkpoint ckpt;
    ckpt.config_text = serialize_config(cfg);
    ckpt.step = step;
    ckpt.seed = cfg.seed;
    ckpt.rng_state = rng_state;
    ckpt.arrays.reserve(ps.size());
    for (const auto& name : ps.names()) {
        ckpt.arrays.emplace_back(name, ps.get(name).value());
    }
    return ckpt;
}

void restore_params(const Checkpoint& ckpt, ParamStore& ps) {
    require(ckpt.arrays.size() == ps.size(),
            "restore_params: checkpoint has " + std::to_string(ckpt.arrays.size()) +
                " arrays, store has " + std::to_string(ps.size()));
    for (const auto& [name, value] : ckpt.arrays) {
        require(ps.has(name), "restore_params: store is missing '" + name + "'");
        ad::Var param = ps.get(name);
        require(param.value().rows() == value.rows() && param.value().cols() == value.cols(),
                "restore_params: shape mismatch for '" + name + "'");
        param.set_value(value);
    }
}

} // namespace mcsp
