#pragma once

// Model checkpoint file (little-endian):
//   char[8]  magic "GNETCKPT"
//   u32      version (1)
//   u64      length of the JSON config block, then the block itself:
//              {"model": <GNetConfig>, "run": <effective run config or null>}
//   u64      RNG seed
//   i64      epoch counter (0 = untrained)
//   ...      parameter payload (see write_params)

#include "gnet/errors.hpp"
#include "gnet/model.hpp"
#include "gnet/param_store.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

namespace gnet {

inline constexpr char kCheckpointMagic[8] = {'G', 'N', 'E', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    GNetConfig model_config;
    nlohmann::json run_config;
    std::uint64_t seed = 0;
    std::int64_t epoch = 0;
    ParamStore params;

    GNetModel to_model() const { return GNetModel(model_config, params.clone()); }
};

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    using namespace io_detail;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw load_error("cannot write " + path.string());
    nlohmann::json block;
    block["model"] = ck.model_config;
    block["run"] = ck.run_config;
    const std::string text = block.dump();
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    put<std::uint64_t>(out, ck.seed);
    put<std::int64_t>(out, ck.epoch);
    write_params(out, ck.params);
    if (!out) throw load_error("write failed for " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    using namespace io_detail;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw load_error("cannot open " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw format_error(path.string() + ": not a checkpoint (bad magic)");
    }
    const auto version = get<std::uint32_t>(in, "version");
    if (version != kCheckpointVersion) {
        throw format_error(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    }
    const auto len = get<std::uint64_t>(in, "config length");
    std::string text(len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw format_error(path.string() + ": truncated config block");

    Checkpoint ck;
    try {
        const auto block = nlohmann::json::parse(text);
        ck.model_config = block.at("model").get<GNetConfig>();
        ck.run_config = block.value("run", nlohmann::json{});
    } catch (const nlohmann::json::exception& e) {
        throw format_error(path.string() + ": bad config block: " + e.what());
    }
    ck.seed = get<std::uint64_t>(in, "seed");
    ck.epoch = get<std::int64_t>(in, "epoch");
    ck.params = read_params(in);
    // Validates parameter shapes against the config.
    (void)GNetModel(ck.model_config, ck.params.clone());
    return ck;
}

} // namespace gnet
