// Checkpoint file: one compact JSON header line (format version, schema and
// its hash, train config, parameter names/shapes, frozen initial variances,
// test-split indices) followed by little-endian float32 payloads in header
// order.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cardicat/errors.hpp"
#include "cardicat/model.hpp"
#include "cardicat/schema.hpp"

namespace cardicat {

inline constexpr int kCheckpointVersion = 1;

// FNV-1a over the compact schema JSON; detects a header edited or paired
// with the wrong payload, and guards sampling against schema mismatch.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::uint64_t schema_hash(const Schema& schema) { return fnv1a64(to_json(schema).dump()); }

namespace checkpoint_detail {

inline void put_f32_le(std::string& out, float v) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    out.push_back(static_cast<char>(bits & 0xFF));
    out.push_back(static_cast<char>((bits >> 8) & 0xFF));
    out.push_back(static_cast<char>((bits >> 16) & 0xFF));
    out.push_back(static_cast<char>((bits >> 24) & 0xFF));
}

inline float get_f32_le(const unsigned char* p) {
    const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                               (static_cast<std::uint32_t>(p[1]) << 8) |
                               (static_cast<std::uint32_t>(p[2]) << 16) |
                               (static_cast<std::uint32_t>(p[3]) << 24);
    return std::bit_cast<float>(bits);
}

}  // namespace checkpoint_detail

template <typename T>
void save_checkpoint(const std::string& path, const CardiCatModel<T>& model,
                     const std::vector<std::size_t>& test_indices) {
    nlohmann::json header;
    header["format_version"] = kCheckpointVersion;
    header["schema"] = to_json(model.schema);
    header["schema_hash"] = schema_hash(model.schema);
    header["config"] = to_json(model.config);
    header["params"] = nlohmann::json::array();
    for (std::size_t i = 0; i < model.store.count(); ++i) {
        const auto& p = model.store.at(i);
        header["params"].push_back(
            {{"name", p.name}, {"rows", p.value.rows}, {"cols", p.value.cols}});
    }
    header["initial_variances"] = nlohmann::json::array();
    for (T v : model.initial_variance) header["initial_variances"].push_back(static_cast<double>(v));
    header["test_indices"] = test_indices;

    std::string payload;
    std::size_t total = 0;
    for (std::size_t i = 0; i < model.store.count(); ++i) total += model.store.at(i).value.size();
    payload.reserve(total * 4);
    for (std::size_t i = 0; i < model.store.count(); ++i)
        for (T v : model.store.at(i).value.data)
            checkpoint_detail::put_f32_le(payload, static_cast<float>(v));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot open checkpoint for writing: " + path);
    out << header.dump() << '\n' << payload;
    if (!out) throw UsageError("failed writing checkpoint: " + path);
}

template <typename T>
struct LoadedCheckpoint {
    CardiCatModel<T> model;
    std::vector<std::size_t> test_indices;
};

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("checkpoint: missing header line");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint: bad header: " + std::string(e.what()));
    }
    if (header.at("format_version").get<int>() != kCheckpointVersion)
        throw DataError("checkpoint: unsupported format version");

    Schema schema = schema_from_json(header.at("schema"));
    if (header.at("schema_hash").get<std::uint64_t>() != schema_hash(schema))
        throw DataError("checkpoint: schema hash mismatch");
    TrainConfig config = train_config_from_json(header.at("config"));

    // Rebuild the model skeleton, then overwrite every tensor from the file.
    Rng rng(config.seed);
    LoadedCheckpoint<T> out{init_model<T>(schema, config, rng), {}};
    CardiCatModel<T>& model = out.model;

    const auto& params = header.at("params");
    if (params.size() != model.store.count())
        throw DataError("checkpoint: parameter count mismatch");
    std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t off = 0;
    for (std::size_t i = 0; i < model.store.count(); ++i) {
        auto& p = model.store.at(i);
        const auto& jp = params[i];
        if (jp.at("name").get<std::string>() != p.name ||
            jp.at("rows").get<std::size_t>() != p.value.rows ||
            jp.at("cols").get<std::size_t>() != p.value.cols)
            throw DataError("checkpoint: parameter '" + p.name + "' does not match header entry " +
                            std::to_string(i));
        const std::size_t bytes = p.value.size() * 4;
        if (off + bytes > payload.size()) throw DataError("checkpoint: payload truncated");
        const auto* base = reinterpret_cast<const unsigned char*>(payload.data()) + off;
        for (std::size_t k = 0; k < p.value.size(); ++k)
            p.value.data[k] = static_cast<T>(checkpoint_detail::get_f32_le(base + k * 4));
        off += bytes;
    }
    if (off != payload.size()) throw DataError("checkpoint: trailing payload bytes");

    // Frozen variances come from the file, never recomputed from the tables.
    const auto& vars = header.at("initial_variances");
    if (vars.size() != model.initial_variance.size())
        throw DataError("checkpoint: initial_variances count mismatch");
    for (std::size_t i = 0; i < model.initial_variance.size(); ++i)
        model.initial_variance[i] = static_cast<T>(vars[i].get<double>());

    out.test_indices = header.at("test_indices").get<std::vector<std::size_t>>();
    return out;
}

}  // namespace cardicat
