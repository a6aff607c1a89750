// Copyright (C) 2026 lens contributors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint files: `<name>.manifest.json` describes the config and every
// tensor (name, shape, dtype, byte offset); `<name>.bin` is the tensors'
// f32 data concatenated at the declared offsets, row-major, little-endian.

#ifndef LENS_CHECKPOINT_IO_HPP
#define LENS_CHECKPOINT_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lens/model.hpp"

namespace lens {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian");

inline constexpr const char* kCheckpointFormat = "lens-checkpoint-v1";

inline json config_to_json(const ModelConfig& cfg) {
    return json{{"n_layers", cfg.n_layers},   {"d_model", cfg.d_model},
                {"d_ff", cfg.d_ff},           {"n_heads", cfg.n_heads},
                {"ffn_kind", to_string(cfg.ffn_kind)},
                {"vocab_size", cfg.vocab_size},
                {"activation", to_string(cfg.act)}};
}

inline ModelConfig config_from_json(const json& j) {
    ModelConfig cfg;
    try {
        cfg.n_layers = j.at("n_layers").get<std::size_t>();
        cfg.d_model = j.at("d_model").get<std::size_t>();
        cfg.d_ff = j.at("d_ff").get<std::size_t>();
        cfg.n_heads = j.at("n_heads").get<std::size_t>();
        cfg.ffn_kind = parse_ffn_kind(j.at("ffn_kind").get<std::string>());
        cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
        cfg.act = parse_activation(j.at("activation").get<std::string>());
    } catch (const json::exception& e) {
        fail(std::string("config: malformed JSON: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

/// Writes content under a temporary name first, then renames into place.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail("cannot open '" + tmp.string() + "' for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) fail("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open '" + path.string() + "' for reading");
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    return content;
}

inline std::filesystem::path manifest_path(const std::string& prefix) {
    return prefix + ".manifest.json";
}
inline std::filesystem::path blob_path(const std::string& prefix) {
    return prefix + ".bin";
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& prefix) {
    const std::vector<TensorRef> entries = tensor_entries(ckpt);

    json manifest;
    manifest["format"] = kCheckpointFormat;
    manifest["config"] = config_to_json(ckpt.config);
    json tensors = json::array();
    std::string blob;
    std::uint64_t offset = 0;
    for (const TensorRef& t : entries) {
        tensors.push_back({{"name", t.name},
                           {"shape", t.shape},
                           {"dtype", "f32"},
                           {"offset", offset}});
        for (std::size_t i = 0; i < t.count; ++i) {
            const float f = static_cast<float>(t.data[i]);
            const char* bytes = reinterpret_cast<const char*>(&f);
            blob.append(bytes, 4);
        }
        offset += t.count * 4;
    }
    manifest["tensors"] = std::move(tensors);

    write_file_atomic(manifest_path(prefix), manifest.dump(2) + "\n");
    write_file_atomic(blob_path(prefix), blob);
}

inline Checkpoint load_checkpoint(const std::string& prefix) {
    json manifest;
    try {
        manifest = json::parse(read_file(manifest_path(prefix)));
    } catch (const json::exception& e) {
        fail("checkpoint manifest '" + manifest_path(prefix).string() +
             "': " + e.what());
    }
    if (manifest.value("format", "") != kCheckpointFormat)
        fail("checkpoint manifest '" + manifest_path(prefix).string() +
             "': unknown format");

    Checkpoint ckpt = Checkpoint::allocate(config_from_json(manifest.at("config")));
    const std::vector<TensorRef> entries = tensor_entries(ckpt);

    const auto& tensors = manifest.at("tensors");
    if (!tensors.is_array() || tensors.size() != entries.size())
        fail("checkpoint manifest: expected " + std::to_string(entries.size()) +
             " tensors, found " + std::to_string(tensors.size()));

    const std::string blob = read_file(blob_path(prefix));
    std::uint64_t expected_offset = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const TensorRef& t = entries[i];
        const json& decl = tensors.at(i);
        const std::string name = decl.value("name", "");
        if (name != t.name)
            fail("checkpoint manifest: tensor " + std::to_string(i) +
                 " is '" + name + "', expected '" + t.name + "'");
        if (decl.value("dtype", "") != "f32")
            fail("checkpoint tensor '" + t.name + "': unsupported dtype");
        const auto shape = decl.at("shape").get<std::vector<std::size_t>>();
        if (shape != t.shape) {
            std::string got, want;
            for (auto v : shape) got += (got.empty() ? "" : "x") + std::to_string(v);
            for (auto v : t.shape) want += (want.empty() ? "" : "x") + std::to_string(v);
            fail("checkpoint tensor '" + t.name + "': declared shape [" + got +
                 "] does not match config shape [" + want + "]");
        }
        const auto offset = decl.value("offset", std::uint64_t(0));
        if (offset != expected_offset)
            fail("checkpoint tensor '" + t.name + "': offset " +
                 std::to_string(offset) + " does not match expected " +
                 std::to_string(expected_offset));
        const std::uint64_t bytes = static_cast<std::uint64_t>(t.count) * 4;
        if (offset + bytes > blob.size())
            fail("checkpoint blob truncated: tensor '" + t.name + "' ends at byte " +
                 std::to_string(offset + bytes) + " but blob has " +
                 std::to_string(blob.size()) + " bytes");
        for (std::size_t e = 0; e < t.count; ++e) {
            float f;
            std::memcpy(&f, blob.data() + offset + e * 4, 4);
            t.data[e] = static_cast<double>(f);
        }
        expected_offset = offset + bytes;
    }
    if (expected_offset != blob.size())
        fail("checkpoint blob has " + std::to_string(blob.size()) +
             " bytes but manifest accounts for " + std::to_string(expected_offset));
    return ckpt;
}

}  // namespace lens

#endif  // LENS_CHECKPOINT_IO_HPP
