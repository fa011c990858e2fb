#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hivekr/layout.hpp"

namespace hivekr {

// The 10 MiB random master key a single infection run encrypts everything with.
struct MasterKey {
    std::vector<uint8_t> bytes;  // always kMasterKeyBytes long

    bool operator==(const MasterKey&) const = default;
};

// Deterministic key generation from a 64-bit seed (mt19937_64, 8 bytes LE
// per draw), so experiments are reproducible.
MasterKey generate_master_key(uint64_t seed);

// The exported key blob dropped next to the victim files. The original
// scheme wraps the key with an asymmetric layer before export; for the
// simulator a fixed reversible transform stands in — what matters for the
// recovery pipeline is only that the blob's MD5 names the key.
struct WrappedKey {
    std::vector<uint8_t> blob;
    KeyTag tag{};  // MD5 of blob; embedded in every infected filename
};

WrappedKey wrap_master_key(const MasterKey& key);
MasterKey unwrap_master_key(std::span<const uint8_t> blob);

KeyTag md5_digest(std::span<const uint8_t> data);

void save_master_key(const std::filesystem::path& path, const MasterKey& key);
MasterKey load_master_key(const std::filesystem::path& path);

}  // namespace hivekr
