#include "hivekr/master_key.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <random>
#include <stdexcept>

namespace hivekr {

namespace {

// Pad seed for the stand-in key wrap. Any fixed value works; the pipeline
// only relies on wrap/unwrap being inverses and the blob hashing stably.
constexpr uint64_t kWrapPadSeed = 0x68697665'77726170ULL;

std::vector<uint8_t> random_bytes(uint64_t seed, size_t count) {
    std::vector<uint8_t> out;
    out.reserve(count);
    std::mt19937_64 rng(seed);
    while (out.size() < count) {
        uint64_t v = rng();
        for (int i = 0; i < 8 && out.size() < count; ++i) {
            out.push_back(static_cast<uint8_t>(v >> (8 * i)));
        }
    }
    return out;
}

}  // namespace

MasterKey generate_master_key(uint64_t seed) {
    return MasterKey{random_bytes(seed, kMasterKeyBytes)};
}

WrappedKey wrap_master_key(const MasterKey& key) {
    if (key.bytes.size() != kMasterKeyBytes) {
        throw std::invalid_argument("master key must be exactly 0xA00000 bytes");
    }
    WrappedKey wrapped;
    wrapped.blob = key.bytes;
    const auto pad = random_bytes(kWrapPadSeed, kMasterKeyBytes);
    for (size_t i = 0; i < wrapped.blob.size(); ++i) wrapped.blob[i] ^= pad[i];
    wrapped.tag = md5_digest(wrapped.blob);
    return wrapped;
}

MasterKey unwrap_master_key(std::span<const uint8_t> blob) {
    if (blob.size() != kMasterKeyBytes) {
        throw std::invalid_argument("wrapped key blob must be exactly 0xA00000 bytes");
    }
    MasterKey key;
    key.bytes.assign(blob.begin(), blob.end());
    const auto pad = random_bytes(kWrapPadSeed, kMasterKeyBytes);
    for (size_t i = 0; i < key.bytes.size(); ++i) key.bytes[i] ^= pad[i];
    return key;
}

KeyTag md5_digest(std::span<const uint8_t> data) {
    KeyTag tag{};
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_md5(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, tag.data(), &len) != 1 || len != tag.size()) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("MD5 digest failed");
    }
    EVP_MD_CTX_free(ctx);
    return tag;
}

void save_master_key(const std::filesystem::path& path, const MasterKey& key) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(key.bytes.data()),
              static_cast<std::streamsize>(key.bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

MasterKey load_master_key(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    MasterKey key;
    key.bytes.resize(kMasterKeyBytes);
    in.read(reinterpret_cast<char*>(key.bytes.data()),
            static_cast<std::streamsize>(key.bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(kMasterKeyBytes) || in.peek() != EOF) {
        throw std::runtime_error("master key file is not exactly 0xA00000 bytes: " + path.string());
    }
    return key;
}

}  // namespace hivekr
