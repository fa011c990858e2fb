#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hivekr/layout.hpp"
#include "hivekr/master_key.hpp"

namespace hivekr {

// XOR the encrypted spans of `data` (a whole file) with the two keystreams
// selected by r1/r2. The transform is an involution: applying it to an
// infected buffer restores the plaintext.
void encrypt_in_place(std::span<uint8_t> data, const MasterKey& key, uint64_t r1, uint64_t r2);
std::vector<uint8_t> encrypt_bytes(std::span<const uint8_t> data, const MasterKey& key,
                                   uint64_t r1, uint64_t r2);

// Same transform applied to a file on disk, span by span, without loading
// the whole file. Throws std::runtime_error on I/O failure.
void encrypt_file_in_place(const std::filesystem::path& path, const MasterKey& key,
                           uint64_t r1, uint64_t r2);

enum class ContentModel {
    random,      // uniform random bytes
    signatured,  // magic-prefixed files of a single extension
};

struct SizeClass {
    uint64_t mean = 0;
    uint64_t jitter = 0;  // size drawn uniformly from [mean - jitter, mean + jitter]
    uint64_t count = 0;   // files of this class
};

struct CorpusSpec {
    std::vector<SizeClass> classes;
    uint64_t seed = 0;
    ContentModel content = ContentModel::random;
    std::string signature_extension = "pdf";  // used with ContentModel::signatured
};

// Write `spec` files under out_dir (created if missing) and return their
// paths in creation order. Deterministic for a fixed spec.
std::vector<std::filesystem::path> generate_corpus(const CorpusSpec& spec,
                                                   const std::filesystem::path& out_dir);

struct InfectionConfig {
    enum class Privilege { admin, user };

    std::filesystem::path target_root;
    std::filesystem::path key_output_dir;  // defaults to target_root when empty
    Privilege privilege = Privilege::admin;
    // Files whose name ends with one of these are left alone, in addition
    // to the built-in skips (.hive, .key.hive, the ransom note).
    std::vector<std::string> excluded_suffixes = {".lnk", ".exe", ".dll", ".sys"};
    bool drop_ransom_notes = true;
};

struct InfectedFileRecord {
    std::string path;  // relative to target_root, post-rename
    uint64_t r1 = 0;
    uint64_t r2 = 0;
    uint64_t size = 0;
};

struct InfectionReport {
    uint64_t seed = 0;
    KeyTag key_tag{};
    std::vector<InfectedFileRecord> files;
    std::vector<std::string> failed_paths;  // unreadable/locked files, skipped

    std::string to_json() const;
    static InfectionReport from_json(const std::string& text);
};

void save_report(const std::filesystem::path& path, const InfectionReport& report);
InfectionReport load_report(const std::filesystem::path& path);

// Walk target_root, encrypt every eligible file in place, rename it with the
// embedded token, drop the wrapped key blob and per-directory ransom notes.
// Per-file read/write failures are recorded in the report, not fatal;
// a missing target_root throws.
InfectionReport infect_corpus(const InfectionConfig& config, const MasterKey& key, uint64_t seed);

}  // namespace hivekr
