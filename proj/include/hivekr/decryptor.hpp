#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hivekr/layout.hpp"
#include "hivekr/solver.hpp"

namespace hivekr {

// A fully known master key as a ResolvedKey (every offset resolved).
ResolvedKey resolved_from_master(const MasterKey& key);

enum class DecryptOutcome {
    Full,     // every encrypted byte had both keystream bytes resolved
    Partial,  // some positions left as ciphertext
};

// Invert the cipher on a whole-file buffer. Positions whose keystream
// bytes are not all resolved keep their ciphertext value; their count is
// added to *unresolved when given.
std::vector<uint8_t> decrypt_bytes(std::span<const uint8_t> infected, const ResolvedKey& key,
                                   uint64_t r1, uint64_t r2, uint64_t* unresolved = nullptr);

struct FileDecryptResult {
    std::string infected_path;
    std::string output_path;
    std::string mask_path;  // Partial only: sidecar listing unresolved runs
    DecryptOutcome outcome = DecryptOutcome::Full;
    uint64_t unresolved_bytes = 0;
};

// Decrypt one infected file into output_dir under its decoded original
// name. Throws MalformedName / std::runtime_error on bad input.
FileDecryptResult decrypt_file(const std::filesystem::path& infected,
                               const std::filesystem::path& output_dir, const ResolvedKey& key);

struct DecryptSummary {
    uint64_t full = 0;
    uint64_t partial = 0;
    uint64_t skipped_foreign = 0;    // token names a different master key
    uint64_t skipped_malformed = 0;  // .hive name that does not parse
    uint64_t skipped_other = 0;      // ransom notes, key blobs, non-infected files
    uint64_t failed = 0;             // I/O errors
    uint64_t total_unresolved_bytes = 0;
    std::vector<FileDecryptResult> files;

    uint64_t decrypted() const { return full + partial; }
};

// Walk input_dir recursively and decrypt every *.hive file into
// output_dir, mirroring the directory structure. When expected_tag is set,
// files carrying another key tag are skipped (counted, not fatal).
DecryptSummary decrypt_tree(const std::filesystem::path& input_dir,
                            const std::filesystem::path& output_dir, const ResolvedKey& key,
                            const std::optional<KeyTag>& expected_tag = std::nullopt);

}  // namespace hivekr
