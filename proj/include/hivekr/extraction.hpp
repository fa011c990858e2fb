#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hivekr/layout.hpp"
#include "hivekr/signature.hpp"

namespace hivekr {

// One linear constraint over master key bytes: key[a] ^ key[b] = v.
// Always a < kMasterKeyBytes and b < kMasterKeyBytes by construction.
struct Equation {
    uint32_t a = 0;  // sp1 + (p mod 0x100000)
    uint32_t b = 0;  // sp2 + (p mod 0x400)
    uint8_t v = 0;   // plain[p] ^ infected[p]

    bool operator==(const Equation&) const = default;
};

class ConflictingDuplicate : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class SignatureOutsideEncryptedRegion : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class PairVerdict { Match, Mismatch };

// Does `infected` look like `original` run through the cipher? Checks the
// sizes agree and every byte outside the encrypted spans is untouched.
PairVerdict verify_pair(std::span<const uint8_t> original, std::span<const uint8_t> infected);
PairVerdict verify_pair_files(const std::filesystem::path& original,
                              const std::filesystem::path& infected);

// Equations from a full original/infected pair. Within one file the same
// (a, b) pair recurs every 0x100000 positions; duplicates are dropped
// (first occurrence wins) and a disagreeing duplicate throws
// ConflictingDuplicate — the pairing is wrong or a file is damaged.
std::vector<Equation> extract_equations_pair(std::span<const uint8_t> original,
                                             std::span<const uint8_t> infected,
                                             const FileToken& token);
std::vector<Equation> extract_equations_pair_files(const std::filesystem::path& original,
                                                   const std::filesystem::path& infected,
                                                   const FileToken& token);

// Equations from just an infected file whose type has a known magic. Every
// magic byte position must fall inside an encrypted span, otherwise
// SignatureOutsideEncryptedRegion is thrown.
std::vector<Equation> extract_equations_signature(std::span<const uint8_t> infected,
                                                  const FileToken& token,
                                                  const SignatureEntry& signature);
std::vector<Equation> extract_equations_signature_file(const std::filesystem::path& infected,
                                                       const FileToken& token,
                                                       const SignatureEntry& signature);

// How many distinct bytes of each keystream window a file of this size
// exercises (equivalently: how many master key bytes its equations touch
// relative to sp1/sp2).
struct EksCoverage {
    uint32_t ks1_bytes = 0;  // <= kKeystream1Bytes
    uint32_t ks2_bytes = 0;  // <= kKeystream2Bytes

    bool operator==(const EksCoverage&) const = default;
};

EksCoverage eks_coverage(uint64_t file_size);

// Equation container format (HEQS): magic "HEQS", u32 version = 1, u64
// count, then packed records {u32 a, u32 b, u8 v}. All integers little-endian.
void write_equations(const std::filesystem::path& path, std::span<const Equation> equations);
std::vector<Equation> read_equations(const std::filesystem::path& path);

}  // namespace hivekr
