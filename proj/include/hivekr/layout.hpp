#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hivekr {

// Master key and keystream geometry. All values in bytes.
inline constexpr uint64_t kMasterKeyBytes = 0xA00000;       // 10 MiB
inline constexpr uint64_t kKeystream1Bytes = 0x100000;      // 1 MiB window
inline constexpr uint64_t kKeystream2Bytes = 0x400;         // 1 KiB window
inline constexpr uint64_t kEncryptedBlockBytes = 0x1000;    // 4 KiB block
inline constexpr uint64_t kSp1Modulus = kMasterKeyBytes - kKeystream1Bytes;  // 0x900000
inline constexpr uint64_t kSp2Modulus = kMasterKeyBytes - kKeystream2Bytes;  // 0x9FFC00

inline constexpr std::string_view kInfectedSuffix = ".hive";
inline constexpr std::string_view kKeyFileSuffix = ".key.hive";
inline constexpr std::string_view kRansomNoteName = "HOW_TO_DECRYPT.txt";
inline constexpr size_t kTokenChars = 43;  // base64url of the 32-byte token

using KeyTag = std::array<uint8_t, 16>;  // MD5 of the wrapped key blob

// Per-file token embedded in the infected filename: which master key the
// file was encrypted under, plus the two raw 64-bit draws that select the
// keystream windows.
struct FileToken {
    KeyTag key_tag{};
    uint64_t r1 = 0;
    uint64_t r2 = 0;

    bool operator==(const FileToken&) const = default;
};

struct KeystreamOffsets {
    uint32_t sp1 = 0;  // key offset of the 1 MiB keystream window
    uint32_t sp2 = 0;  // key offset of the 1 KiB keystream window

    bool operator==(const KeystreamOffsets&) const = default;
};

struct Span {
    uint64_t offset = 0;
    uint64_t length = 0;

    bool operator==(const Span&) const = default;
};

// Which byte ranges of a file of the given size get encrypted.
struct EncryptionLayout {
    uint64_t file_size = 0;
    uint64_t nbs = 0;  // gap between consecutive encrypted blocks
    std::vector<Span> spans;

    uint64_t encrypted_bytes() const;
};

// Non-encrypted block size for a file of `file_size` bytes. Every division
// truncates; returns 0 when the whole file (or a single block) is encrypted.
uint64_t compute_nbs(uint64_t file_size);

// Full encrypted-span layout for a file of `file_size` bytes. Spans are
// sorted by offset and never overlap.
EncryptionLayout encrypted_spans(uint64_t file_size);

// Map the raw 64-bit draws to key offsets of the two keystream windows.
KeystreamOffsets keystream_offsets(uint64_t r1, uint64_t r2);

class MalformedName : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct DecodedName {
    std::string original_name;
    FileToken token;
};

// "<name>.<43 base64url chars>.hive". The token payload is
// key_tag (16 bytes) || r1 (8 bytes LE) || r2 (8 bytes LE).
std::string encode_filename(std::string_view original_name, const FileToken& token);

// Inverse of encode_filename. Takes the last 43-char base64url segment
// before the ".hive" suffix; throws MalformedName otherwise.
DecodedName decode_filename(std::string_view infected_name);
std::optional<DecodedName> try_decode_filename(std::string_view infected_name) noexcept;

// "<22 base64url chars of the tag>.key.hive"
std::string key_file_name(const KeyTag& tag);

std::string to_hex(std::span<const uint8_t> bytes);
std::optional<std::vector<uint8_t>> from_hex(std::string_view text);

}  // namespace hivekr
