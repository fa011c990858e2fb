#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hivekr {

// A known-plaintext fragment for one file type: `magic` is found at
// `offset_in_file` in every healthy file with that extension.
struct SignatureEntry {
    std::string extension;  // lowercase, no leading dot
    std::vector<uint8_t> magic;
    uint64_t offset_in_file = 0;
};

class SignatureDb {
  public:
    // Built-in table: pdf, zip, docx, xlsx, png, jpg, hwp.
    static const SignatureDb& builtin();

    // Text format, one entry per line: "extension,hex_magic,offset".
    // Blank lines and lines starting with '#' are ignored.
    static SignatureDb load(const std::filesystem::path& path);

    void add(SignatureEntry entry);
    // Lookup by extension (case-insensitive, leading dot ignored).
    const SignatureEntry* find(std::string_view extension) const;
    const std::vector<SignatureEntry>& entries() const { return entries_; }

    void save(const std::filesystem::path& path) const;

  private:
    std::vector<SignatureEntry> entries_;
};

}  // namespace hivekr
