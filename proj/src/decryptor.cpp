#include "hivekr/decryptor.hpp"

#include <algorithm>
#include <fstream>
#include <utility>

namespace fs = std::filesystem;

namespace hivekr {

namespace {

constexpr uint32_t kKs1Mask = kKeystream1Bytes - 1;
constexpr uint32_t kKs2Mask = kKeystream2Bytes - 1;

// XOR one encrypted span with the recovered keystreams. Positions missing
// either keystream byte are left alone and counted; when `runs` is given
// they are also recorded as (file offset, length) runs.
uint64_t xor_span_resolved(uint8_t* buf, uint64_t span_offset, uint64_t length,
                           const ResolvedKey& key, uint32_t sp1, uint32_t sp2,
                           std::vector<std::pair<uint64_t, uint64_t>>* runs = nullptr) {
    uint64_t unresolved = 0;
    for (uint64_t i = 0; i < length; ++i) {
        const uint64_t p = span_offset + i;
        const uint32_t k1 = sp1 + (static_cast<uint32_t>(p) & kKs1Mask);
        const uint32_t k2 = sp2 + (static_cast<uint32_t>(p) & kKs2Mask);
        if (key.is_resolved(k1) && key.is_resolved(k2)) {
            buf[i] ^= key.value_at(k1) ^ key.value_at(k2);
        } else {
            ++unresolved;
            if (runs != nullptr) {
                if (!runs->empty() && runs->back().first + runs->back().second == p) {
                    ++runs->back().second;
                } else {
                    runs->emplace_back(p, 1);
                }
            }
        }
    }
    return unresolved;
}

}  // namespace

ResolvedKey resolved_from_master(const MasterKey& key) {
    if (key.bytes.size() != kMasterKeyBytes) {
        throw std::invalid_argument("master key must be exactly 0xA00000 bytes");
    }
    ResolvedKey resolved;
    for (uint32_t i = 0; i < kMasterKeyBytes; ++i) resolved.set(i, key.bytes[i]);
    resolved.anchors().push_back({0, key.bytes[0], "master"});
    return resolved;
}

std::vector<uint8_t> decrypt_bytes(std::span<const uint8_t> infected, const ResolvedKey& key,
                                   uint64_t r1, uint64_t r2, uint64_t* unresolved) {
    std::vector<uint8_t> out(infected.begin(), infected.end());
    const auto layout = encrypted_spans(out.size());
    const auto [sp1, sp2] = keystream_offsets(r1, r2);
    uint64_t missing = 0;
    for (const Span& s : layout.spans) {
        missing += xor_span_resolved(out.data() + s.offset, s.offset, s.length, key, sp1, sp2);
    }
    if (unresolved != nullptr) *unresolved = missing;
    return out;
}

FileDecryptResult decrypt_file(const fs::path& infected, const fs::path& output_dir,
                               const ResolvedKey& key) {
    const DecodedName decoded = decode_filename(infected.filename().string());
    fs::create_directories(output_dir);
    const fs::path out_path = output_dir / decoded.original_name;

    fs::copy_file(infected, out_path, fs::copy_options::overwrite_existing);
    const uint64_t size = fs::file_size(out_path);
    const auto layout = encrypted_spans(size);
    const auto [sp1, sp2] = keystream_offsets(decoded.token.r1, decoded.token.r2);

    std::fstream file(out_path, std::ios::binary | std::ios::in | std::ios::out);
    if (!file) throw std::runtime_error("cannot open for update: " + out_path.string());
    std::vector<uint8_t> buf(kEncryptedBlockBytes);
    std::vector<std::pair<uint64_t, uint64_t>> runs;
    uint64_t missing = 0;
    for (const Span& s : layout.spans) {
        file.seekg(static_cast<std::streamoff>(s.offset));
        file.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(s.length));
        if (file.gcount() != static_cast<std::streamsize>(s.length)) {
            throw std::runtime_error("short read at offset " + std::to_string(s.offset) + ": " +
                                     out_path.string());
        }
        missing += xor_span_resolved(buf.data(), s.offset, s.length, key, sp1, sp2, &runs);
        file.seekp(static_cast<std::streamoff>(s.offset));
        file.write(reinterpret_cast<const char*>(buf.data()),
                   static_cast<std::streamsize>(s.length));
        if (!file) throw std::runtime_error("write failed: " + out_path.string());
    }
    file.flush();
    if (!file) throw std::runtime_error("flush failed: " + out_path.string());

    FileDecryptResult result;
    result.infected_path = infected.generic_string();
    result.output_path = out_path.generic_string();
    result.unresolved_bytes = missing;
    result.outcome = missing == 0 ? DecryptOutcome::Full : DecryptOutcome::Partial;

    // Sidecar mask so a later run with a better key can finish the file:
    // bytes in these runs are still ciphertext.
    const fs::path mask_path = out_path.string() + ".mask";
    if (missing == 0) {
        fs::remove(mask_path);  // stale mask from an earlier partial run
    } else {
        std::ofstream mask(mask_path, std::ios::trunc);
        if (!mask) throw std::runtime_error("cannot write mask: " + mask_path.string());
        mask << "# unresolved byte runs: offset,length\n";
        for (const auto& [off, len] : runs) mask << off << ',' << len << '\n';
        if (!mask.good()) throw std::runtime_error("write failed: " + mask_path.string());
        result.mask_path = mask_path.generic_string();
    }
    return result;
}

DecryptSummary decrypt_tree(const fs::path& input_dir, const fs::path& output_dir,
                            const ResolvedKey& key, const std::optional<KeyTag>& expected_tag) {
    if (!fs::is_directory(input_dir)) {
        throw std::runtime_error("input is not a directory: " + input_dir.string());
    }
    DecryptSummary summary;
    std::vector<fs::path> infected;
    for (const auto& entry : fs::recursive_directory_iterator(input_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (!name.ends_with(kInfectedSuffix) || name.ends_with(kKeyFileSuffix)) {
            ++summary.skipped_other;
            continue;
        }
        infected.push_back(entry.path());
    }
    std::sort(infected.begin(), infected.end());

    for (const fs::path& path : infected) {
        const auto decoded = try_decode_filename(path.filename().string());
        if (!decoded) {
            ++summary.skipped_malformed;
            continue;
        }
        if (expected_tag && decoded->token.key_tag != *expected_tag) {
            ++summary.skipped_foreign;
            continue;
        }
        const fs::path out_dir = output_dir / fs::relative(path.parent_path(), input_dir);
        try {
            FileDecryptResult result = decrypt_file(path, out_dir, key);
            summary.total_unresolved_bytes += result.unresolved_bytes;
            if (result.outcome == DecryptOutcome::Full) {
                ++summary.full;
            } else {
                ++summary.partial;
            }
            summary.files.push_back(std::move(result));
        } catch (const std::exception&) {
            ++summary.failed;
        }
    }
    return summary;
}

}  // namespace hivekr
