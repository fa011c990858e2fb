#include "hivekr/extraction.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace fs = std::filesystem;

namespace hivekr {

namespace {

constexpr uint32_t kKs1Mask = kKeystream1Bytes - 1;
constexpr uint32_t kKs2Mask = kKeystream2Bytes - 1;

std::ifstream open_binary(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    return in;
}

void read_exact(std::ifstream& in, const fs::path& path, uint64_t offset, uint8_t* buf,
                uint64_t len) {
    in.seekg(static_cast<std::streamoff>(offset));
    in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(len));
    if (in.gcount() != static_cast<std::streamsize>(len)) {
        throw std::runtime_error("short read at offset " + std::to_string(offset) + ": " +
                                 path.string());
    }
}

// Per-file dedup state: the (a, b) pair of a position depends only on
// p mod 0x100000, so one slot per residue suffices.
struct DedupMap {
    std::vector<uint8_t> seen;
    std::vector<uint8_t> value;

    DedupMap() : seen(kKeystream1Bytes, 0), value(kKeystream1Bytes, 0) {}

    // Returns true if the equation at this residue is new.
    bool insert(uint32_t residue, uint8_t v) {
        if (seen[residue]) {
            if (value[residue] != v) {
                throw ConflictingDuplicate(
                    "same keystream position yields different values (residue " +
                    std::to_string(residue) + ")");
            }
            return false;
        }
        seen[residue] = 1;
        value[residue] = v;
        return true;
    }
};

}  // namespace

PairVerdict verify_pair(std::span<const uint8_t> original, std::span<const uint8_t> infected) {
    if (original.size() != infected.size()) return PairVerdict::Mismatch;
    const auto layout = encrypted_spans(original.size());
    uint64_t pos = 0;
    auto gap_matches = [&](uint64_t from, uint64_t to) {
        return std::equal(original.begin() + from, original.begin() + to, infected.begin() + from);
    };
    for (const Span& s : layout.spans) {
        if (!gap_matches(pos, s.offset)) return PairVerdict::Mismatch;
        pos = s.offset + s.length;
    }
    if (!gap_matches(pos, original.size())) return PairVerdict::Mismatch;
    return PairVerdict::Match;
}

PairVerdict verify_pair_files(const fs::path& original, const fs::path& infected) {
    const uint64_t size = fs::file_size(original);
    if (size != fs::file_size(infected)) return PairVerdict::Mismatch;
    auto in_orig = open_binary(original);
    auto in_inf = open_binary(infected);
    const auto layout = encrypted_spans(size);
    std::vector<uint8_t> buf_orig(1 << 20), buf_inf(1 << 20);
    auto gap_matches = [&](uint64_t from, uint64_t to) {
        while (from < to) {
            const uint64_t chunk = std::min<uint64_t>(buf_orig.size(), to - from);
            read_exact(in_orig, original, from, buf_orig.data(), chunk);
            read_exact(in_inf, infected, from, buf_inf.data(), chunk);
            if (!std::equal(buf_orig.begin(), buf_orig.begin() + chunk, buf_inf.begin())) {
                return false;
            }
            from += chunk;
        }
        return true;
    };
    uint64_t pos = 0;
    for (const Span& s : layout.spans) {
        if (!gap_matches(pos, s.offset)) return PairVerdict::Mismatch;
        pos = s.offset + s.length;
    }
    if (!gap_matches(pos, size)) return PairVerdict::Mismatch;
    return PairVerdict::Match;
}

std::vector<Equation> extract_equations_pair(std::span<const uint8_t> original,
                                             std::span<const uint8_t> infected,
                                             const FileToken& token) {
    if (original.size() != infected.size()) {
        throw std::runtime_error("original/infected size mismatch");
    }
    const auto layout = encrypted_spans(original.size());
    const auto [sp1, sp2] = keystream_offsets(token.r1, token.r2);
    DedupMap dedup;
    std::vector<Equation> out;
    out.reserve(std::min<uint64_t>(layout.encrypted_bytes(), kKeystream1Bytes));
    for (const Span& s : layout.spans) {
        for (uint64_t i = 0; i < s.length; ++i) {
            const uint64_t p = s.offset + i;
            const uint32_t residue = static_cast<uint32_t>(p) & kKs1Mask;
            const uint8_t v = original[p] ^ infected[p];
            if (dedup.insert(residue, v)) {
                out.push_back({sp1 + residue, sp2 + (static_cast<uint32_t>(p) & kKs2Mask), v});
            }
        }
    }
    return out;
}

std::vector<Equation> extract_equations_pair_files(const fs::path& original,
                                                   const fs::path& infected,
                                                   const FileToken& token) {
    const uint64_t size = fs::file_size(original);
    if (size != fs::file_size(infected)) {
        throw std::runtime_error("original/infected size mismatch: " + original.string());
    }
    auto in_orig = open_binary(original);
    auto in_inf = open_binary(infected);
    const auto layout = encrypted_spans(size);
    const auto [sp1, sp2] = keystream_offsets(token.r1, token.r2);
    DedupMap dedup;
    std::vector<Equation> out;
    out.reserve(std::min<uint64_t>(layout.encrypted_bytes(), kKeystream1Bytes));
    std::vector<uint8_t> buf_orig(kEncryptedBlockBytes), buf_inf(kEncryptedBlockBytes);
    for (const Span& s : layout.spans) {
        read_exact(in_orig, original, s.offset, buf_orig.data(), s.length);
        read_exact(in_inf, infected, s.offset, buf_inf.data(), s.length);
        for (uint64_t i = 0; i < s.length; ++i) {
            const uint64_t p = s.offset + i;
            const uint32_t residue = static_cast<uint32_t>(p) & kKs1Mask;
            const uint8_t v = buf_orig[i] ^ buf_inf[i];
            if (dedup.insert(residue, v)) {
                out.push_back({sp1 + residue, sp2 + (static_cast<uint32_t>(p) & kKs2Mask), v});
            }
        }
    }
    return out;
}

namespace {

// Positions of the signature bytes, validated against the span layout.
std::vector<Equation> signature_equations(const FileToken& token, const SignatureEntry& signature,
                                          const EncryptionLayout& layout,
                                          std::span<const uint8_t> infected_magic) {
    const auto [sp1, sp2] = keystream_offsets(token.r1, token.r2);
    std::vector<Equation> out;
    out.reserve(signature.magic.size());
    DedupMap dedup;
    for (uint64_t m = 0; m < signature.magic.size(); ++m) {
        const uint64_t p = signature.offset_in_file + m;
        const bool inside = std::any_of(layout.spans.begin(), layout.spans.end(), [&](const Span& s) {
            return p >= s.offset && p < s.offset + s.length;
        });
        if (!inside) {
            throw SignatureOutsideEncryptedRegion(
                "signature byte at offset " + std::to_string(p) +
                " falls outside the encrypted spans (extension '" + signature.extension + "')");
        }
        const uint32_t residue = static_cast<uint32_t>(p) & kKs1Mask;
        const uint8_t v = signature.magic[m] ^ infected_magic[m];
        if (dedup.insert(residue, v)) {
            out.push_back({sp1 + residue, sp2 + (static_cast<uint32_t>(p) & kKs2Mask), v});
        }
    }
    return out;
}

}  // namespace

std::vector<Equation> extract_equations_signature(std::span<const uint8_t> infected,
                                                  const FileToken& token,
                                                  const SignatureEntry& signature) {
    if (signature.offset_in_file + signature.magic.size() > infected.size()) {
        throw SignatureOutsideEncryptedRegion("file too small for signature at offset " +
                                              std::to_string(signature.offset_in_file));
    }
    const auto layout = encrypted_spans(infected.size());
    return signature_equations(token, signature,
                               layout, infected.subspan(signature.offset_in_file,
                                                        signature.magic.size()));
}

std::vector<Equation> extract_equations_signature_file(const fs::path& infected,
                                                       const FileToken& token,
                                                       const SignatureEntry& signature) {
    const uint64_t size = fs::file_size(infected);
    if (signature.offset_in_file + signature.magic.size() > size) {
        throw SignatureOutsideEncryptedRegion("file too small for signature at offset " +
                                              std::to_string(signature.offset_in_file));
    }
    auto in = open_binary(infected);
    std::vector<uint8_t> magic(signature.magic.size());
    read_exact(in, infected, signature.offset_in_file, magic.data(), magic.size());
    const auto layout = encrypted_spans(size);
    return signature_equations(token, signature, layout, magic);
}

EksCoverage eks_coverage(uint64_t file_size) {
    const auto layout = encrypted_spans(file_size);

    auto merged_total = [](std::vector<std::pair<uint32_t, uint32_t>>& iv) -> uint32_t {
        std::sort(iv.begin(), iv.end());
        uint32_t total = 0, end = 0;
        bool open = false;
        uint32_t start = 0;
        for (const auto& [s, e] : iv) {
            if (!open || s > end) {
                if (open) total += end - start;
                start = s;
                end = e;
                open = true;
            } else {
                end = std::max(end, e);
            }
        }
        if (open) total += end - start;
        return total;
    };

    EksCoverage cov;
    {
        std::vector<std::pair<uint32_t, uint32_t>> iv;
        iv.reserve(layout.spans.size() * 2);
        for (const Span& s : layout.spans) {
            const uint32_t start = static_cast<uint32_t>(s.offset & kKs1Mask);
            const uint64_t end = start + s.length;
            if (end <= kKeystream1Bytes) {
                iv.emplace_back(start, static_cast<uint32_t>(end));
            } else {
                iv.emplace_back(start, kKeystream1Bytes);
                iv.emplace_back(0, static_cast<uint32_t>(end - kKeystream1Bytes));
            }
        }
        cov.ks1_bytes = merged_total(iv);
    }
    {
        bool full = false;
        std::vector<std::pair<uint32_t, uint32_t>> iv;
        for (const Span& s : layout.spans) {
            if (s.length >= kKeystream2Bytes) {
                full = true;
                break;
            }
            const uint32_t start = static_cast<uint32_t>(s.offset & kKs2Mask);
            const uint64_t end = start + s.length;
            if (end <= kKeystream2Bytes) {
                iv.emplace_back(start, static_cast<uint32_t>(end));
            } else {
                iv.emplace_back(start, kKeystream2Bytes);
                iv.emplace_back(0, static_cast<uint32_t>(end - kKeystream2Bytes));
            }
        }
        cov.ks2_bytes = full ? kKeystream2Bytes : merged_total(iv);
    }
    return cov;
}

namespace {

constexpr char kHeqsMagic[4] = {'H', 'E', 'Q', 'S'};
constexpr uint32_t kHeqsVersion = 1;
constexpr size_t kHeqsRecordBytes = 9;

void put_u32_le(uint8_t* p, uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<uint8_t>(v >> (8 * i));
}

void put_u64_le(uint8_t* p, uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<uint8_t>(v >> (8 * i));
}

uint32_t get_u32_le(const uint8_t* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(p[i]) << (8 * i);
    return v;
}

uint64_t get_u64_le(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
    return v;
}

}  // namespace

void write_equations(const fs::path& path, std::span<const Equation> equations) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    uint8_t header[16];
    std::memcpy(header, kHeqsMagic, 4);
    put_u32_le(header + 4, kHeqsVersion);
    put_u64_le(header + 8, equations.size());
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    std::vector<uint8_t> buf;
    buf.reserve(kHeqsRecordBytes << 13);
    for (const Equation& eq : equations) {
        uint8_t rec[kHeqsRecordBytes];
        put_u32_le(rec, eq.a);
        put_u32_le(rec + 4, eq.b);
        rec[8] = eq.v;
        buf.insert(buf.end(), rec, rec + kHeqsRecordBytes);
        if (buf.size() >= (kHeqsRecordBytes << 13)) {
            out.write(reinterpret_cast<const char*>(buf.data()),
                      static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    if (!buf.empty()) {
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Equation> read_equations(const fs::path& path) {
    auto in = open_binary(path);
    uint8_t header[16];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (in.gcount() != sizeof(header) || std::memcmp(header, kHeqsMagic, 4) != 0) {
        throw std::runtime_error("not an HEQS file: " + path.string());
    }
    if (get_u32_le(header + 4) != kHeqsVersion) {
        throw std::runtime_error("unsupported HEQS version in " + path.string());
    }
    const uint64_t count = get_u64_le(header + 8);
    std::vector<Equation> out;
    out.reserve(count);
    std::vector<uint8_t> buf(kHeqsRecordBytes << 13);
    uint64_t remaining = count;
    while (remaining > 0) {
        const uint64_t batch = std::min<uint64_t>(remaining, buf.size() / kHeqsRecordBytes);
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(batch * kHeqsRecordBytes));
        if (in.gcount() != static_cast<std::streamsize>(batch * kHeqsRecordBytes)) {
            throw std::runtime_error("truncated HEQS file: " + path.string());
        }
        for (uint64_t i = 0; i < batch; ++i) {
            const uint8_t* rec = buf.data() + i * kHeqsRecordBytes;
            Equation eq{get_u32_le(rec), get_u32_le(rec + 4), rec[8]};
            if (eq.a >= kMasterKeyBytes || eq.b >= kMasterKeyBytes) {
                throw std::runtime_error("HEQS record offset out of range: " + path.string());
            }
            out.push_back(eq);
        }
        remaining -= batch;
    }
    if (in.peek() != EOF) {
        throw std::runtime_error("trailing bytes after HEQS records: " + path.string());
    }
    return out;
}

}  // namespace hivekr
