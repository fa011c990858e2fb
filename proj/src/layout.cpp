#include "hivekr/layout.hpp"

#include <algorithm>

#include "hivekr/base64url.hpp"

namespace hivekr {

uint64_t EncryptionLayout::encrypted_bytes() const {
    uint64_t total = 0;
    for (const Span& s : spans) total += s.length;
    return total;
}

uint64_t compute_nbs(uint64_t file_size) {
    if (file_size <= kEncryptedBlockBytes) return 0;
    const uint64_t blocks = file_size >> 12;
    uint64_t t;
    if (file_size < 0x20000) {
        t = blocks;
    } else if (file_size < 0x100000) {
        t = blocks * 30 / 100;
    } else if (file_size < 0xA00000) {
        t = blocks * 20 / 100;
    } else if (file_size < 0x6400000) {
        t = blocks * 10 / 100;
    } else if (file_size < 0x40000000) {
        t = blocks * 5 / 100;
    } else {
        t = blocks * 1 / 100;
    }
    if (t == 1) return 0;
    return (file_size - (t << 12)) / (t - 1);
}

EncryptionLayout encrypted_spans(uint64_t file_size) {
    EncryptionLayout layout{file_size, compute_nbs(file_size), {}};
    if (file_size == 0) return layout;
    if (file_size <= kEncryptedBlockBytes) {
        layout.spans.push_back({0, file_size});
        return layout;
    }
    const uint64_t period = kEncryptedBlockBytes + layout.nbs;
    const uint64_t iter = file_size / period;
    layout.spans.reserve(iter + 1);
    for (uint64_t k = 0; k < iter; ++k) layout.spans.push_back({k * period, kEncryptedBlockBytes});
    const uint64_t tail = file_size - iter * period;
    if (tail > kEncryptedBlockBytes) {
        layout.spans.push_back({file_size - kEncryptedBlockBytes, kEncryptedBlockBytes});
    } else if (tail > 0) {
        layout.spans.push_back({file_size - tail, tail});
    }
    return layout;
}

KeystreamOffsets keystream_offsets(uint64_t r1, uint64_t r2) {
    return {static_cast<uint32_t>(r1 % kSp1Modulus), static_cast<uint32_t>(r2 % kSp2Modulus)};
}

namespace {

void put_u64_le(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint64_t get_u64_le(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
    return v;
}

}  // namespace

std::string encode_filename(std::string_view original_name, const FileToken& token) {
    std::vector<uint8_t> payload;
    payload.reserve(32);
    payload.insert(payload.end(), token.key_tag.begin(), token.key_tag.end());
    put_u64_le(payload, token.r1);
    put_u64_le(payload, token.r2);
    std::string out(original_name);
    out += '.';
    out += base64url::encode(payload);
    out += kInfectedSuffix;
    return out;
}

DecodedName decode_filename(std::string_view infected_name) {
    if (infected_name.size() <= kInfectedSuffix.size() ||
        !infected_name.ends_with(kInfectedSuffix)) {
        throw MalformedName("missing .hive suffix: " + std::string(infected_name));
    }
    std::string_view stem = infected_name.substr(0, infected_name.size() - kInfectedSuffix.size());
    const size_t dot = stem.rfind('.');
    if (dot == std::string_view::npos || dot == 0) {
        throw MalformedName("no token segment: " + std::string(infected_name));
    }
    std::string_view segment = stem.substr(dot + 1);
    if (segment.size() != kTokenChars) {
        throw MalformedName("token segment is not 43 chars: " + std::string(infected_name));
    }
    const auto payload = base64url::decode(segment);
    if (!payload || payload->size() != 32) {
        throw MalformedName("token segment is not valid base64url: " + std::string(infected_name));
    }
    DecodedName result;
    result.original_name = std::string(stem.substr(0, dot));
    std::copy_n(payload->begin(), 16, result.token.key_tag.begin());
    result.token.r1 = get_u64_le(payload->data() + 16);
    result.token.r2 = get_u64_le(payload->data() + 24);
    return result;
}

std::optional<DecodedName> try_decode_filename(std::string_view infected_name) noexcept {
    try {
        return decode_filename(infected_name);
    } catch (...) {
        return std::nullopt;
    }
}

std::string key_file_name(const KeyTag& tag) {
    return base64url::encode(std::span<const uint8_t>(tag.data(), tag.size())) +
           std::string(kKeyFileSuffix);
}

std::string to_hex(std::span<const uint8_t> bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (uint8_t b : bytes) {
        out += kDigits[b >> 4];
        out += kDigits[b & 0xF];
    }
    return out;
}

std::optional<std::vector<uint8_t>> from_hex(std::string_view text) {
    if (text.size() % 2 != 0) return std::nullopt;
    auto nib = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    std::vector<uint8_t> out;
    out.reserve(text.size() / 2);
    for (size_t i = 0; i < text.size(); i += 2) {
        const int hi = nib(text[i]);
        const int lo = nib(text[i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out.push_back(static_cast<uint8_t>((hi << 4) | lo));
    }
    return out;
}

}  // namespace hivekr
