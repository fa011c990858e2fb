#include <cstring>
#include <random>
#include <sodium.h>
#include <span>
#include <string>
#include <vector>

#include "doctest.h"
#include "hivekr/base64url.hpp"
#include "hivekr/layout.hpp"
#include "support/oracles.hpp"

using namespace hivekr;

namespace {

const FileToken kExampleToken = [] {
    FileToken t;
    const auto tag = from_hex("3636a6ca269b243753ff929c834d53ca");
    std::copy(tag->begin(), tag->end(), t.key_tag.begin());
    t.r1 = 0x2e345b0798667926;
    t.r2 = 0x14199382ec72ddb6;
    return t;
}();

constexpr const char* kExampleName = "test.jpg.NjamyiabJDdT_5Kcg01TyiZ5ZpgHWzQutt1y7IKTGRQ.hive";

std::string sodium_b64url(std::span<const uint8_t> data) {
    std::string out(sodium_base64_encoded_len(data.size(), sodium_base64_VARIANT_URLSAFE_NO_PADDING),
                    '\0');
    sodium_bin2base64(out.data(), out.size(), data.data(), data.size(),
                      sodium_base64_VARIANT_URLSAFE_NO_PADDING);
    out.resize(std::strlen(out.c_str()));
    return out;
}

}  // namespace

TEST_CASE("geometry constants") {
    CHECK(kMasterKeyBytes == 0xA00000);
    CHECK(kKeystream1Bytes == 0x100000);
    CHECK(kKeystream2Bytes == 0x400);
    CHECK(kEncryptedBlockBytes == 0x1000);
    CHECK(kSp1Modulus == 0x900000);
    CHECK(kSp2Modulus == 0x9FFC00);
    CHECK(kSp1Modulus == kMasterKeyBytes - kKeystream1Bytes);
    CHECK(kSp2Modulus == kMasterKeyBytes - kKeystream2Bytes);
}

TEST_CASE("compute_nbs worked values") {
    // Hand-derived: 0x20000 -> 32 blocks, T = 32*30/100 = 9,
    // NBS = (0x20000 - 0x9000)/8 = 0x2E00.
    CHECK(compute_nbs(0x20000) == 0x2E00);
    // 0x667926 -> 0x667 blocks, T = 0x667*30/100 = 491? no: bracket
    // [0x100000, 0xA00000) uses 20%: T = 1639*20/100 = 327,
    // NBS = (0x667926 - 327*0x1000)/326 = 0x406B.
    CHECK(compute_nbs(0x667926) == 0x406B);
    // T == 1 -> 0 (whole tail encrypted in one go).
    CHECK(compute_nbs(0x1800) == 0);
    CHECK(compute_nbs(0x1000) == 0);
    CHECK(compute_nbs(0) == 0);
    CHECK(compute_nbs(1) == 0);
}

TEST_CASE("compute_nbs matches the literal transcription everywhere") {
    std::mt19937_64 rng(0xC0FFEE);
    // Bracket boundaries and their neighbors, then a broad random sweep.
    const uint64_t edges[] = {0,          1,          0xFFF,      0x1000,     0x1001,
                              0x1FFF,     0x2000,     0x1FFFF,    0x20000,    0x20001,
                              0xFFFFF,    0x100000,   0x9FFFFF,   0xA00000,   0xA00001,
                              0x63FFFFF,  0x6400000,  0x3FFFFFFF, 0x40000000, 0x40000001,
                              0x100000000};
    for (uint64_t fs : edges) CHECK(compute_nbs(fs) == oracles::reference_nbs(fs));
    for (int i = 0; i < 20000; ++i) {
        const uint64_t fs = rng() % 0x200000000ull;
        CAPTURE(fs);
        CHECK(compute_nbs(fs) == oracles::reference_nbs(fs));
    }
}

TEST_CASE("encrypted_spans structural invariants") {
    std::mt19937_64 rng(0xBADA55);
    auto check_layout = [](uint64_t fs) {
        const EncryptionLayout layout = encrypted_spans(fs);
        CAPTURE(fs);
        CHECK(layout.file_size == fs);
        CHECK(layout.nbs == compute_nbs(fs));
        if (fs == 0) {
            CHECK(layout.spans.empty());
            return;
        }
        uint64_t prev_end = 0;
        for (size_t i = 0; i < layout.spans.size(); ++i) {
            const Span& s = layout.spans[i];
            CHECK(s.length > 0);
            CHECK(s.length <= kEncryptedBlockBytes);
            if (i > 0) CHECK(s.offset >= prev_end);  // sorted, non-overlapping
            prev_end = s.offset + s.length;
            CHECK(prev_end <= fs);
        }
        CHECK(layout.encrypted_bytes() <= fs);
        // First block always starts at 0; the file tail is always covered.
        CHECK(layout.spans.front().offset == 0);
        CHECK(layout.spans.back().offset + layout.spans.back().length == fs);
    };
    for (uint64_t fs = 1; fs <= 0x3000; ++fs) check_layout(fs);
    for (int i = 0; i < 3000; ++i) check_layout(1 + rng() % 0x8000000ull);
    check_layout(0);
}

TEST_CASE("encrypted_spans equals the block-walk transcription") {
    std::mt19937_64 rng(7);
    auto check = [](uint64_t fs) {
        const auto layout = encrypted_spans(fs);
        const auto ref = oracles::reference_spans(fs);
        CAPTURE(fs);
        REQUIRE(layout.spans.size() == ref.size());
        for (size_t i = 0; i < ref.size(); ++i) {
            CHECK(layout.spans[i].offset == ref[i].first);
            CHECK(layout.spans[i].length == ref[i].second);
        }
    };
    for (uint64_t fs = 0; fs <= 0x22000; ++fs) check(fs);
    for (int i = 0; i < 2000; ++i) check(rng() % 0x80000000ull);
}

TEST_CASE("worked example: layout of a 0x667926-byte file") {
    const EncryptionLayout layout = encrypted_spans(0x667926);
    CHECK(layout.nbs == 0x406B);
    // 326 periodic blocks at k*(0x1000+0x406B), plus the final block
    // anchored to the end of the file: 327 spans total.
    REQUIRE(layout.spans.size() == 327);
    const uint64_t period = 0x1000 + 0x406B;
    for (size_t k = 0; k < 326; ++k) {
        CHECK(layout.spans[k].offset == k * period);
        CHECK(layout.spans[k].length == 0x1000);
    }
    CHECK(layout.spans.back().offset == 0x666926);
    CHECK(layout.spans.back().length == 0x1000);
}

TEST_CASE("periodic block counts stay within the published bracket ranges") {
    // The published table counts the periodic blocks, iter = FS/(0x1000+NBS);
    // the tail block the walk always appends is not included. Exhaustive
    // scans of brackets 1-5 (and the first 256 MiB of bracket 6) confirm
    // the ranges below are exact.
    struct Bracket {
        uint64_t lo, hi;       // [lo, hi)
        uint64_t min_blocks, max_blocks;
    };
    const Bracket brackets[] = {
        {0x1001, 0x20000, 1, 31},
        {0x20000, 0x100000, 8, 75},
        {0x100000, 0xA00000, 50, 510},
        {0xA00000, 0x6400000, 255, 2558},
        {0x6400000, 0x40000000, 1279, 13106},
    };
    std::mt19937_64 rng(0x5EED);
    for (const Bracket& br : brackets) {
        for (int i = 0; i < 2000; ++i) {
            const uint64_t fs = br.lo + rng() % (br.hi - br.lo);
            const uint64_t iter = fs / (kEncryptedBlockBytes + compute_nbs(fs));
            CAPTURE(fs);
            CHECK(iter >= br.min_blocks);
            CHECK(iter <= br.max_blocks);
            // Total spans: the periodic blocks plus at most one tail block.
            const auto layout = encrypted_spans(fs);
            CHECK(layout.spans.size() >= iter);
            CHECK(layout.spans.size() <= iter + 1);
        }
    }
    // Bracket 6 has no published upper bound; check the floor.
    for (int i = 0; i < 200; ++i) {
        const uint64_t fs = 0x40000000ull + rng() % (1ull << 28);
        CHECK(fs / (kEncryptedBlockBytes + compute_nbs(fs)) >= 2620);
    }
}

TEST_CASE("keystream_offsets worked example") {
    const KeystreamOffsets off = keystream_offsets(kExampleToken.r1, kExampleToken.r2);
    CHECK(off.sp1 == 0x667926);
    CHECK(off.sp2 == 0x24f5b6);
    // Offsets always leave room for a full window.
    std::mt19937_64 rng(11);
    for (int i = 0; i < 10000; ++i) {
        const KeystreamOffsets o = keystream_offsets(rng(), rng());
        CHECK(o.sp1 < kSp1Modulus);
        CHECK(o.sp2 < kSp2Modulus);
        CHECK(o.sp1 + kKeystream1Bytes <= kMasterKeyBytes);
        CHECK(o.sp2 + kKeystream2Bytes <= kMasterKeyBytes);
    }
}

TEST_CASE("base64url agrees with libsodium") {
    REQUIRE(sodium_init() >= 0);
    std::mt19937_64 rng(99);
    for (int len = 0; len <= 80; ++len) {
        std::vector<uint8_t> data(len);
        for (auto& b : data) b = static_cast<uint8_t>(rng());
        const std::string mine = base64url::encode(data);
        CHECK(mine == sodium_b64url(data));
        const auto back = base64url::decode(mine);
        REQUIRE(back.has_value());
        CHECK(*back == data);
    }
}

TEST_CASE("base64url strict decoding") {
    CHECK(base64url::decode("") .has_value());
    CHECK_FALSE(base64url::decode("A").has_value());        // 6 bits cannot make a byte
    CHECK_FALSE(base64url::decode("AB=").has_value());      // padding is not part of the alphabet
    CHECK_FALSE(base64url::decode("A+").has_value());       // '+' is base64, not base64url
    CHECK_FALSE(base64url::decode("A/").has_value());
    CHECK(base64url::decode("-w")->at(0) == 0xFB);          // URL-safe alphabet accepted
    CHECK(base64url::decode("_w")->at(0) == 0xFF);
    CHECK_FALSE(base64url::decode("-_").has_value());       // non-zero leftover bits
    CHECK_FALSE(base64url::decode("AC").has_value());
    CHECK(base64url::decode("AA").has_value());
    CHECK(base64url::decode("AQ")->at(0) == 1);
}

TEST_CASE("filename codec worked example") {
    CHECK(encode_filename("test.jpg", kExampleToken) == kExampleName);
    const DecodedName decoded = decode_filename(kExampleName);
    CHECK(decoded.original_name == "test.jpg");
    CHECK(decoded.token == kExampleToken);
}

TEST_CASE("filename codec round-trips arbitrary names") {
    std::mt19937_64 rng(123);
    const char* names[] = {"a",  "report.final.v2.pdf", "no_extension",
                           "x.y.z.w.q", "file with spaces.txt", "trailing.dot."};
    for (const char* name : names) {
        FileToken token;
        for (auto& b : token.key_tag) b = static_cast<uint8_t>(rng());
        token.r1 = rng();
        token.r2 = rng();
        const std::string infected = encode_filename(name, token);
        CHECK(infected.ends_with(".hive"));
        const DecodedName decoded = decode_filename(infected);
        CHECK(decoded.original_name == name);
        CHECK(decoded.token == token);
    }
}

TEST_CASE("decode takes the last 43-char segment before .hive") {
    // An original name that itself contains a 43-char base64url-looking
    // segment must survive the round trip.
    const std::string tricky = "backup.AAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAA.old";
    const std::string infected = encode_filename(tricky, kExampleToken);
    const DecodedName decoded = decode_filename(infected);
    CHECK(decoded.original_name == tricky);
    CHECK(decoded.token == kExampleToken);
}

TEST_CASE("malformed infected names are rejected") {
    CHECK_THROWS_AS(decode_filename("test.jpg"), MalformedName);  // no suffix
    CHECK_THROWS_AS(decode_filename(".hive"), MalformedName);
    CHECK_THROWS_AS(decode_filename("x.hive"), MalformedName);    // no token segment
    // 42 and 44 char segments.
    CHECK_THROWS_AS(decode_filename("f.NjamyiabJDdT_5Kcg01TyiZ5ZpgHWzQutt1y7IKTGR.hive"),
                    MalformedName);
    CHECK_THROWS_AS(decode_filename("f.NjamyiabJDdT_5Kcg01TyiZ5ZpgHWzQutt1y7IKTGRQQ.hive"),
                    MalformedName);
    // Right length, bad alphabet.
    CHECK_THROWS_AS(decode_filename("f.NjamyiabJDdT+5Kcg01TyiZ5ZpgHWzQutt1y7IKTGRQ.hive"),
                    MalformedName);
    // Right length and alphabet, non-canonical trailing bits (last char
    // 'R' leaves non-zero leftover bits; 43 chars must encode 32 bytes).
    CHECK_THROWS_AS(decode_filename("f.NjamyiabJDdT_5Kcg01TyiZ5ZpgHWzQutt1y7IKTGRR.hive"),
                    MalformedName);
    // Token segment must be its own dot-separated segment.
    CHECK_THROWS_AS(decode_filename("fNjamyiabJDdT_5Kcg01TyiZ5ZpgHWzQutt1y7IKTGRQ.hive"),
                    MalformedName);
    CHECK_FALSE(try_decode_filename("nope.hive").has_value());
    CHECK(try_decode_filename(kExampleName).has_value());
}

TEST_CASE("key file name") {
    // 16-byte tag -> 22 unpadded base64url chars. Value frozen from the
    // python/libsodium oracle.
    const std::string name = key_file_name(kExampleToken.key_tag);
    CHECK(name == "NjamyiabJDdT_5Kcg01Tyg.key.hive");
    CHECK(name.size() == 22 + 9);
    CHECK(sodium_b64url(std::span<const uint8_t>(kExampleToken.key_tag.data(), 16)) ==
          "NjamyiabJDdT_5Kcg01Tyg");
    CHECK(name.ends_with(kKeyFileSuffix));
    // A key file name also ends with ".hive": infected-file scans must use
    // the more specific suffix first.
    CHECK(name.ends_with(kInfectedSuffix));
}

TEST_CASE("hex helpers") {
    const std::vector<uint8_t> bytes = {0x00, 0xff, 0x12, 0xab};
    CHECK(to_hex(bytes) == "00ff12ab");
    CHECK(from_hex("00ff12ab") == bytes);
    CHECK(from_hex("00FF12AB") == bytes);
    CHECK_FALSE(from_hex("0").has_value());
    CHECK_FALSE(from_hex("zz").has_value());
}
