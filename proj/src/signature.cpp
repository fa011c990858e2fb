#include "hivekr/signature.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hivekr/layout.hpp"

namespace hivekr {

namespace {

std::string normalize_extension(std::string_view ext) {
    while (!ext.empty() && ext.front() == '.') ext.remove_prefix(1);
    std::string out(ext);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

const SignatureDb& SignatureDb::builtin() {
    static const SignatureDb db = [] {
        SignatureDb d;
        d.add({"pdf", {0x25, 0x50, 0x44, 0x46, 0x2D}, 0});                       // %PDF-
        d.add({"zip", {0x50, 0x4B, 0x03, 0x04}, 0});                             // PK\x03\x04
        d.add({"docx", {0x50, 0x4B, 0x03, 0x04}, 0});
        d.add({"xlsx", {0x50, 0x4B, 0x03, 0x04}, 0});
        d.add({"png", {0x89, 0x50, 0x4E, 0x47, 0x0D, 0x0A, 0x1A, 0x0A}, 0});
        d.add({"jpg", {0xFF, 0xD8, 0xFF}, 0});
        d.add({"hwp", {0xD0, 0xCF, 0x11, 0xE0, 0xA1, 0xB1, 0x1A, 0xE1}, 0});     // CFB container
        return d;
    }();
    return db;
}

SignatureDb SignatureDb::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open signature db: " + path.string());
    SignatureDb db;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        std::istringstream fields(line);
        std::string ext, hex, off;
        if (!std::getline(fields, ext, ',') || !std::getline(fields, hex, ',') ||
            !std::getline(fields, off)) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": expected 'extension,hex_magic,offset'");
        }
        const auto magic = from_hex(hex);
        if (!magic || magic->empty()) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": bad hex magic '" + hex + "'");
        }
        uint64_t offset = 0;
        try {
            size_t used = 0;
            offset = std::stoull(off, &used, 0);
            if (used != off.size()) throw std::invalid_argument(off);
        } catch (const std::exception&) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": bad offset '" + off + "'");
        }
        db.add({normalize_extension(ext), *magic, offset});
    }
    return db;
}

void SignatureDb::add(SignatureEntry entry) {
    entry.extension = normalize_extension(entry.extension);
    entries_.push_back(std::move(entry));
}

const SignatureEntry* SignatureDb::find(std::string_view extension) const {
    const std::string key = normalize_extension(extension);
    for (const auto& e : entries_) {
        if (e.extension == key) return &e;
    }
    return nullptr;
}

void SignatureDb::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "# extension,hex_magic,offset\n";
    for (const auto& e : entries_) {
        out << e.extension << ','
            << to_hex(std::span<const uint8_t>(e.magic.data(), e.magic.size())) << ','
            << e.offset_in_file << '\n';
    }
}

}  // namespace hivekr
