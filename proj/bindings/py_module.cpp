#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <stdexcept>

#include "hivekr/decryptor.hpp"
#include "hivekr/extraction.hpp"
#include "hivekr/layout.hpp"
#include "hivekr/master_key.hpp"
#include "hivekr/simulator.hpp"
#include "hivekr/solver.hpp"

namespace py = pybind11;
using namespace hivekr;

namespace {

std::vector<uint8_t> to_vec(const py::bytes& b) {
    const std::string s = b;
    return std::vector<uint8_t>(s.begin(), s.end());
}

py::bytes to_py(std::span<const uint8_t> v) {
    return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

KeyTag tag_from(const py::bytes& b) {
    const std::string s = b;
    if (s.size() != 16) throw std::invalid_argument("key tag must be 16 bytes");
    KeyTag tag;
    std::copy(s.begin(), s.end(), tag.begin());
    return tag;
}

MasterKey master_from(const py::bytes& b) {
    MasterKey key{to_vec(b)};
    if (key.bytes.size() != kMasterKeyBytes) {
        throw std::invalid_argument("master key must be exactly 0xA00000 bytes");
    }
    return key;
}

const char* add_result_name(KeyGraph::AddResult r) {
    switch (r) {
        case KeyGraph::AddResult::Merged: return "merged";
        case KeyGraph::AddResult::Redundant: return "redundant";
        case KeyGraph::AddResult::Contradiction: return "contradiction";
    }
    return "?";
}

}  // namespace

PYBIND11_MODULE(hivekr_py, m) {
    m.doc() = "Keystream-reuse key recovery core";

    m.attr("MASTER_KEY_BYTES") = kMasterKeyBytes;
    m.attr("KEYSTREAM1_BYTES") = kKeystream1Bytes;
    m.attr("KEYSTREAM2_BYTES") = kKeystream2Bytes;
    m.attr("ENCRYPTED_BLOCK_BYTES") = kEncryptedBlockBytes;
    m.attr("INFECTED_SUFFIX") = std::string(kInfectedSuffix);

    m.def("compute_nbs", &compute_nbs, py::arg("file_size"));
    m.def(
        "encrypted_spans",
        [](uint64_t file_size) {
            std::vector<std::pair<uint64_t, uint64_t>> out;
            for (const Span& s : encrypted_spans(file_size).spans) {
                out.emplace_back(s.offset, s.length);
            }
            return out;
        },
        py::arg("file_size"));
    m.def(
        "keystream_offsets",
        [](uint64_t r1, uint64_t r2) {
            const KeystreamOffsets off = keystream_offsets(r1, r2);
            return std::make_pair(off.sp1, off.sp2);
        },
        py::arg("r1"), py::arg("r2"));
    m.def(
        "eks_coverage",
        [](uint64_t file_size) {
            const EksCoverage cov = eks_coverage(file_size);
            return std::make_pair(cov.ks1_bytes, cov.ks2_bytes);
        },
        py::arg("file_size"));

    m.def(
        "encode_filename",
        [](const std::string& name, const py::bytes& tag, uint64_t r1, uint64_t r2) {
            return encode_filename(name, {tag_from(tag), r1, r2});
        },
        py::arg("original_name"), py::arg("key_tag"), py::arg("r1"), py::arg("r2"));
    m.def(
        "decode_filename",
        [](const std::string& name) {
            const DecodedName dec = decode_filename(name);
            return py::make_tuple(dec.original_name, to_py(dec.token.key_tag), dec.token.r1,
                                  dec.token.r2);
        },
        py::arg("infected_name"));
    m.def(
        "key_file_name", [](const py::bytes& tag) { return key_file_name(tag_from(tag)); },
        py::arg("key_tag"));

    m.def(
        "generate_master_key",
        [](uint64_t seed) { return to_py(generate_master_key(seed).bytes); }, py::arg("seed"));
    m.def(
        "wrap_master_key",
        [](const py::bytes& key) {
            const WrappedKey wrapped = wrap_master_key(master_from(key));
            return py::make_tuple(to_py(wrapped.blob),
                                  to_py(std::span<const uint8_t>(wrapped.tag)));
        },
        py::arg("master_key"));
    m.def(
        "unwrap_master_key",
        [](const py::bytes& blob) { return to_py(unwrap_master_key(to_vec(blob)).bytes); },
        py::arg("blob"));

    m.def(
        "encrypt_bytes",
        [](const py::bytes& data, const py::bytes& key, uint64_t r1, uint64_t r2) {
            return to_py(encrypt_bytes(to_vec(data), master_from(key), r1, r2));
        },
        py::arg("data"), py::arg("master_key"), py::arg("r1"), py::arg("r2"));
    m.def(
        "decrypt_bytes",
        [](const py::bytes& data, const py::bytes& key, uint64_t r1, uint64_t r2) {
            const ResolvedKey resolved = resolved_from_master(master_from(key));
            return to_py(decrypt_bytes(to_vec(data), resolved, r1, r2));
        },
        py::arg("data"), py::arg("master_key"), py::arg("r1"), py::arg("r2"));

    m.def(
        "extract_equations_pair",
        [](const py::bytes& original, const py::bytes& infected, const py::bytes& tag,
           uint64_t r1, uint64_t r2) {
            const FileToken token{tag_from(tag), r1, r2};
            std::vector<std::tuple<uint32_t, uint32_t, uint8_t>> out;
            for (const Equation& eq : extract_equations_pair(to_vec(original), to_vec(infected),
                                                             token)) {
                out.emplace_back(eq.a, eq.b, eq.v);
            }
            return out;
        },
        py::arg("original"), py::arg("infected"), py::arg("key_tag"), py::arg("r1"),
        py::arg("r2"));

    py::class_<KeyGraph>(m, "KeyGraph")
        .def(py::init<uint32_t>(), py::arg("domain") = kMasterKeyBytes)
        .def_property_readonly("domain", &KeyGraph::domain)
        .def(
            "add_equation",
            [](KeyGraph& g, uint32_t a, uint32_t b, uint8_t v) {
                return add_result_name(g.add_equation({a, b, v}));
            },
            py::arg("a"), py::arg("b"), py::arg("v"))
        .def("relation", &KeyGraph::relation, py::arg("a"), py::arg("b"))
        .def("component_size", &KeyGraph::component_size, py::arg("offset"))
        .def("contradiction_count", [](const KeyGraph& g) { return g.contradictions().size(); })
        .def("component_sizes", [](const KeyGraph& g) { return g.component_stats().sizes; });
}
