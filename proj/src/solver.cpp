#include "hivekr/solver.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <numeric>

namespace fs = std::filesystem;

namespace hivekr {

KeyGraph::KeyGraph(uint32_t domain)
    : parent_(domain), delta_(domain, 0), size_(domain, 1), next_(domain) {
    std::iota(parent_.begin(), parent_.end(), 0u);
    std::iota(next_.begin(), next_.end(), 0u);
}

std::pair<uint32_t, uint8_t> KeyGraph::find(uint32_t x) const {
    // Pass 1: locate the root and the accumulated delta along the path.
    uint32_t root = x;
    uint8_t total = 0;
    while (parent_[root] != root) {
        total ^= delta_[root];
        root = parent_[root];
    }
    // Pass 2: point every node on the path straight at the root.
    uint32_t cur = x;
    uint8_t dtr = total;  // delta from cur to root
    while (cur != root) {
        const uint32_t next = parent_[cur];
        const uint8_t step = delta_[cur];
        parent_[cur] = root;
        delta_[cur] = dtr;
        cur = next;
        dtr ^= step;
    }
    return {root, total};
}

KeyGraph::AddResult KeyGraph::add_equation(const Equation& eq, uint32_t source_id) {
    if (eq.a >= parent_.size() || eq.b >= parent_.size()) {
        throw std::out_of_range("equation offset exceeds the graph domain");
    }
    auto [ra, da] = find(eq.a);
    auto [rb, db] = find(eq.b);
    if (ra == rb) {
        if (static_cast<uint8_t>(da ^ db) == eq.v) {
            ++redundant_;
            return AddResult::Redundant;
        }
        contradictions_.push_back({eq, source_id});
        return AddResult::Contradiction;
    }
    if (size_[ra] < size_[rb]) {
        std::swap(ra, rb);
        std::swap(da, db);
    }
    // key[a] = key[ra] ^ da and key[b] = key[rb] ^ db, so the equation
    // pins key[rb] = key[ra] ^ da ^ db ^ v.
    parent_[rb] = ra;
    delta_[rb] = static_cast<uint8_t>(da ^ db ^ eq.v);
    size_[ra] += size_[rb];
    std::swap(next_[ra], next_[rb]);  // splice the two member rings
    ++merged_;
    return AddResult::Merged;
}

std::optional<uint8_t> KeyGraph::relation(uint32_t a, uint32_t b) const {
    auto [ra, da] = find(a);
    auto [rb, db] = find(b);
    if (ra != rb) return std::nullopt;
    return static_cast<uint8_t>(da ^ db);
}

uint32_t KeyGraph::find_root(uint32_t offset) const { return find(offset).first; }

uint8_t KeyGraph::delta_to_root(uint32_t offset) const { return find(offset).second; }

uint32_t KeyGraph::component_size(uint32_t offset) const { return size_[find(offset).first]; }

void KeyGraph::for_each_member(uint32_t offset,
                               const std::function<void(uint32_t)>& fn) const {
    uint32_t cur = offset;
    do {
        fn(cur);
        cur = next_[cur];
    } while (cur != offset);
}

std::vector<uint32_t> KeyGraph::component_members(uint32_t offset) const {
    std::vector<uint32_t> members;
    members.reserve(component_size(offset));
    for_each_member(offset, [&](uint32_t m) { members.push_back(m); });
    return members;
}

ComponentStats KeyGraph::component_stats() const {
    ComponentStats stats;
    for (uint32_t i = 0; i < parent_.size(); ++i) {
        if (parent_[i] != i) continue;
        if (size_[i] < 2) {
            ++stats.singleton_count;
            continue;
        }
        ++stats.component_count;
        stats.touched_offsets += size_[i];
        stats.sizes.push_back(size_[i]);
    }
    std::sort(stats.sizes.begin(), stats.sizes.end(), std::greater<>());
    stats.largest_size = stats.sizes.empty() ? 1 : stats.sizes.front();
    stats.largest_fraction_of_touched =
        stats.touched_offsets == 0
            ? 0.0
            : static_cast<double>(stats.largest_size) / static_cast<double>(stats.touched_offsets);
    return stats;
}

std::vector<uint32_t> KeyGraph::component_roots(uint32_t min_size) const {
    std::vector<uint32_t> roots;
    for (uint32_t i = 0; i < parent_.size(); ++i) {
        if (parent_[i] == i && size_[i] >= min_size) roots.push_back(i);
    }
    std::sort(roots.begin(), roots.end(), [&](uint32_t a, uint32_t b) {
        if (size_[a] != size_[b]) return size_[a] > size_[b];
        return a < b;
    });
    return roots;
}

ResolvedKey::ResolvedKey()
    : values_(kMasterKeyBytes, 0), bitmap_(kMasterKeyBytes / 8, 0) {}

void ResolvedKey::set(uint32_t offset, uint8_t value) {
    values_[offset] = value;
    uint8_t& byte = bitmap_[offset >> 3];
    const uint8_t bit = static_cast<uint8_t>(1u << (offset & 7));
    if (!(byte & bit)) {
        byte |= bit;
        ++resolved_;
    }
}

void ResolvedKey::clear(uint32_t offset) {
    uint8_t& byte = bitmap_[offset >> 3];
    const uint8_t bit = static_cast<uint8_t>(1u << (offset & 7));
    if (byte & bit) {
        byte &= static_cast<uint8_t>(~bit);
        --resolved_;
    }
    values_[offset] = 0;
}

void ResolvedKey::save(const fs::path& path) const {
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
        out.write(reinterpret_cast<const char*>(values_.data()),
                  static_cast<std::streamsize>(values_.size()));
        if (!out) throw std::runtime_error("write failed: " + path.string());
    }
    const fs::path map_path = path.string() + ".map";
    std::ofstream out(map_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + map_path.string());
    out.write(reinterpret_cast<const char*>(bitmap_.data()),
              static_cast<std::streamsize>(bitmap_.size()));
    if (!out) throw std::runtime_error("write failed: " + map_path.string());
}

ResolvedKey ResolvedKey::load(const fs::path& path) {
    ResolvedKey key;
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open: " + path.string());
        in.read(reinterpret_cast<char*>(key.values_.data()),
                static_cast<std::streamsize>(key.values_.size()));
        if (in.gcount() != static_cast<std::streamsize>(key.values_.size()) || in.peek() != EOF) {
            throw std::runtime_error("recovered key is not exactly 0xA00000 bytes: " +
                                     path.string());
        }
    }
    const fs::path map_path = path.string() + ".map";
    std::ifstream in(map_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + map_path.string());
    in.read(reinterpret_cast<char*>(key.bitmap_.data()),
            static_cast<std::streamsize>(key.bitmap_.size()));
    if (in.gcount() != static_cast<std::streamsize>(key.bitmap_.size()) || in.peek() != EOF) {
        throw std::runtime_error("resolution map is not exactly 0x140000 bytes: " +
                                 map_path.string());
    }
    key.resolved_ = 0;
    for (uint8_t b : key.bitmap_) key.resolved_ += std::popcount(b);
    return key;
}

uint64_t anchor(const KeyGraph& graph, ResolvedKey& key, uint32_t offset, uint8_t value,
                const std::string& provenance) {
    const uint8_t root_value = static_cast<uint8_t>(value ^ graph.delta_to_root(offset));
    // First pass: detect conflicts before mutating anything.
    uint64_t newly = 0;
    graph.for_each_member(offset, [&](uint32_t m) {
        const uint8_t implied = static_cast<uint8_t>(root_value ^ graph.delta_to_root(m));
        if (key.is_resolved(m)) {
            if (key.value_at(m) != implied) {
                throw AnchorConflict("offset " + std::to_string(m) + " already resolved to " +
                                     std::to_string(key.value_at(m)) + ", anchor implies " +
                                     std::to_string(implied));
            }
        } else {
            ++newly;
        }
    });
    graph.for_each_member(offset, [&](uint32_t m) {
        key.set(m, static_cast<uint8_t>(root_value ^ graph.delta_to_root(m)));
    });
    key.anchors().push_back({offset, value, provenance});
    return newly;
}

ChainReport chain_components(const KeyGraph& graph, ResolvedKey& key,
                             const ChainValidator& validator, uint32_t min_size) {
    ChainReport report;
    for (uint32_t root : graph.component_roots(min_size)) {
        // Skip components that already have resolved members (anchored
        // earlier, or pinned by a previous chain pass).
        bool touched = false;
        graph.for_each_member(root, [&](uint32_t m) { touched = touched || key.is_resolved(m); });
        if (touched) continue;

        const std::vector<uint32_t> members = graph.component_members(root);
        std::vector<uint8_t> deltas(members.size());
        for (size_t i = 0; i < members.size(); ++i) deltas[i] = graph.delta_to_root(members[i]);

        ChainReport::Entry entry;
        entry.root = root;
        entry.size = static_cast<uint32_t>(members.size());
        uint8_t accepted = 0;
        for (uint32_t c = 0; c < 256; ++c) {
            for (size_t i = 0; i < members.size(); ++i) {
                key.set(members[i], static_cast<uint8_t>(c ^ deltas[i]));
            }
            if (validator(key, members)) {
                ++entry.accept_count;
                accepted = static_cast<uint8_t>(c);
            }
            for (uint32_t m : members) key.clear(m);
        }
        report.total_trials += 256;
        if (entry.accept_count == 1) {
            entry.accepted_value = accepted;
            report.newly_resolved += anchor(graph, key, root, accepted, "chain");
            ++report.components_chained;
        } else {
            ++report.components_ambiguous;
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

KeyGraph rebuild_excluding(std::span<const TaggedEquation> equations,
                           const std::unordered_set<uint32_t>& excluded_sources) {
    KeyGraph graph;
    for (const TaggedEquation& te : equations) {
        if (excluded_sources.contains(te.source_id)) continue;
        graph.add_equation(te.equation, te.source_id);
    }
    return graph;
}

RecoveryRate recovery_rate(const ResolvedKey& key, const MasterKey* truth) {
    RecoveryRate result;
    result.resolved = key.resolved_count();
    result.rate = static_cast<double>(result.resolved) / static_cast<double>(kMasterKeyBytes);
    if (truth != nullptr) {
        for (uint32_t i = 0; i < kMasterKeyBytes; ++i) {
            if (key.is_resolved(i) && key.value_at(i) != truth->bytes[i]) ++result.errors;
        }
    }
    return result;
}

}  // namespace hivekr
