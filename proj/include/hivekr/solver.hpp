#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "hivekr/extraction.hpp"
#include "hivekr/layout.hpp"
#include "hivekr/master_key.hpp"

namespace hivekr {

class AnchorConflict : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct ComponentStats {
    uint64_t component_count = 0;   // components with >= 2 members
    uint64_t singleton_count = 0;   // offsets no equation touches
    uint64_t touched_offsets = 0;   // sum of component sizes (>= 2)
    uint32_t largest_size = 0;
    double largest_fraction_of_touched = 0.0;  // largest_size / touched_offsets
    std::vector<uint32_t> sizes;    // all component sizes (>= 2), descending
};

// XOR-difference graph over the 0xA00000 master key offsets. Each equation
// key[a] ^ key[b] = v merges the components of a and b; a parity-weighted
// union-find stores, per offset, the XOR of its key byte with its root's,
// so any within-component relation is answerable in near-constant time.
class KeyGraph {
  public:
    enum class AddResult { Merged, Redundant, Contradiction };

    static constexpr uint32_t kNoSource = 0xFFFFFFFF;

    struct ContradictionRecord {
        Equation equation;
        uint32_t source_id = kNoSource;
    };

    // Domain defaults to the full master key; smaller domains are for
    // targeted testing of the union-find itself.
    explicit KeyGraph(uint32_t domain = kMasterKeyBytes);

    uint32_t domain() const { return static_cast<uint32_t>(parent_.size()); }

    AddResult add_equation(const Equation& eq, uint32_t source_id = kNoSource);

    // key[a] ^ key[b] if a and b are connected, nullopt otherwise.
    std::optional<uint8_t> relation(uint32_t a, uint32_t b) const;

    uint32_t find_root(uint32_t offset) const;
    // XOR of the key byte at `offset` with the one at its component root.
    uint8_t delta_to_root(uint32_t offset) const;
    uint32_t component_size(uint32_t offset) const;

    // Visit every offset in the component of `offset` (order unspecified
    // but deterministic for a fixed insertion sequence).
    void for_each_member(uint32_t offset, const std::function<void(uint32_t)>& fn) const;
    std::vector<uint32_t> component_members(uint32_t offset) const;

    ComponentStats component_stats() const;
    // Roots of all components with >= min_size members, largest first
    // (ties by root offset), for deterministic iteration.
    std::vector<uint32_t> component_roots(uint32_t min_size = 2) const;

    const std::vector<ContradictionRecord>& contradictions() const { return contradictions_; }
    uint64_t merged_count() const { return merged_; }
    uint64_t redundant_count() const { return redundant_; }

  private:
    std::pair<uint32_t, uint8_t> find(uint32_t x) const;  // {root, delta to root}

    mutable std::vector<uint32_t> parent_;
    mutable std::vector<uint8_t> delta_;  // XOR with parent's key byte
    std::vector<uint32_t> size_;          // valid at roots
    std::vector<uint32_t> next_;          // circular member list per component
    std::vector<ContradictionRecord> contradictions_;
    uint64_t merged_ = 0;
    uint64_t redundant_ = 0;
};

// Concrete key bytes recovered so far, with an unresolved mask.
class ResolvedKey {
  public:
    struct AnchorRecord {
        uint32_t offset = 0;
        uint8_t value = 0;
        std::string provenance;
    };

    ResolvedKey();

    bool is_resolved(uint32_t offset) const {
        return (bitmap_[offset >> 3] >> (offset & 7)) & 1;
    }
    uint8_t value_at(uint32_t offset) const { return values_[offset]; }
    void set(uint32_t offset, uint8_t value);
    void clear(uint32_t offset);
    uint64_t resolved_count() const { return resolved_; }

    const std::vector<uint8_t>& values() const { return values_; }
    const std::vector<uint8_t>& bitmap() const { return bitmap_; }

    std::vector<AnchorRecord>& anchors() { return anchors_; }
    const std::vector<AnchorRecord>& anchors() const { return anchors_; }

    // Writes `path` (raw 0xA00000 bytes, unresolved as 0x00) plus
    // "<path>.map" (0x140000-byte bitmap, LSB first within each byte).
    void save(const std::filesystem::path& path) const;
    static ResolvedKey load(const std::filesystem::path& path);

  private:
    std::vector<uint8_t> values_;
    std::vector<uint8_t> bitmap_;
    uint64_t resolved_ = 0;
    std::vector<AnchorRecord> anchors_;
};

// Fix the key byte at `offset` to `value` and propagate through its whole
// component. Returns how many offsets became resolved. Throws AnchorConflict
// if any member is already resolved to a different value.
uint64_t anchor(const KeyGraph& graph, ResolvedKey& key, uint32_t offset, uint8_t value,
                const std::string& provenance);

// Candidate acceptance test for chaining: `trial_offsets` lists the offsets
// materialized for this candidate (already set in `key`).
using ChainValidator =
    std::function<bool(const ResolvedKey& key, std::span<const uint32_t> trial_offsets)>;

struct ChainReport {
    struct Entry {
        uint32_t root = 0;
        uint32_t size = 0;
        uint32_t accept_count = 0;              // candidates the validator accepted
        std::optional<uint8_t> accepted_value;  // set iff accept_count == 1
    };

    std::vector<Entry> entries;
    uint64_t total_trials = 0;        // 256 per component tried
    uint64_t components_chained = 0;  // uniquely accepted and anchored
    uint64_t components_ambiguous = 0;
    uint64_t newly_resolved = 0;
};

// For every still-unresolved component (>= min_size members, largest
// first), try all 256 values of the root byte and keep the one the
// validator uniquely accepts. Ambiguous components stay unresolved.
ChainReport chain_components(const KeyGraph& graph, ResolvedKey& key,
                             const ChainValidator& validator, uint32_t min_size = 2);

struct TaggedEquation {
    Equation equation;
    uint32_t source_id = KeyGraph::kNoSource;
};

// Fresh graph from all equations whose source is not excluded. Union-find
// merges cannot be undone in place, so exclusion is a rebuild.
KeyGraph rebuild_excluding(std::span<const TaggedEquation> equations,
                           const std::unordered_set<uint32_t>& excluded_sources);

struct RecoveryRate {
    double rate = 0.0;      // resolved / 0xA00000
    uint64_t resolved = 0;
    uint64_t errors = 0;    // resolved bytes that differ from the truth key
};

RecoveryRate recovery_rate(const ResolvedKey& key, const MasterKey* truth = nullptr);

}  // namespace hivekr
