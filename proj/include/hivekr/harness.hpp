#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hivekr/decryptor.hpp"
#include "hivekr/simulator.hpp"
#include "hivekr/solver.hpp"

namespace hivekr {

// "21K", "1M±100K", "512±64", "4096+-512". Bare numbers are bytes;
// K/M/G suffixes are 1024-based.
struct SizeSpec {
    uint64_t mean = 0;
    uint64_t jitter = 0;
};

uint64_t parse_size(std::string_view text);          // throws std::invalid_argument
SizeSpec parse_size_spec(std::string_view text);     // throws std::invalid_argument

struct SimulateOptions {
    std::filesystem::path out_dir;
    std::vector<SizeClass> classes;
    uint64_t seed = 1;
    bool keep_originals = true;  // preserve a pristine copy under out_dir/originals
    bool emit_truth = true;      // write master_key.truth.bin for experiments
    ContentModel content = ContentModel::random;
    std::string signature_extension = "pdf";
};

struct SimulateResult {
    std::filesystem::path originals_dir;
    std::filesystem::path infected_dir;
    std::filesystem::path truth_path;   // empty when emit_truth is false
    std::filesystem::path report_path;
    InfectionReport report;
};

SimulateResult run_simulate(const SimulateOptions& options, std::ostream& log);

struct RecoverOptions {
    std::filesystem::path infected_dir;
    std::filesystem::path originals_dir;                 // empty → signature-only recovery
    std::filesystem::path output_key;                    // .hmk path
    std::optional<std::filesystem::path> signatures;     // signature db (file) to use
    bool use_builtin_signatures = false;
    std::optional<std::filesystem::path> truth;          // master key for anchoring/scoring
    std::optional<std::filesystem::path> report_path;    // JSON report
    std::optional<std::filesystem::path> equations_out;  // dump merged equations (HEQS)
    std::optional<std::filesystem::path> equations_in;   // skip extraction, load HEQS
    uint64_t validation_sample = 32;  // signatured files sampled for chain validation
};

struct RecoverResult {
    ResolvedKey key;
    ComponentStats stats;
    RecoveryRate rate;
    ChainReport chain;
    uint64_t sources_total = 0;
    uint64_t pairs_used = 0;
    uint64_t pairs_mismatched = 0;
    uint64_t signature_sources = 0;
    uint64_t equations_added = 0;
    uint64_t contradictions_seen = 0;
    std::vector<std::string> excluded_sources;  // infected paths dropped as inconsistent
};

RecoverResult recover_master_key(const RecoverOptions& options, std::ostream& log);

struct DecryptOptions {
    std::filesystem::path input_dir;
    std::filesystem::path output_dir;
    std::filesystem::path key_path;  // .hmk (with .map beside it) or raw master key
    std::optional<KeyTag> expected_tag;
    std::optional<std::filesystem::path> report_path;
};

DecryptSummary run_decrypt(const DecryptOptions& options, std::ostream& log);

struct ExperimentRow {
    std::string name;
    std::vector<SizeClass> classes;  // counts + size distribution
};

struct ExperimentConfig {
    std::vector<ExperimentRow> rows;
    std::vector<uint64_t> seeds;
    ContentModel content = ContentModel::random;
    std::string signature_extension = "pdf";
};

// Text config: one "experiment <name>" block per row with "files <count>
// <sizespec>" lines, plus a global "seeds <s1> <s2> ..." line.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ExperimentCell {
    std::string experiment;
    std::string size_class;
    uint64_t file_count = 0;
    std::string seed;  // number, or "mean" for the aggregate row
    double recovery_rate = 0.0;
    double full_decrypt_rate = 0.0;
    uint64_t errors = 0;
    double wall_seconds = 0.0;
};

struct ExperimentOptions {
    std::filesystem::path config;
    std::filesystem::path out_csv;
    std::filesystem::path work_dir;  // scratch space, reused per cell
    bool keep_work = false;
};

std::vector<ExperimentCell> run_experiment(const ExperimentOptions& options, std::ostream& log);

void write_experiment_csv(const std::filesystem::path& path,
                          const std::vector<ExperimentCell>& cells);

struct CoverageOptions {
    std::vector<uint64_t> sizes;
    std::optional<std::filesystem::path> out_csv;  // stdout when unset
};

int run_coverage(const CoverageOptions& options, std::ostream& out);

struct VerifyOptions {
    std::filesystem::path originals_dir;
    std::filesystem::path infected_dir;
};

struct VerifySummary {
    uint64_t matched = 0;
    uint64_t mismatched = 0;
    uint64_t unpaired = 0;  // infected files with no original on disk
};

VerifySummary run_verify(const VerifyOptions& options, std::ostream& log);

}  // namespace hivekr
