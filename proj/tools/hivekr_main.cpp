#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hivekr/harness.hpp"

namespace {

// "--files 1000x21K+-5K": count, then the size spec.
hivekr::SizeClass parse_files_arg(const std::string& text) {
    const size_t x = text.find('x');
    if (x == std::string::npos || x == 0) {
        throw std::invalid_argument("expected '<count>x<size-spec>', got '" + text + "'");
    }
    uint64_t count = 0;
    size_t used = 0;
    try {
        count = std::stoull(text.substr(0, x), &used, 10);
    } catch (const std::exception&) {
        throw std::invalid_argument("bad file count in '" + text + "'");
    }
    if (used != x || count == 0) throw std::invalid_argument("bad file count in '" + text + "'");
    const hivekr::SizeSpec spec = hivekr::parse_size_spec(text.substr(x + 1));
    return {spec.mean, spec.jitter, count};
}

hivekr::KeyTag parse_tag(const std::string& hex) {
    const auto bytes = hivekr::from_hex(hex);
    hivekr::KeyTag tag{};
    if (!bytes || bytes->size() != tag.size()) {
        throw std::invalid_argument("key tag must be 32 hex chars");
    }
    std::copy(bytes->begin(), bytes->end(), tag.begin());
    return tag;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hive-style corpus simulator, master key recovery and decryption toolkit"};
    app.require_subcommand(1);

    uint64_t jobs = 1;
    app.add_option("--jobs", jobs,
                   "worker threads (accepted for compatibility; the pipeline is sequential)");

    // --- simulate ---
    auto* sim = app.add_subcommand("simulate", "generate a corpus and infect it");
    std::string sim_out;
    std::vector<std::string> sim_files;
    uint64_t sim_seed = 1;
    std::string sim_content = "random";
    std::string sim_ext = "pdf";
    bool sim_no_originals = false, sim_emit_truth = false;
    sim->add_option("--out", sim_out, "output directory")->required();
    sim->add_option("--files", sim_files, "size class as <count>x<size-spec>, repeatable")
        ->required();
    sim->add_option("--seed", sim_seed, "deterministic seed")->capture_default_str();
    sim->add_option("--content", sim_content, "content model: random | signatured")->capture_default_str();
    sim->add_option("--signature-ext", sim_ext, "extension for signatured content")->capture_default_str();
    sim->add_flag("--no-originals", sim_no_originals, "do not keep a pristine copy");
    sim->add_flag("--emit-truth", sim_emit_truth,
                  "also write master_key.truth.bin (off by default: recovery should not see it)");

    // --- recover ---
    auto* rec = app.add_subcommand("recover", "recover the master key from infected files");
    std::string rec_in, rec_originals, rec_out = "recovered.hmk";
    std::string rec_sigs, rec_truth, rec_report, rec_eq_out, rec_eq_in;
    bool rec_builtin_sigs = false;
    rec->add_option("--in", rec_in, "directory of infected files");
    rec->add_option("--originals", rec_originals, "directory of pristine originals");
    rec->add_option("--out", rec_out, "output .hmk path")->capture_default_str();
    rec->add_option("--signatures", rec_sigs, "signature db file (extension,hex_magic,offset)");
    rec->add_flag("--builtin-signatures", rec_builtin_sigs, "use the built-in signature table");
    rec->add_option("--truth", rec_truth, "ground-truth master key (anchoring + error count)");
    rec->add_option("--report", rec_report, "write a JSON recovery report");
    rec->add_option("--equations-out", rec_eq_out, "dump the accepted equations (HEQS)");
    rec->add_option("--equations-in", rec_eq_in, "build the graph from an HEQS file instead");

    // --- decrypt ---
    auto* dec = app.add_subcommand("decrypt", "decrypt infected files with a recovered key");
    std::string dec_in, dec_out, dec_key, dec_tag, dec_report;
    dec->add_option("--in", dec_in, "directory of infected files")->required();
    dec->add_option("--out", dec_out, "output directory")->required();
    dec->add_option("--key", dec_key, ".hmk, raw master key, or *.key.hive blob")->required();
    dec->add_option("--tag", dec_tag, "only decrypt files carrying this key tag (32 hex chars)");
    dec->add_option("--report", dec_report, "write a JSON decryption report");

    // --- experiment ---
    auto* exp = app.add_subcommand("experiment", "run configured end-to-end experiments");
    std::string exp_config, exp_csv = "experiment.csv", exp_work = "experiment_work";
    bool exp_keep = false;
    exp->add_option("--config", exp_config, "experiment config file")->required();
    exp->add_option("--out", exp_csv, "output CSV path")->capture_default_str();
    exp->add_option("--work", exp_work, "scratch directory")->capture_default_str();
    exp->add_flag("--keep-work", exp_keep, "keep per-cell scratch directories");

    // --- coverage ---
    auto* cov = app.add_subcommand("coverage", "keystream coverage for given file sizes");
    std::vector<std::string> cov_sizes;
    std::string cov_from, cov_to, cov_step, cov_out;
    cov->add_option("--size", cov_sizes, "file size (repeatable)");
    cov->add_option("--from", cov_from, "range start");
    cov->add_option("--to", cov_to, "range end (inclusive)");
    cov->add_option("--step", cov_step, "range step");
    cov->add_option("--out", cov_out, "output CSV (stdout when omitted)");

    // --- verify ---
    auto* ver = app.add_subcommand("verify", "check infected files against their originals");
    std::string ver_in, ver_originals;
    ver->add_option("--in", ver_in, "directory of infected files")->required();
    ver->add_option("--originals", ver_originals, "directory of pristine originals")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (jobs != 1) {
        std::cerr << "note: --jobs is accepted for compatibility; running single-threaded\n";
    }

    try {
        if (sim->parsed()) {
            hivekr::SimulateOptions options;
            options.out_dir = sim_out;
            for (const auto& f : sim_files) options.classes.push_back(parse_files_arg(f));
            options.seed = sim_seed;
            options.keep_originals = !sim_no_originals;
            options.emit_truth = sim_emit_truth;
            if (sim_content == "random") {
                options.content = hivekr::ContentModel::random;
            } else if (sim_content == "signatured") {
                options.content = hivekr::ContentModel::signatured;
            } else {
                throw std::invalid_argument("unknown content model '" + sim_content + "'");
            }
            options.signature_extension = sim_ext;
            hivekr::run_simulate(options, std::cout);
            return 0;
        }
        if (rec->parsed()) {
            hivekr::RecoverOptions options;
            options.infected_dir = rec_in;
            options.originals_dir = rec_originals;
            options.output_key = rec_out;
            if (!rec_sigs.empty()) options.signatures = rec_sigs;
            options.use_builtin_signatures = rec_builtin_sigs;
            if (!rec_truth.empty()) options.truth = rec_truth;
            if (!rec_report.empty()) options.report_path = rec_report;
            if (!rec_eq_out.empty()) options.equations_out = rec_eq_out;
            if (!rec_eq_in.empty()) options.equations_in = rec_eq_in;
            if (rec_in.empty() && rec_eq_in.empty()) {
                throw std::invalid_argument("recover needs --in or --equations-in");
            }
            hivekr::recover_master_key(options, std::cout);
            return 0;
        }
        if (dec->parsed()) {
            hivekr::DecryptOptions options;
            options.input_dir = dec_in;
            options.output_dir = dec_out;
            options.key_path = dec_key;
            if (!dec_tag.empty()) options.expected_tag = parse_tag(dec_tag);
            if (!dec_report.empty()) options.report_path = dec_report;
            const hivekr::DecryptSummary summary = hivekr::run_decrypt(options, std::cout);
            return summary.failed == 0 ? 0 : 1;
        }
        if (exp->parsed()) {
            hivekr::ExperimentOptions options;
            options.config = exp_config;
            options.out_csv = exp_csv;
            options.work_dir = exp_work;
            options.keep_work = exp_keep;
            hivekr::run_experiment(options, std::cout);
            return 0;
        }
        if (cov->parsed()) {
            hivekr::CoverageOptions options;
            for (const auto& s : cov_sizes) options.sizes.push_back(hivekr::parse_size(s));
            if (!cov_from.empty() || !cov_to.empty() || !cov_step.empty()) {
                if (cov_from.empty() || cov_to.empty() || cov_step.empty()) {
                    throw std::invalid_argument("--from/--to/--step must be given together");
                }
                const uint64_t from = hivekr::parse_size(cov_from);
                const uint64_t to = hivekr::parse_size(cov_to);
                const uint64_t step = hivekr::parse_size(cov_step);
                if (step == 0) throw std::invalid_argument("--step must be positive");
                if (to < from) throw std::invalid_argument("--to is below --from");
                if ((to - from) / step + 1 > 50'000'000) {
                    throw std::invalid_argument("coverage range lists too many sizes");
                }
                for (uint64_t s = from; s <= to; s += step) {
                    options.sizes.push_back(s);
                    if (s > to - step) break;  // overflow guard
                }
            }
            if (!cov_out.empty()) options.out_csv = cov_out;
            return hivekr::run_coverage(options, std::cout);
        }
        if (ver->parsed()) {
            hivekr::VerifyOptions options;
            options.infected_dir = ver_in;
            options.originals_dir = ver_originals;
            const hivekr::VerifySummary summary = hivekr::run_verify(options, std::cout);
            return summary.mismatched == 0 ? 0 : 1;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
