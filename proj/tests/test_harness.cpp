#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "hivekr/harness.hpp"
#include "hivekr/layout.hpp"

using namespace hivekr;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "hivekr_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("parse_size handles bytes and 1024-based suffixes") {
    CHECK(parse_size("0") == 0);
    CHECK(parse_size("123") == 123);
    CHECK(parse_size("21K") == 21 * 1024ull);
    CHECK(parse_size("21k") == 21 * 1024ull);
    CHECK(parse_size("1M") == 1024ull * 1024);
    CHECK(parse_size("5m") == 5ull * 1024 * 1024);
    CHECK(parse_size("2G") == 2ull * 1024 * 1024 * 1024);
    CHECK(parse_size("0x1000") == 0x1000);
    CHECK(parse_size(" 64K ") == 64 * 1024ull);

    CHECK_THROWS_AS(parse_size(""), std::invalid_argument);
    CHECK_THROWS_AS(parse_size("K"), std::invalid_argument);
    CHECK_THROWS_AS(parse_size("12Q"), std::invalid_argument);
    CHECK_THROWS_AS(parse_size("12KB"), std::invalid_argument);
    CHECK_THROWS_AS(parse_size("-5"), std::invalid_argument);
    CHECK_THROWS_AS(parse_size("1.5M"), std::invalid_argument);
}

TEST_CASE("parse_size_spec accepts plain sizes and jittered ones") {
    SizeSpec spec = parse_size_spec("1M");
    CHECK(spec.mean == 1024ull * 1024);
    CHECK(spec.jitter == 0);

    spec = parse_size_spec("1M\xC2\xB1"
                           "100K");  // UTF-8 "±"
    CHECK(spec.mean == 1024ull * 1024);
    CHECK(spec.jitter == 100 * 1024ull);

    spec = parse_size_spec("21K+-5K");
    CHECK(spec.mean == 21 * 1024ull);
    CHECK(spec.jitter == 5 * 1024ull);

    spec = parse_size_spec("4096+-512");
    CHECK(spec.mean == 4096);
    CHECK(spec.jitter == 512);

    CHECK_THROWS_AS(parse_size_spec("1K+-2K"), std::invalid_argument);  // jitter > mean
    CHECK_THROWS_AS(parse_size_spec("+-1K"), std::invalid_argument);
    CHECK_THROWS_AS(parse_size_spec("1K+-"), std::invalid_argument);
}

TEST_CASE("experiment config parser reads rows, seeds, content") {
    const fs::path dir = temp_dir("expt_config");
    {
        std::ofstream out(dir / "ok.cfg");
        out << "# comment line\n";
        out << "seeds 1 2 3\n";
        out << "content signatured pdf\n";
        out << "\n";
        out << "experiment small\n";
        out << "files 10 21K+-5K\n";
        out << "experiment mixed\n";
        out << "files 4 1K\n";
        out << "files 2 1M+-100K\n";
    }
    const ExperimentConfig cfg = load_experiment_config(dir / "ok.cfg");
    CHECK(cfg.seeds == std::vector<uint64_t>{1, 2, 3});
    CHECK(cfg.content == ContentModel::signatured);
    CHECK(cfg.signature_extension == "pdf");
    REQUIRE(cfg.rows.size() == 2);
    CHECK(cfg.rows[0].name == "small");
    REQUIRE(cfg.rows[0].classes.size() == 1);
    CHECK(cfg.rows[0].classes[0].count == 10);
    CHECK(cfg.rows[0].classes[0].mean == 21 * 1024ull);
    CHECK(cfg.rows[0].classes[0].jitter == 5 * 1024ull);
    CHECK(cfg.rows[1].name == "mixed");
    CHECK(cfg.rows[1].classes.size() == 2);

    {
        std::ofstream out(dir / "bad_directive.cfg");
        out << "experimnt typo\n";
    }
    CHECK_THROWS(load_experiment_config(dir / "bad_directive.cfg"));
    {
        std::ofstream out(dir / "files_outside.cfg");
        out << "files 3 1K\n";  // before any experiment block
    }
    CHECK_THROWS(load_experiment_config(dir / "files_outside.cfg"));
    {
        std::ofstream out(dir / "empty_row.cfg");
        out << "seeds 1\nexperiment hollow\n";
    }
    CHECK_THROWS(load_experiment_config(dir / "empty_row.cfg"));
    CHECK_THROWS(load_experiment_config(dir / "missing.cfg"));
}

TEST_CASE("simulate -> recover with truth -> decrypt round-trips") {
    const fs::path dir = temp_dir("pipeline");
    std::ostringstream log;

    SimulateOptions sim;
    sim.out_dir = dir / "sim";
    sim.classes = {{24 * 1024, 6 * 1024, 30}, {300 * 1024, 50 * 1024, 6}};
    sim.seed = 7;
    const SimulateResult simulated = run_simulate(sim, log);
    CHECK(fs::exists(simulated.truth_path));
    CHECK(fs::exists(simulated.report_path));
    CHECK(simulated.report.files.size() == 36);

    RecoverOptions rec;
    rec.infected_dir = simulated.infected_dir;
    rec.originals_dir = simulated.originals_dir;
    rec.output_key = dir / "recovered.hmk";
    rec.truth = simulated.truth_path;
    rec.report_path = dir / "recover.json";
    rec.equations_out = dir / "eqs.heqs";
    const RecoverResult recovered = recover_master_key(rec, log);

    CHECK(recovered.sources_total == 36);
    CHECK(recovered.pairs_used == 36);
    CHECK(recovered.pairs_mismatched == 0);
    CHECK(recovered.contradictions_seen == 0);
    CHECK(recovered.excluded_sources.empty());
    CHECK(recovered.rate.errors == 0);
    CHECK(recovered.rate.resolved > 0);
    CHECK(fs::exists(dir / "recovered.hmk"));
    CHECK(fs::exists(dir / "recovered.hmk.map"));
    CHECK(fs::exists(dir / "recover.json"));
    CHECK(fs::exists(dir / "eqs.heqs"));

    // Decrypt with the recovered (partial) key: with truth anchoring every
    // resolved byte is correct, so full-decrypted files match originals.
    DecryptOptions dec;
    dec.input_dir = simulated.infected_dir;
    dec.output_dir = dir / "restored";
    dec.key_path = dir / "recovered.hmk";
    dec.expected_tag = simulated.report.key_tag;
    const DecryptSummary summary = run_decrypt(dec, log);
    CHECK(summary.decrypted() == 36);
    CHECK(summary.failed == 0);

    uint64_t exact = 0;
    for (const auto& f : summary.files) {
        if (f.outcome != DecryptOutcome::Full) continue;
        std::ifstream a(f.output_path, std::ios::binary);
        const fs::path rel = fs::relative(f.output_path, dec.output_dir);
        std::ifstream b(simulated.originals_dir / rel, std::ios::binary);
        const std::vector<uint8_t> da((std::istreambuf_iterator<char>(a)),
                                      std::istreambuf_iterator<char>());
        const std::vector<uint8_t> db((std::istreambuf_iterator<char>(b)),
                                      std::istreambuf_iterator<char>());
        CHECK(da == db);
        ++exact;
    }
    CHECK(exact == summary.full);
    CHECK(exact > 0);
}

TEST_CASE("recover can dump equations and re-solve from the dump") {
    const fs::path dir = temp_dir("eqs_roundtrip");
    std::ostringstream log;

    SimulateOptions sim;
    sim.out_dir = dir / "sim";
    sim.classes = {{16 * 1024, 2 * 1024, 8}};
    sim.seed = 8;
    const SimulateResult simulated = run_simulate(sim, log);

    RecoverOptions rec;
    rec.infected_dir = simulated.infected_dir;
    rec.originals_dir = simulated.originals_dir;
    rec.output_key = dir / "a.hmk";
    rec.truth = simulated.truth_path;
    rec.equations_out = dir / "dump.heqs";
    const RecoverResult first = recover_master_key(rec, log);

    RecoverOptions from_dump;
    from_dump.equations_in = dir / "dump.heqs";
    from_dump.output_key = dir / "b.hmk";
    from_dump.truth = simulated.truth_path;
    const RecoverResult second = recover_master_key(from_dump, log);

    CHECK(second.rate.resolved == first.rate.resolved);
    CHECK(second.rate.errors == 0);
    CHECK(ResolvedKey::load(dir / "a.hmk").values() ==
          ResolvedKey::load(dir / "b.hmk").values());
}

TEST_CASE("recover excludes a wrong original that passes the gap check") {
    const fs::path dir = temp_dir("wrong_original");
    std::ostringstream log;

    // Exclusion by majority needs the victim's keystream window to overlap
    // several honest sources, so use enough fully-encrypted ~100K files to
    // land a handful of overlaps (seed 55 gives the victim four).
    SimulateOptions sim;
    sim.out_dir = dir / "sim";
    sim.classes = {{100 * 1024, 2 * 1024, 150}};
    sim.seed = 55;
    const SimulateResult simulated = run_simulate(sim, log);

    // Swap one original for a different same-size file whose gap bytes are
    // copied from the infected twin: the pairing gate accepts it, but every
    // encrypted byte it claims is wrong.
    std::vector<fs::path> originals;
    for (const auto& entry : fs::directory_iterator(simulated.originals_dir)) {
        if (entry.is_regular_file()) originals.push_back(entry.path());
    }
    std::sort(originals.begin(), originals.end());
    const fs::path victim = originals.at(5);

    fs::path victim_infected;
    for (const auto& rec_file : simulated.report.files) {
        const std::string name = fs::path(rec_file.path).filename().string();
        if (decode_filename(name).original_name == victim.filename().string()) {
            victim_infected = simulated.infected_dir / rec_file.path;
        }
    }
    REQUIRE(!victim_infected.empty());
    {
        const uint64_t size = fs::file_size(victim_infected);
        std::vector<char> infected_bytes(size);
        std::ifstream in(victim_infected, std::ios::binary);
        in.read(infected_bytes.data(), static_cast<std::streamsize>(size));
        REQUIRE(in.good());

        std::mt19937_64 rng(56);
        std::vector<char> fake(size);
        for (char& c : fake) c = static_cast<char>(rng());
        uint64_t pos = 0;
        for (const Span& s : encrypted_spans(size).spans) {
            std::copy(infected_bytes.begin() + static_cast<ptrdiff_t>(pos),
                      infected_bytes.begin() + static_cast<ptrdiff_t>(s.offset),
                      fake.begin() + static_cast<ptrdiff_t>(pos));
            pos = s.offset + s.length;
        }
        std::copy(infected_bytes.begin() + static_cast<ptrdiff_t>(pos), infected_bytes.end(),
                  fake.begin() + static_cast<ptrdiff_t>(pos));
        std::ofstream out(victim, std::ios::binary | std::ios::trunc);
        out.write(fake.data(), static_cast<std::streamsize>(fake.size()));
        REQUIRE(out.good());
    }

    RecoverOptions rec;
    rec.infected_dir = simulated.infected_dir;
    rec.originals_dir = simulated.originals_dir;
    rec.output_key = dir / "recovered.hmk";
    rec.truth = simulated.truth_path;
    const RecoverResult recovered = recover_master_key(rec, log);

    CHECK(recovered.contradictions_seen > 0);
    REQUIRE(recovered.excluded_sources.size() == 1);
    CHECK(recovered.excluded_sources[0].find(victim_infected.filename().string()) !=
          std::string::npos);
    CHECK(recovered.rate.errors == 0);
}

TEST_CASE("run_verify counts matches, mismatches, unpaired files") {
    const fs::path dir = temp_dir("verify");
    std::ostringstream log;

    SimulateOptions sim;
    sim.out_dir = dir / "sim";
    // Fixed 128K size: NBS is 0x2E00, so [0x1000, 0x3E00) is a guaranteed gap.
    sim.classes = {{128 * 1024, 0, 5}};
    sim.seed = 9;
    const SimulateResult simulated = run_simulate(sim, log);

    VerifyOptions opts;
    opts.originals_dir = simulated.originals_dir;
    opts.infected_dir = simulated.infected_dir;
    VerifySummary summary = run_verify(opts, log);
    CHECK(summary.matched == 5);
    CHECK(summary.mismatched == 0);
    CHECK(summary.unpaired == 0);

    // Corrupt one gap byte of one infected file and delete one original.
    const auto& rec0 = simulated.report.files[0];
    {
        std::fstream f(simulated.infected_dir / rec0.path,
                       std::ios::binary | std::ios::in | std::ios::out);
        REQUIRE(f.good());
        char c;
        f.seekg(0x1800);  // inside the NBS gap for these sizes
        f.get(c);
        c = static_cast<char>(c ^ 0x55);
        f.seekp(0x1800);
        f.put(c);
    }
    const std::string victim_name =
        decode_filename(fs::path(simulated.report.files[1].path).filename().string())
            .original_name;
    fs::remove(simulated.originals_dir / victim_name);

    summary = run_verify(opts, log);
    CHECK(summary.matched == 3);
    CHECK(summary.mismatched == 1);
    CHECK(summary.unpaired == 1);
}

TEST_CASE("coverage csv lists the keystream footprint per size") {
    std::ostringstream out;
    CoverageOptions opts;
    opts.sizes = {0x1000, 0x667926};
    const int rc = run_coverage(opts, out);
    CHECK(rc == 0);
    const std::string text = out.str();
    CHECK(text.find("file_size,ks1_bytes,ks2_bytes,ks1_fraction,ks2_fraction") !=
          std::string::npos);
    CHECK(text.find("\n4096,4096,1024,") != std::string::npos);
    CHECK(text.find("6715686,") != std::string::npos);
}

TEST_CASE("experiment csv format is stable") {
    const fs::path dir = temp_dir("expt_csv");
    std::vector<ExperimentCell> cells;
    cells.push_back({"t", "1M+-100K", 200, "1", 0.9447, 0.98, 0, 12.5});
    cells.push_back({"t", "1M+-100K", 200, "mean", 0.9447, 0.98, 0, 12.5});
    write_experiment_csv(dir / "out.csv", cells);
    std::ifstream in(dir / "out.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "experiment,size_class,file_count,seed,recovery_rate,full_decrypt_rate,"
                  "errors,wall_seconds");
    std::getline(in, line);
    CHECK(line.substr(0, 2) == "t,");
    CHECK(line.find(",200,1,0.9447") != std::string::npos);
}

TEST_CASE("tiny experiment end to end") {
    const fs::path dir = temp_dir("expt_tiny");
    std::ostringstream log;
    {
        std::ofstream out(dir / "tiny.cfg");
        out << "seeds 3 4\n";
        out << "experiment tiny\n";
        out << "files 12 24K+-4K\n";
    }
    ExperimentOptions opts;
    opts.config = dir / "tiny.cfg";
    opts.out_csv = dir / "results.csv";
    opts.work_dir = dir / "work";
    const auto cells = run_experiment(opts, log);
    // Two seed rows plus the mean row.
    REQUIRE(cells.size() == 3);
    CHECK(cells[0].seed == "3");
    CHECK(cells[1].seed == "4");
    CHECK(cells[2].seed == "mean");
    for (const auto& cell : cells) {
        CHECK(cell.errors == 0);
        CHECK(cell.recovery_rate > 0.0);
        CHECK(cell.recovery_rate <= 1.0);
        CHECK(cell.full_decrypt_rate >= 0.0);
        CHECK(cell.full_decrypt_rate <= 1.0);
    }
    CHECK(cells[2].recovery_rate ==
          doctest::Approx((cells[0].recovery_rate + cells[1].recovery_rate) / 2));
    CHECK(fs::exists(dir / "results.csv"));
    CHECK(!fs::exists(dir / "work"));  // scratch space cleaned up
}
