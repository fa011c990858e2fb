#include "hivekr/harness.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "hivekr/extraction.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace hivekr {

uint64_t parse_size(std::string_view text) {
    std::string s(text);
    s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }),
            s.end());
    if (s.empty()) throw std::invalid_argument("empty size");
    uint64_t multiplier = 1;
    switch (std::toupper(static_cast<unsigned char>(s.back()))) {
        case 'K': multiplier = 1ull << 10; s.pop_back(); break;
        case 'M': multiplier = 1ull << 20; s.pop_back(); break;
        case 'G': multiplier = 1ull << 30; s.pop_back(); break;
        default: break;
    }
    if (s.empty()) throw std::invalid_argument("size has no digits: " + std::string(text));
    // stoull quietly wraps negative input; sizes are magnitudes, so demand a digit.
    if (!std::isdigit(static_cast<unsigned char>(s.front()))) {
        throw std::invalid_argument("bad size: " + std::string(text));
    }
    size_t used = 0;
    uint64_t value = 0;
    try {
        value = std::stoull(s, &used, 0);  // base 0: decimal or 0x-prefixed hex
    } catch (const std::exception&) {
        throw std::invalid_argument("bad size: " + std::string(text));
    }
    if (used != s.size()) throw std::invalid_argument("bad size: " + std::string(text));
    return value * multiplier;
}

SizeSpec parse_size_spec(std::string_view text) {
    // Accept both "±" (UTF-8) and "+-" as the jitter separator.
    size_t split = text.find("\xC2\xB1");
    size_t sep_len = 2;
    if (split == std::string_view::npos) {
        split = text.find("+-");
    }
    if (split == std::string_view::npos) {
        return {parse_size(text), 0};
    }
    SizeSpec spec;
    spec.mean = parse_size(text.substr(0, split));
    spec.jitter = parse_size(text.substr(split + sep_len));
    if (spec.jitter > spec.mean) {
        throw std::invalid_argument("jitter exceeds mean in size spec: " + std::string(text));
    }
    return spec;
}

namespace {

void copy_tree(const fs::path& from, const fs::path& to) {
    fs::create_directories(to);
    fs::copy(from, to, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
}

std::string describe_classes(const std::vector<SizeClass>& classes) {
    std::string out;
    for (const auto& c : classes) {
        if (!out.empty()) out += ';';
        out += std::to_string(c.count) + "x" + std::to_string(c.mean);
        if (c.jitter != 0) out += "+-" + std::to_string(c.jitter);
    }
    return out;
}

}  // namespace

SimulateResult run_simulate(const SimulateOptions& options, std::ostream& log) {
    if (options.classes.empty()) throw std::invalid_argument("simulate: no size classes given");
    SimulateResult result;
    result.infected_dir = options.out_dir / "infected";
    result.originals_dir = options.out_dir / "originals";
    fs::create_directories(options.out_dir);

    CorpusSpec spec;
    spec.classes = options.classes;
    spec.seed = options.seed;
    spec.content = options.content;
    spec.signature_extension = options.signature_extension;

    log << "generating corpus (seed " << options.seed << ")...\n";
    const fs::path gen_dir = options.keep_originals ? result.originals_dir : result.infected_dir;
    const auto paths = generate_corpus(spec, gen_dir);
    uint64_t total_bytes = 0;
    for (const auto& p : paths) total_bytes += fs::file_size(p);
    log << "  " << paths.size() << " files, " << total_bytes << " bytes\n";
    if (options.keep_originals) {
        copy_tree(result.originals_dir, result.infected_dir);
    }

    const MasterKey key = generate_master_key(options.seed);
    if (options.emit_truth) {
        result.truth_path = options.out_dir / "master_key.truth.bin";
        save_master_key(result.truth_path, key);
    }

    InfectionConfig config;
    config.target_root = result.infected_dir;
    config.key_output_dir = result.infected_dir;
    log << "infecting...\n";
    result.report = infect_corpus(config, key, options.seed);
    result.report_path = options.out_dir / "infection_report.json";
    save_report(result.report_path, result.report);
    log << "  " << result.report.files.size() << " files infected, "
        << result.report.failed_paths.size() << " failed\n";
    return result;
}

namespace {

struct Source {
    uint32_t id = 0;
    fs::path infected;
    fs::path original;  // empty when unpaired
    std::string original_name;
    FileToken token;
    const SignatureEntry* signature = nullptr;
};

// Extracted equations per source, cached in memory while the total stays
// small; larger runs re-extract from disk when the graph must be rebuilt.
class EquationStore {
  public:
    explicit EquationStore(uint64_t cache_cap) : cap_(cache_cap) {}

    const std::vector<Equation>& get(const Source& src) {
        auto it = cache_.find(src.id);
        if (it != cache_.end()) return it->second;
        scratch_ = extract(src);
        if (cached_total_ + scratch_.size() <= cap_) {
            cached_total_ += scratch_.size();
            return cache_.emplace(src.id, std::move(scratch_)).first->second;
        }
        return scratch_;
    }

  private:
    std::vector<Equation> extract(const Source& src) const {
        if (!src.original.empty()) {
            return extract_equations_pair_files(src.original, src.infected, src.token);
        }
        if (src.signature != nullptr) {
            return extract_equations_signature_file(src.infected, src.token, *src.signature);
        }
        return {};
    }

    uint64_t cap_;
    uint64_t cached_total_ = 0;
    std::map<uint32_t, std::vector<Equation>> cache_;
    std::vector<Equation> scratch_;
};

std::string tag_hex(const KeyTag& tag) {
    return to_hex(std::span<const uint8_t>(tag.data(), tag.size()));
}

}  // namespace

RecoverResult recover_master_key(const RecoverOptions& options, std::ostream& log) {
    RecoverResult result;

    std::optional<MasterKey> truth;
    if (options.truth) truth = load_master_key(*options.truth);

    std::optional<SignatureDb> sigdb;
    if (options.signatures) {
        sigdb = SignatureDb::load(*options.signatures);
    } else if (options.use_builtin_signatures) {
        sigdb = SignatureDb::builtin();
    }

    KeyGraph graph;
    std::vector<Source> sources;
    std::vector<Equation> validation_eqs;  // held out of the graph for chaining
    EquationStore store(/*cache_cap=*/1ull << 26);

    const bool have_pairs = !options.originals_dir.empty();

    if (options.equations_in) {
        log << "loading equations from " << options.equations_in->string() << "\n";
        const auto eqs = read_equations(*options.equations_in);
        for (const Equation& eq : eqs) graph.add_equation(eq);
        result.equations_added = eqs.size();
        result.contradictions_seen = graph.contradictions().size();
    } else {
        if (!fs::is_directory(options.infected_dir)) {
            throw std::runtime_error("infected dir is not a directory: " +
                                     options.infected_dir.string());
        }

        // Enumerate infected files and keep the dominant key tag.
        std::vector<std::pair<fs::path, DecodedName>> candidates;
        std::map<std::string, uint64_t> tag_counts;
        for (const auto& entry : fs::recursive_directory_iterator(options.infected_dir)) {
            if (!entry.is_regular_file()) continue;
            const std::string name = entry.path().filename().string();
            if (!name.ends_with(kInfectedSuffix) || name.ends_with(kKeyFileSuffix)) continue;
            auto decoded = try_decode_filename(name);
            if (!decoded) {
                log << "  skipping (malformed name): " << entry.path().string() << "\n";
                continue;
            }
            tag_counts[tag_hex(decoded->token.key_tag)]++;
            candidates.emplace_back(entry.path(), std::move(*decoded));
        }
        std::sort(candidates.begin(), candidates.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        if (candidates.empty()) {
            throw std::runtime_error("no infected files under " + options.infected_dir.string());
        }
        std::string dominant;
        uint64_t dominant_count = 0;
        for (const auto& [tag, count] : tag_counts) {
            if (count > dominant_count) {
                dominant = tag;
                dominant_count = count;
            }
        }
        if (tag_counts.size() > 1) {
            log << "  multiple key tags present; recovering " << dominant << " ("
                << dominant_count << " files)\n";
        }

        for (auto& [path, decoded] : candidates) {
            if (tag_hex(decoded.token.key_tag) != dominant) continue;
            Source src;
            src.id = static_cast<uint32_t>(sources.size());
            src.infected = path;
            src.original_name = decoded.original_name;
            src.token = decoded.token;
            if (have_pairs) {
                fs::path original = options.originals_dir /
                                    fs::relative(path.parent_path(), options.infected_dir) /
                                    decoded.original_name;
                if (fs::is_regular_file(original)) src.original = fs::path(original);
            }
            if (sigdb) {
                const auto dot = src.original_name.rfind('.');
                if (dot != std::string::npos) {
                    src.signature = sigdb->find(src.original_name.substr(dot + 1));
                }
            }
            sources.push_back(std::move(src));
        }
        result.sources_total = sources.size();

        // Verify pairings before trusting them.
        for (Source& src : sources) {
            if (src.original.empty()) continue;
            if (verify_pair_files(src.original, src.infected) != PairVerdict::Match) {
                log << "  pair mismatch, ignoring original: " << src.original.string() << "\n";
                src.original.clear();
                ++result.pairs_mismatched;
            }
        }

        // With pairs available, signature bytes are held out of the graph
        // as an independent validation set for chaining; without pairs they
        // are the only equation source.
        for (const Source& src : sources) {
            if (src.signature == nullptr) continue;
            if (!have_pairs || src.original.empty()) continue;
            try {
                const auto eqs =
                    extract_equations_signature_file(src.infected, src.token, *src.signature);
                validation_eqs.insert(validation_eqs.end(), eqs.begin(), eqs.end());
            } catch (const SignatureOutsideEncryptedRegion&) {
                // Small files only partially covered by spans: fine, skip.
            }
        }

        std::vector<const Source*> base_order;
        base_order.reserve(sources.size());
        for (const Source& src : sources) base_order.push_back(&src);

        auto build = [&](const std::unordered_set<uint32_t>& excluded,
                         std::vector<uint32_t>* bad_sources,
                         const std::vector<const Source*>& order) -> KeyGraph {
            KeyGraph g;
            for (const Source* src : order) {
                if (excluded.contains(src->id)) continue;
                if (src->original.empty() && !(src->signature != nullptr && !have_pairs)) continue;
                try {
                    for (const Equation& eq : store.get(*src)) g.add_equation(eq, src->id);
                } catch (const ConflictingDuplicate&) {
                    if (bad_sources != nullptr) bad_sources->push_back(src->id);
                } catch (const SignatureOutsideEncryptedRegion&) {
                    // skip: not an equation source for this file
                }
            }
            return g;
        };

        std::unordered_set<uint32_t> excluded;
        std::vector<uint32_t> inconsistent;
        log << "extracting equations...\n";
        graph = build(excluded, &inconsistent, base_order);
        for (uint32_t id : inconsistent) {
            log << "  internally inconsistent source excluded: "
                << sources[id].infected.string() << "\n";
            excluded.insert(id);
        }
        if (!inconsistent.empty()) graph = build(excluded, nullptr, base_order);

        // Contradictions mean some source disagrees with the others.
        // Find it by leave-one-out over the blamed sources.
        int rounds = 0;
        while (!graph.contradictions().empty() && rounds++ < 16) {
            result.contradictions_seen += graph.contradictions().size();
            std::map<uint32_t, uint64_t> blame;
            for (const auto& rec : graph.contradictions()) {
                if (rec.source_id != KeyGraph::kNoSource) blame[rec.source_id]++;
            }
            // Blame lands on whichever source closes an inconsistent cycle,
            // so a wrong source merged before its honest peers is never
            // named. Rebuild under a few seeded shuffles of the source
            // order and pool the blame: the wrong source gets named in the
            // orders where it arrives late.
            std::mt19937_64 order_rng(0x8d2f5c1a9e3b7706ull + rounds);
            for (int shuffle = 0; shuffle < 4; ++shuffle) {
                auto shuffled = base_order;
                for (size_t i = shuffled.size(); i > 1; --i) {
                    std::swap(shuffled[i - 1], shuffled[order_rng() % i]);
                }
                const KeyGraph probe = build(excluded, nullptr, shuffled);
                for (const auto& rec : probe.contradictions()) {
                    if (rec.source_id != KeyGraph::kNoSource) blame[rec.source_id]++;
                }
            }
            std::vector<std::pair<uint64_t, uint32_t>> suspects;
            for (const auto& [id, count] : blame) suspects.emplace_back(count, id);
            std::sort(suspects.rbegin(), suspects.rend());
            if (suspects.empty()) break;
            bool fixed = false;
            for (const auto& [count, id] : suspects) {
                auto trial_excluded = excluded;
                trial_excluded.insert(id);
                KeyGraph trial = build(trial_excluded, nullptr, base_order);
                if (trial.contradictions().empty()) {
                    log << "  excluding inconsistent source (" << count
                        << " contradictions): " << sources[id].infected.string() << "\n";
                    excluded.insert(id);
                    graph = std::move(trial);
                    fixed = true;
                    break;
                }
            }
            if (!fixed) {
                const auto [count, id] = suspects.front();
                log << "  excluding most-blamed source (" << count
                    << " contradictions): " << sources[id].infected.string() << "\n";
                excluded.insert(id);
                graph = build(excluded, nullptr, base_order);
            }
        }
        if (!graph.contradictions().empty()) {
            log << "  warning: contradictions persist after exclusion; "
                   "contradicting equations were dropped\n";
            result.contradictions_seen += graph.contradictions().size();
        }

        for (uint32_t id : excluded) {
            result.excluded_sources.push_back(sources[id].infected.generic_string());
        }
        std::sort(result.excluded_sources.begin(), result.excluded_sources.end());
        for (const Source& src : sources) {
            if (!src.original.empty() && !excluded.contains(src.id)) ++result.pairs_used;
            if (src.signature != nullptr && !have_pairs && !excluded.contains(src.id)) {
                ++result.signature_sources;
            }
        }
        result.equations_added =
            graph.merged_count() + graph.redundant_count() + graph.contradictions().size();

        if (options.equations_out) {
            log << "writing equations to " << options.equations_out->string() << "\n";
            std::vector<Equation> all;
            for (const Source& src : sources) {
                if (excluded.contains(src.id)) continue;
                if (src.original.empty() && !(src.signature != nullptr && !have_pairs)) continue;
                try {
                    const auto& eqs = store.get(src);
                    all.insert(all.end(), eqs.begin(), eqs.end());
                } catch (const std::exception&) {
                }
            }
            write_equations(*options.equations_out, all);
        }
    }

    result.stats = graph.component_stats();
    log << "components: " << result.stats.component_count << " (largest "
        << result.stats.largest_size << ", touched " << result.stats.touched_offsets << " of "
        << kMasterKeyBytes << ")\n";

    // Anchor the largest component, then chain the rest against whatever
    // absolute information is available.
    if (result.stats.component_count > 0) {
        const uint32_t largest_root = graph.component_roots(2).front();
        const uint8_t anchor_value = truth ? truth->bytes[largest_root] : 0;
        anchor(graph, result.key, largest_root, anchor_value, truth ? "truth" : "arbitrary");

        ChainValidator validator;
        if (truth) {
            const MasterKey& t = *truth;
            validator = [&t](const ResolvedKey& key, std::span<const uint32_t> trial) {
                for (uint32_t off : trial) {
                    if (key.value_at(off) != t.bytes[off]) return false;
                }
                return true;
            };
        } else if (!validation_eqs.empty()) {
            validator = [&validation_eqs](const ResolvedKey& key, std::span<const uint32_t>) {
                bool any = false;
                for (const Equation& eq : validation_eqs) {
                    if (!key.is_resolved(eq.a) || !key.is_resolved(eq.b)) continue;
                    any = true;
                    if (static_cast<uint8_t>(key.value_at(eq.a) ^ key.value_at(eq.b)) != eq.v) {
                        return false;
                    }
                }
                return any;
            };
        }
        if (validator) {
            result.chain = chain_components(graph, result.key, validator, 2);
            log << "chained " << result.chain.components_chained << " of "
                << (result.chain.components_chained + result.chain.components_ambiguous)
                << " remaining components (" << result.chain.total_trials << " trials)\n";
        }
    }

    result.rate = recovery_rate(result.key, truth ? &*truth : nullptr);
    log << "recovered " << result.rate.resolved << " / " << kMasterKeyBytes << " bytes ("
        << result.rate.rate * 100.0 << "%)";
    if (truth) log << ", " << result.rate.errors << " errors";
    log << "\n";

    if (!options.output_key.empty()) {
        if (options.output_key.has_parent_path()) {
            fs::create_directories(options.output_key.parent_path());
        }
        result.key.save(options.output_key);
        log << "wrote " << options.output_key.string() << " (+.map)\n";
    }

    if (options.report_path) {
        nlohmann::json j;
        j["infected_dir"] = options.infected_dir.generic_string();
        j["sources_total"] = result.sources_total;
        j["pairs_used"] = result.pairs_used;
        j["pairs_mismatched"] = result.pairs_mismatched;
        j["signature_sources"] = result.signature_sources;
        j["equations"] = result.equations_added;
        j["contradictions"] = result.contradictions_seen;
        j["excluded_sources"] = result.excluded_sources;
        j["components"] = {
            {"count", result.stats.component_count},
            {"singletons", result.stats.singleton_count},
            {"touched", result.stats.touched_offsets},
            {"largest", result.stats.largest_size},
            {"largest_fraction", result.stats.largest_fraction_of_touched},
        };
        j["chain"] = {
            {"trials", result.chain.total_trials},
            {"chained", result.chain.components_chained},
            {"ambiguous", result.chain.components_ambiguous},
        };
        j["recovery"] = {
            {"resolved", result.rate.resolved},
            {"rate", result.rate.rate},
        };
        if (truth) j["recovery"]["errors"] = result.rate.errors;
        j["output_key"] = options.output_key.generic_string();
        std::ofstream out(*options.report_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write report: " + options.report_path->string());
        out << j.dump(2) << '\n';
    }
    return result;
}

DecryptSummary run_decrypt(const DecryptOptions& options, std::ostream& log) {
    ResolvedKey key = [&]() -> ResolvedKey {
        const std::string name = options.key_path.filename().string();
        if (name.ends_with(kKeyFileSuffix)) {
            // Wrapped key blob dropped by the infection itself.
            std::ifstream in(options.key_path, std::ios::binary);
            if (!in) throw std::runtime_error("cannot open: " + options.key_path.string());
            std::vector<uint8_t> blob((std::istreambuf_iterator<char>(in)),
                                      std::istreambuf_iterator<char>());
            return resolved_from_master(unwrap_master_key(blob));
        }
        if (fs::exists(options.key_path.string() + ".map")) {
            return ResolvedKey::load(options.key_path);
        }
        return resolved_from_master(load_master_key(options.key_path));
    }();

    log << "decrypting " << options.input_dir.string() << " -> " << options.output_dir.string()
        << "\n";
    DecryptSummary summary =
        decrypt_tree(options.input_dir, options.output_dir, key, options.expected_tag);
    log << "  full " << summary.full << ", partial " << summary.partial << ", foreign "
        << summary.skipped_foreign << ", malformed " << summary.skipped_malformed << ", failed "
        << summary.failed << "\n";

    if (options.report_path) {
        nlohmann::json j;
        j["input_dir"] = options.input_dir.generic_string();
        j["output_dir"] = options.output_dir.generic_string();
        j["full"] = summary.full;
        j["partial"] = summary.partial;
        j["skipped_foreign"] = summary.skipped_foreign;
        j["skipped_malformed"] = summary.skipped_malformed;
        j["skipped_other"] = summary.skipped_other;
        j["failed"] = summary.failed;
        j["unresolved_bytes"] = summary.total_unresolved_bytes;
        j["files"] = nlohmann::json::array();
        for (const auto& f : summary.files) {
            j["files"].push_back({{"infected", f.infected_path},
                                  {"output", f.output_path},
                                  {"outcome", f.outcome == DecryptOutcome::Full ? "full" : "partial"},
                                  {"unresolved", f.unresolved_bytes}});
        }
        std::ofstream out(*options.report_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write report: " + options.report_path->string());
        out << j.dump(2) << '\n';
    }
    return summary;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open experiment config: " + path.string());
    ExperimentConfig config;
    std::string line;
    size_t lineno = 0;
    ExperimentRow* current = nullptr;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream words(line);
        std::string word;
        if (!(words >> word) || word.front() == '#') continue;
        const auto fail = [&](const std::string& why) {
            throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": " + why);
        };
        if (word == "seeds") {
            uint64_t s;
            while (words >> s) config.seeds.push_back(s);
            if (config.seeds.empty()) fail("seeds line lists no seeds");
        } else if (word == "content") {
            std::string model;
            if (!(words >> model)) fail("content line needs a model");
            if (model == "random") {
                config.content = ContentModel::random;
            } else if (model == "signatured") {
                config.content = ContentModel::signatured;
                if (words >> model) config.signature_extension = model;
            } else {
                fail("unknown content model '" + model + "'");
            }
        } else if (word == "experiment") {
            std::string name;
            if (!(words >> name)) fail("experiment line needs a name");
            config.rows.push_back({name, {}});
            current = &config.rows.back();
        } else if (word == "files") {
            if (current == nullptr) fail("'files' before any 'experiment'");
            uint64_t count;
            std::string spec_text;
            if (!(words >> count >> spec_text)) fail("expected 'files <count> <size-spec>'");
            const SizeSpec spec = parse_size_spec(spec_text);
            current->classes.push_back({spec.mean, spec.jitter, count});
        } else {
            fail("unknown directive '" + word + "'");
        }
    }
    if (config.rows.empty()) throw std::invalid_argument(path.string() + ": no experiments");
    if (config.seeds.empty()) config.seeds = {1};
    for (const auto& row : config.rows) {
        if (row.classes.empty()) {
            throw std::invalid_argument(path.string() + ": experiment '" + row.name +
                                        "' has no files lines");
        }
    }
    return config;
}

namespace {

// Byte-compare a decrypted tree against the pristine originals. Returns
// how many files match exactly.
uint64_t count_exact_restores(const fs::path& originals, const fs::path& decrypted) {
    uint64_t exact = 0;
    for (const auto& entry : fs::recursive_directory_iterator(originals)) {
        if (!entry.is_regular_file()) continue;
        const fs::path restored = decrypted / fs::relative(entry.path(), originals);
        if (!fs::is_regular_file(restored)) continue;
        if (fs::file_size(restored) != fs::file_size(entry.path())) continue;
        std::ifstream a(entry.path(), std::ios::binary);
        std::ifstream b(restored, std::ios::binary);
        if (!a || !b) continue;
        constexpr size_t kChunk = 1 << 20;
        std::vector<char> buf_a(kChunk), buf_b(kChunk);
        bool same = true;
        while (same) {
            a.read(buf_a.data(), kChunk);
            b.read(buf_b.data(), kChunk);
            if (a.gcount() != b.gcount()) {
                same = false;
                break;
            }
            if (a.gcount() == 0) break;
            same = std::equal(buf_a.begin(), buf_a.begin() + a.gcount(), buf_b.begin());
        }
        if (same) ++exact;
    }
    return exact;
}

}  // namespace

std::vector<ExperimentCell> run_experiment(const ExperimentOptions& options, std::ostream& log) {
    const ExperimentConfig config = load_experiment_config(options.config);
    std::vector<ExperimentCell> cells;

    for (const ExperimentRow& row : config.rows) {
        uint64_t file_count = 0;
        for (const auto& c : row.classes) file_count += c.count;
        const std::string size_class = describe_classes(row.classes);

        double rate_sum = 0.0, full_sum = 0.0, wall_sum = 0.0;
        uint64_t errors_sum = 0;
        for (uint64_t seed : config.seeds) {
            const auto started = std::chrono::steady_clock::now();
            const fs::path work = options.work_dir / row.name / ("seed_" + std::to_string(seed));
            fs::remove_all(work);
            fs::create_directories(work);

            log << "[" << row.name << " seed " << seed << "] simulate\n";
            SimulateOptions sim;
            sim.out_dir = work;
            sim.classes = row.classes;
            sim.seed = seed;
            sim.content = config.content;
            sim.signature_extension = config.signature_extension;
            const SimulateResult simulated = run_simulate(sim, log);

            log << "[" << row.name << " seed " << seed << "] recover\n";
            RecoverOptions rec;
            rec.infected_dir = simulated.infected_dir;
            rec.originals_dir = simulated.originals_dir;
            rec.output_key = work / "recovered.hmk";
            rec.truth = simulated.truth_path;
            const RecoverResult recovered = recover_master_key(rec, log);

            log << "[" << row.name << " seed " << seed << "] decrypt\n";
            const fs::path decrypted_dir = work / "decrypted";
            DecryptSummary summary = decrypt_tree(simulated.infected_dir, decrypted_dir,
                                                  recovered.key, recovered.key.anchors().empty()
                                                      ? std::optional<KeyTag>{}
                                                      : std::optional<KeyTag>{simulated.report.key_tag});
            const uint64_t exact = count_exact_restores(simulated.originals_dir, decrypted_dir);
            const double wall =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

            ExperimentCell cell;
            cell.experiment = row.name;
            cell.size_class = size_class;
            cell.file_count = file_count;
            cell.seed = std::to_string(seed);
            cell.recovery_rate = recovered.rate.rate;
            cell.full_decrypt_rate =
                summary.decrypted() == 0
                    ? 0.0
                    : static_cast<double>(exact) / static_cast<double>(summary.decrypted());
            cell.errors = recovered.rate.errors;
            cell.wall_seconds = wall;
            cells.push_back(cell);
            log << "[" << row.name << " seed " << seed << "] recovery "
                << cell.recovery_rate * 100.0 << "%, full decrypt "
                << cell.full_decrypt_rate * 100.0 << "%, " << wall << "s\n";

            rate_sum += cell.recovery_rate;
            full_sum += cell.full_decrypt_rate;
            wall_sum += wall;
            errors_sum += cell.errors;
            if (!options.keep_work) fs::remove_all(work);
        }

        ExperimentCell mean;
        mean.experiment = row.name;
        mean.size_class = size_class;
        mean.file_count = file_count;
        mean.seed = "mean";
        const double n = static_cast<double>(config.seeds.size());
        mean.recovery_rate = rate_sum / n;
        mean.full_decrypt_rate = full_sum / n;
        mean.errors = errors_sum;
        mean.wall_seconds = wall_sum / n;
        cells.push_back(mean);
        log << "[" << row.name << "] mean recovery " << mean.recovery_rate * 100.0
            << "%, mean full decrypt " << mean.full_decrypt_rate * 100.0 << "%\n";
    }

    if (!options.keep_work) fs::remove_all(options.work_dir);

    if (!options.out_csv.empty()) {
        write_experiment_csv(options.out_csv, cells);
        log << "wrote " << options.out_csv.string() << "\n";
    }
    return cells;
}

void write_experiment_csv(const fs::path& path, const std::vector<ExperimentCell>& cells) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write csv: " + path.string());
    out << "experiment,size_class,file_count,seed,recovery_rate,full_decrypt_rate,errors,"
           "wall_seconds\n";
    char line[512];
    for (const auto& c : cells) {
        std::snprintf(line, sizeof(line), "%s,%s,%llu,%s,%.6f,%.6f,%llu,%.3f\n",
                      c.experiment.c_str(), c.size_class.c_str(),
                      static_cast<unsigned long long>(c.file_count), c.seed.c_str(),
                      c.recovery_rate, c.full_decrypt_rate,
                      static_cast<unsigned long long>(c.errors), c.wall_seconds);
        out << line;
    }
}

int run_coverage(const CoverageOptions& options, std::ostream& out) {
    if (options.sizes.empty()) throw std::invalid_argument("coverage: no sizes given");
    std::ofstream file;
    std::ostream* sink = &out;
    if (options.out_csv) {
        file.open(*options.out_csv, std::ios::trunc);
        if (!file) throw std::runtime_error("cannot write csv: " + options.out_csv->string());
        sink = &file;
    }
    *sink << "file_size,ks1_bytes,ks2_bytes,ks1_fraction,ks2_fraction\n";
    char line[256];
    for (uint64_t size : options.sizes) {
        const EksCoverage cov = eks_coverage(size);
        std::snprintf(line, sizeof(line), "%llu,%u,%u,%.6f,%.6f\n",
                      static_cast<unsigned long long>(size), cov.ks1_bytes, cov.ks2_bytes,
                      static_cast<double>(cov.ks1_bytes) / kKeystream1Bytes,
                      static_cast<double>(cov.ks2_bytes) / kKeystream2Bytes);
        *sink << line;
    }
    return 0;
}

VerifySummary run_verify(const VerifyOptions& options, std::ostream& log) {
    if (!fs::is_directory(options.infected_dir)) {
        throw std::runtime_error("infected dir is not a directory: " +
                                 options.infected_dir.string());
    }
    VerifySummary summary;
    std::vector<fs::path> infected;
    for (const auto& entry : fs::recursive_directory_iterator(options.infected_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (!name.ends_with(kInfectedSuffix) || name.ends_with(kKeyFileSuffix)) continue;
        infected.push_back(entry.path());
    }
    std::sort(infected.begin(), infected.end());
    for (const fs::path& path : infected) {
        const auto decoded = try_decode_filename(path.filename().string());
        if (!decoded) {
            ++summary.unpaired;
            log << "MALFORMED " << path.string() << "\n";
            continue;
        }
        const fs::path original = options.originals_dir /
                                  fs::relative(path.parent_path(), options.infected_dir) /
                                  decoded->original_name;
        if (!fs::is_regular_file(original)) {
            ++summary.unpaired;
            log << "UNPAIRED  " << path.string() << "\n";
            continue;
        }
        if (verify_pair_files(original, path) == PairVerdict::Match) {
            ++summary.matched;
            log << "MATCH     " << path.string() << "\n";
        } else {
            ++summary.mismatched;
            log << "MISMATCH  " << path.string() << "\n";
        }
    }
    log << summary.matched << " matched, " << summary.mismatched << " mismatched, "
        << summary.unpaired << " unpaired\n";
    return summary;
}

}  // namespace hivekr
