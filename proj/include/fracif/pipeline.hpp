#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fracif/corpus.hpp"
#include "fracif/counting.hpp"
#include "fracif/glmm.hpp"
#include "fracif/indicators.hpp"
#include "fracif/netclass.hpp"
#include "fracif/simgen.hpp"
#include "fracif/stats.hpp"
#include "fracif/util.hpp"

// Batch pipeline stages behind the CLI subcommands. Each stage reads files,
// writes its documented outputs into an output directory, and appends one
// manifest line per output (content hash, parameters, input hashes).
namespace fracif::pipeline {

inline constexpr const char* kVersion = "0.1.0";

struct MissingInputError : DataError {
    using DataError::DataError;
};

inline std::string load_input(const std::string& path) {
    if (!std::filesystem::exists(path)) throw MissingInputError("input file not found: " + path);
    return read_file(path);
}

class OutputDir {
public:
    OutputDir(std::string dir, std::string command, std::string params,
              std::vector<std::pair<std::string, std::uint64_t>> input_hashes)
        : dir_(std::move(dir)),
          command_(std::move(command)),
          params_(std::move(params)),
          inputs_(std::move(input_hashes)) {
        std::filesystem::create_directories(dir_);
    }

    std::string path(const std::string& name) const { return (std::filesystem::path(dir_) / name).string(); }

    void write(const std::string& name, std::string_view content) {
        write_file(path(name), content);
        std::string inputs;
        for (const auto& [p, h] : inputs_) {
            if (!inputs.empty()) inputs += ';';
            inputs += p + "=" + to_hex(h);
        }
        manifest_ += name + '\t' + to_hex(fnv1a64(content)) + '\t' + command_ + '\t' + params_ +
                     '\t' + inputs + '\n';
    }

    // call last; the manifest describes every file written this run
    void finalize() {
        std::string header = "output\tcontent_hash\tcommand\tparameters\tinputs\n";
        write_file(path("manifest.tsv"), header + manifest_);
        std::fprintf(stderr, "fracif %s %s config=%s out=%s\n", kVersion, command_.c_str(),
                     to_hex(config_hash()).c_str(), dir_.c_str());
    }

    std::uint64_t config_hash() const { return fnv1a64(command_ + "|" + params_); }

private:
    std::string dir_;
    std::string command_;
    std::string params_;
    std::vector<std::pair<std::string, std::uint64_t>> inputs_;
    std::string manifest_;
};

struct LoadedInputs {
    Corpus corpus;
    JournalMaster master;
    std::vector<std::pair<std::string, std::uint64_t>> hashes;
    ParseReport report;
};

inline LoadedInputs load_corpus_and_master(const std::string& corpus_path,
                                           const std::string& master_path, bool strict,
                                           unsigned workers) {
    LoadedInputs in;
    std::string corpus_text = load_input(corpus_path);
    std::string master_text = load_input(master_path);
    in.hashes.emplace_back(corpus_path, fnv1a64(corpus_text));
    in.hashes.emplace_back(master_path, fnv1a64(master_text));
    ParseOptions opt;
    opt.strict = strict;
    opt.n_workers = workers;
    in.corpus = parse_corpus(corpus_text, opt, &in.report);
    in.master = parse_journal_master(master_text);
    return in;
}

inline std::vector<DocumentRecord> filter_citing_year(const Corpus& corpus, int year) {
    std::vector<DocumentRecord> out;
    for (const auto& d : corpus)
        if (d.pub_year == year) out.push_back(d);
    return out;
}

// ---------------------------------------------------------------------------
// stages
// ---------------------------------------------------------------------------

struct StatsArgs {
    std::string corpus_path, master_path, outdir;
    std::optional<int> citing_year;  // filter citing documents when given
    YearRange window{};
    bool strict = false;
    unsigned workers = 1;
};

inline void run_stats(const StatsArgs& a) {
    auto in = load_corpus_and_master(a.corpus_path, a.master_path, a.strict, a.workers);
    std::string params = "window=" + std::to_string(a.window.first) + ".." +
                         std::to_string(a.window.last) +
                         (a.citing_year ? ";citing_year=" + std::to_string(*a.citing_year) : "");
    OutputDir out(a.outdir, "stats", params, in.hashes);
    std::vector<DocumentRecord> filtered;
    std::span<const DocumentRecord> docs(in.corpus);
    if (a.citing_year) {
        filtered = filter_citing_year(in.corpus, *a.citing_year);
        docs = filtered;
    }
    auto stats = compute_processing_stats(docs, in.master, a.window);
    out.write("processing_stats.tsv", processing_stats_tsv(stats, a.window));
    out.write("rejections.tsv", in.report.to_tsv());
    out.finalize();
}

struct TallyArgs {
    std::string corpus_path, master_path, outdir;
    bool window_scope = true;  // false: all-refs normalization
    YearRange window{};        // cited window (numerator filter and window scope)
    bool use_cited_window = true;
    bool matched_only = false;
    std::optional<int> citing_year;
    bool strict = false;
    unsigned workers = 1;
};

inline void run_tally(const TallyArgs& a) {
    auto in = load_corpus_and_master(a.corpus_path, a.master_path, a.strict, a.workers);
    std::string params = std::string("scope=") + (a.window_scope ? "window" : "all") +
                         ";matched_only=" + (a.matched_only ? "1" : "0");
    if (a.use_cited_window)
        params += ";window=" + std::to_string(a.window.first) + ".." + std::to_string(a.window.last);
    if (a.citing_year) params += ";citing_year=" + std::to_string(*a.citing_year);
    OutputDir out(a.outdir, "tally", params, in.hashes);

    std::vector<DocumentRecord> filtered;
    std::span<const DocumentRecord> docs(in.corpus);
    if (a.citing_year) {
        filtered = filter_citing_year(in.corpus, *a.citing_year);
        docs = filtered;
    }
    NormalizationScope scope = a.window_scope
                                   ? NormalizationScope::window_refs(a.window, a.matched_only)
                                   : NormalizationScope::all_refs(a.matched_only);
    std::optional<YearRange> cited;
    if (a.use_cited_window) cited = a.window;
    auto tally = accumulate(docs, in.master, scope, cited, false, a.workers);
    out.write("tally.tsv", tally_tsv(tally));
    out.finalize();
}

struct IndicatorsArgs {
    std::string corpus_path, master_path, outdir;
    IndicatorConfig config;
    bool strict = false;
};

inline IndicatorTable run_indicators(const IndicatorsArgs& a) {
    auto in = load_corpus_and_master(a.corpus_path, a.master_path, a.strict, a.config.n_workers);
    std::string params = "citing_year=" + std::to_string(a.config.citing_year) +
                         ";window_years=" + std::to_string(a.config.window_years) +
                         ";matched_only=" + (a.config.matched_only ? "1" : "0") +
                         ";fractional_norm=" + (a.config.fractional_all_refs_norm ? "all" : "window") +
                         ";cp_citing_year_only=" + (a.config.cp_publications_citing_year_only ? "1" : "0");
    OutputDir out(a.outdir, "indicators", params, in.hashes);
    auto table = build_indicator_table(in.corpus, in.master, a.config);
    out.write("indicators.csv", indicator_csv(table));
    out.write("exclusions.tsv", exclusion_tsv(table));
    out.finalize();
    return table;
}

struct CorrelateArgs {
    std::string indicators_path, outdir;
};

inline void run_correlate(const CorrelateArgs& a) {
    std::string text = load_input(a.indicators_path);
    OutputDir out(a.outdir, "correlate", "", {{a.indicators_path, fnv1a64(text)}});
    auto table = parse_indicator_csv(text);

    struct Measure {
        std::string name;
        std::function<std::optional<double>(const IndicatorRow&)> get;
    };
    std::vector<Measure> measures = {
        {"reference_if", [](const IndicatorRow& r) { return r.reference_if; }},
        {"quasi_if_integer",
         [](const IndicatorRow& r) -> std::optional<double> { return r.quasi_if_integer; }},
        {"quasi_if_fractional",
         [](const IndicatorRow& r) -> std::optional<double> { return r.quasi_if_fractional; }},
        {"cp_fractional", [](const IndicatorRow& r) { return r.cp_fractional; }},
    };

    const std::size_t k = measures.size();
    std::vector<std::vector<std::optional<double>>> pearson_m(k, std::vector<std::optional<double>>(k));
    std::vector<std::vector<std::optional<double>>> spearman_m(k, std::vector<std::optional<double>>(k));
    std::vector<std::vector<std::size_t>> ns(k, std::vector<std::size_t>(k, 0));
    std::string long_csv = "measure_i,measure_j,pearson_r,spearman_rho,n\n";
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            std::vector<double> xs, ys;  // pairwise complete
            for (const auto& row : table.rows) {
                auto x = measures[i].get(row);
                auto y = measures[j].get(row);
                if (x && y) {
                    xs.push_back(*x);
                    ys.push_back(*y);
                }
            }
            ns[i][j] = ns[j][i] = xs.size();
            long_csv += measures[i].name + ',' + measures[j].name + ',';
            if (xs.size() >= 3) {
                try {
                    double r = pearson(xs, ys);
                    double rho = spearman(xs, ys);
                    pearson_m[i][j] = r;
                    spearman_m[i][j] = rho;
                    long_csv += format_fixed(r, 6) + ',' + format_fixed(rho, 6);
                } catch (const std::invalid_argument&) {
                    long_csv += ",";  // constant series
                }
            } else {
                long_csv += ",";
            }
            long_csv += ',' + std::to_string(xs.size()) + '\n';
        }
    }

    // Table-2 layout: Pearson below the diagonal, Spearman above
    std::string matrix = "measure";
    for (const auto& m : measures) matrix += ',' + m.name;
    matrix += '\n';
    for (std::size_t i = 0; i < k; ++i) {
        matrix += measures[i].name;
        for (std::size_t j = 0; j < k; ++j) {
            matrix += ',';
            if (i > j && pearson_m[j][i]) matrix += format_fixed(*pearson_m[j][i], 6);
            if (i < j && spearman_m[i][j]) matrix += format_fixed(*spearman_m[i][j], 6);
        }
        matrix += '\n';
    }
    out.write("correlations.csv", long_csv);
    out.write("correlations_matrix.csv", matrix);
    out.finalize();
}

struct PosthocArgs {
    std::string corpus_path, master_path, outdir;
    std::vector<std::string> journals;
    int citing_year = 0;
    int window_years = 2;
    bool total_cites = false;  // true: all cited years, all-refs normalization
    bool matched_only = false;
    double alpha = 0.05;
    PosthocTest test = PosthocTest::DunnettC;
    bool strict = false;
    unsigned workers = 1;
};

inline std::vector<GroupSample> posthoc_samples(const Corpus& corpus, const JournalMaster& master,
                                                const PosthocArgs& a) {
    auto citing = filter_citing_year(corpus, a.citing_year);
    YearRange window{a.citing_year - a.window_years, a.citing_year - 1};
    NormalizationScope scope = a.total_cites
                                   ? NormalizationScope::all_refs(a.matched_only)
                                   : NormalizationScope::window_refs(window, a.matched_only);
    std::optional<YearRange> cited;
    if (!a.total_cites) cited = window;
    auto set = weight_samples(citing, master, a.journals, scope, cited, a.workers);
    std::vector<GroupSample> samples;
    for (auto& [id, obs] : set.groups) samples.push_back({id, std::move(obs)});
    return samples;
}

inline void run_posthoc(const PosthocArgs& a) {
    auto in = load_corpus_and_master(a.corpus_path, a.master_path, a.strict, a.workers);
    std::string params = "citing_year=" + std::to_string(a.citing_year) +
                         ";window_years=" + std::to_string(a.window_years) +
                         ";cites=" + (a.total_cites ? "total" : "window") +
                         ";alpha=" + format_fixed(a.alpha, 4) +
                         ";test=" + (a.test == PosthocTest::DunnettC ? "dunnett-c" : "tukey");
    OutputDir out(a.outdir, "posthoc", params, in.hashes);
    auto samples = posthoc_samples(in.corpus, in.master, a);
    auto table = a.test == PosthocTest::DunnettC ? dunnett_c(samples, a.alpha)
                                                 : tukey_hsd(samples, a.alpha);
    out.write("posthoc.csv", pairwise_table_csv(table));
    out.finalize();
}

struct NetworkArgs {
    std::string corpus_path, master_path, outdir;
    std::string partition_path;  // TSV journal_id <TAB> label
    bool significance = true;    // false: raw citation graph
    int citing_year = 0;
    int window_years = 2;
    bool use_window = true;  // citation graph: restrict cited years to window
    bool total_cites = false;
    bool matched_only = false;
    double alpha = 0.05;
    PosthocTest test = PosthocTest::DunnettC;
    bool strict = false;
    unsigned workers = 1;
};

inline std::map<std::string, std::string> parse_partition(std::string_view text) {
    std::map<std::string, std::string> partition;
    std::size_t pos = 0, line_no = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line =
            (nl == std::string_view::npos) ? text.substr(pos) : text.substr(pos, nl - pos);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) {
            auto cols = split(line, '\t');
            if (cols.size() != 2 || cols[0].empty() || cols[1].empty())
                throw DataError("partition line " + std::to_string(line_no) +
                               ": want journal_id<TAB>label");
            if (!partition.emplace(cols[0], cols[1]).second)
                throw DataError("partition: duplicate journal " + cols[0]);
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    if (partition.empty()) throw DataError("partition: empty file");
    return partition;
}

inline void run_network(const NetworkArgs& a) {
    auto in = load_corpus_and_master(a.corpus_path, a.master_path, a.strict, a.workers);
    std::string partition_text = load_input(a.partition_path);
    auto hashes = in.hashes;
    hashes.emplace_back(a.partition_path, fnv1a64(partition_text));
    auto partition = parse_partition(partition_text);
    std::vector<std::string> journals;
    for (const auto& [j, label] : partition) journals.push_back(j);

    std::string params = std::string("kind=") + (a.significance ? "significance" : "citation") +
                         ";citing_year=" + std::to_string(a.citing_year) +
                         ";window_years=" + std::to_string(a.window_years) +
                         ";cites=" + (a.total_cites ? "total" : "window") +
                         ";alpha=" + format_fixed(a.alpha, 4);
    OutputDir out(a.outdir, "network", params, hashes);

    YearRange window{a.citing_year - a.window_years, a.citing_year - 1};
    if (a.significance) {
        PosthocArgs pa;
        pa.journals = journals;
        pa.citing_year = a.citing_year;
        pa.window_years = a.window_years;
        pa.total_cites = a.total_cites;
        pa.matched_only = a.matched_only;
        auto samples = posthoc_samples(in.corpus, in.master, pa);
        auto graph = significance_graph(samples, a.alpha, a.test);
        graph.partition = partition;
        out.write("significance.net", export_pajek(graph));
        std::set<std::string> labels;
        for (const auto& [j, l] : partition) labels.insert(l);
        if (labels.size() == 2) out.write("density.csv", density_report_csv(density_report(graph, partition)));
    } else {
        auto citing = filter_citing_year(in.corpus, a.citing_year);
        std::optional<YearRange> cited;
        if (a.use_window && !a.total_cites) cited = window;
        auto graph = citation_graph(citing, journals, in.master, cited);
        graph.partition = partition;
        out.write("citation.net", export_pajek(graph));
    }
    out.finalize();
}

struct ModelsArgs {
    std::string indicators_path, outdir;
    ModelSuiteOptions options;
};

inline ModelSuiteResult run_models(const ModelsArgs& a) {
    std::string text = load_input(a.indicators_path);
    std::string params = "nodes=" + std::to_string(a.options.n_quadrature) +
                         ";alpha=" + format_fixed(a.options.alpha, 4);
    OutputDir out(a.outdir, "models", params, {{a.indicators_path, fnv1a64(text)}});
    auto table = parse_indicator_csv(text);
    auto suite = run_model_suite(table, a.options);
    out.write("models.csv", model_report_csv(suite, a.options.wald_sandwich));
    std::string dropped = "journal_id\treason\n";
    for (const auto& j : suite.dropped_no_field) dropped += j + "\tno_field_assignment\n";
    out.write("models_dropped.tsv", dropped);
    std::string comparisons = "comparison,sigma2_base,sigma2_alt,reduction_percent\n";
    if (suite.m3_vs_m2)
        comparisons += "M3_vs_M2," + format_fixed(suite.m3_vs_m2->sigma2_base, 6) + ',' +
                       format_fixed(suite.m3_vs_m2->sigma2_alt, 6) + ',' +
                       format_fixed(suite.m3_vs_m2->reduction_percent, 6) + '\n';
    if (suite.m4_vs_m2)
        comparisons += "M4_vs_M2," + format_fixed(suite.m4_vs_m2->sigma2_base, 6) + ',' +
                       format_fixed(suite.m4_vs_m2->sigma2_alt, 6) + ',' +
                       format_fixed(suite.m4_vs_m2->reduction_percent, 6) + '\n';
    out.write("variance_comparisons.csv", comparisons);
    out.finalize();
    return suite;
}

struct SimulateArgs {
    std::string spec_path, outdir;
    unsigned workers = 1;
};

inline void run_simulate(const SimulateArgs& a) {
    std::string text = load_input(a.spec_path);
    OutputDir out(a.outdir, "simulate", "", {{a.spec_path, fnv1a64(text)}});
    auto spec = parse_simspec(text);
    auto sim = generate(spec, a.workers);
    out.write("corpus.jsonl", serialize_corpus(sim.corpus));
    out.write("master.tsv", serialize_journal_master(sim.master));
    out.finalize();
}

}  // namespace fracif::pipeline
