// fracif: fractionally counted journal impact indicators and the statistical
// machinery to compare them across fields.
//
// Exit codes: 0 ok, 64 usage, 65 invalid configuration, 66 missing input,
// 67 malformed input data, 70 computation failure.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "fracif/pipeline.hpp"

namespace {

using namespace fracif;
using namespace fracif::pipeline;

void print_error(int code, const char* kind, const std::string& message) {
    std::string msg = fracif::detail::json_escape(message);
    std::fprintf(stderr, "{\"error\":{\"code\":%d,\"kind\":\"%s\",\"message\":\"%s\"}}\n", code,
                 kind, msg.c_str());
}

struct Cli {
    CLI::App app{"fractionally counted journal impact indicators", "fracif"};

    // shared options state
    std::string corpus_path, master_path, indicators_path, spec_path, partition_path;
    std::string outdir = "out";
    std::string journal_list;
    int citing_year = 0;
    int window_years = 2;
    int window_first = 0, window_last = 0;
    std::string scope = "window";
    std::string cites = "window";
    std::string test_name = "dunnett-c";
    std::string kind = "significance";
    std::string fractional_norm = "window";
    bool matched_only = false;
    bool cp_citing_year_only = false;
    bool strict = false;
    double alpha = 0.05;
    int quad_nodes = 15;
    unsigned workers = 1;

    CLI::App* cmd_stats = nullptr;
    CLI::App* cmd_tally = nullptr;
    CLI::App* cmd_indicators = nullptr;
    CLI::App* cmd_correlate = nullptr;
    CLI::App* cmd_posthoc = nullptr;
    CLI::App* cmd_network = nullptr;
    CLI::App* cmd_models = nullptr;
    CLI::App* cmd_simulate = nullptr;

    Cli() {
        app.require_subcommand(1);
        app.set_config("--config");
        app.set_version_flag("--version", std::string("fracif ") + kVersion);

        auto add_common = [&](CLI::App* cmd, bool needs_corpus) {
            if (needs_corpus) {
                cmd->add_option("--corpus", corpus_path, "corpus file (one JSON document per line)")
                    ->required();
                cmd->add_option("--master", master_path, "journal master TSV")->required();
                cmd->add_flag("--strict", strict, "abort on the first rejected corpus line");
                cmd->add_option("--workers", workers, "worker threads (output is identical)");
            }
            cmd->add_option("--out", outdir, "output directory")->required();
        };

        cmd_stats = app.add_subcommand("stats", "processing statistics report");
        add_common(cmd_stats, true);
        cmd_stats->add_option("--citing-year", citing_year, "restrict citing documents to one year");
        cmd_stats->add_option("--window-first", window_first, "first cited year of the window");
        cmd_stats->add_option("--window-last", window_last, "last cited year of the window");
        cmd_stats->add_option("--window-years", window_years, "window length before citing year");

        cmd_tally = app.add_subcommand("tally", "integer and fractional citation tallies");
        add_common(cmd_tally, true);
        cmd_tally->add_option("--scope", scope, "weighting denominator: window|all")
            ->check(CLI::IsMember({"window", "all"}));
        cmd_tally->add_flag("--matched-only", matched_only,
                            "denominator counts only master-matched references");
        cmd_tally->add_option("--citing-year", citing_year, "restrict citing documents to one year");
        cmd_tally->add_option("--window-first", window_first, "first cited year");
        cmd_tally->add_option("--window-last", window_last, "last cited year");
        cmd_tally->add_option("--window-years", window_years, "window length before citing year");

        cmd_indicators = app.add_subcommand("indicators", "quasi-IF and c/p indicator table");
        add_common(cmd_indicators, true);
        cmd_indicators->add_option("--citing-year", citing_year, "citing year")->required();
        cmd_indicators->add_option("--window-years", window_years, "IF window length (default 2)");
        cmd_indicators->add_flag("--matched-only", matched_only,
                                 "denominator counts only master-matched references");
        cmd_indicators
            ->add_option("--fractional-norm", fractional_norm,
                         "normalize window citations by window|all references")
            ->check(CLI::IsMember({"window", "all"}));
        cmd_indicators->add_flag("--cp-citing-year-only", cp_citing_year_only,
                                 "c/p publications from the citing year only");

        cmd_correlate = app.add_subcommand("correlate", "correlation matrix over indicators");
        cmd_correlate->add_option("--indicators", indicators_path, "indicators.csv")->required();
        add_common(cmd_correlate, false);

        cmd_posthoc = app.add_subcommand("posthoc", "pairwise comparisons of citation weights");
        add_common(cmd_posthoc, true);
        cmd_posthoc->add_option("--journals", journal_list, "comma-separated journal ids")
            ->required();
        cmd_posthoc->add_option("--citing-year", citing_year, "citing year")->required();
        cmd_posthoc->add_option("--window-years", window_years, "window length (default 2)");
        cmd_posthoc->add_option("--cites", cites, "window numerators or total cites")
            ->check(CLI::IsMember({"window", "total"}));
        cmd_posthoc->add_flag("--matched-only", matched_only, "matched-only denominators");
        cmd_posthoc->add_option("--alpha", alpha, "significance level");
        cmd_posthoc->add_option("--test", test_name, "dunnett-c|tukey")
            ->check(CLI::IsMember({"dunnett-c", "tukey"}));

        cmd_network = app.add_subcommand("network", "citation graph or significance network");
        add_common(cmd_network, true);
        cmd_network->add_option("--partition", partition_path, "TSV journal_id<TAB>label")
            ->required();
        cmd_network->add_option("--kind", kind, "citation|significance")
            ->check(CLI::IsMember({"citation", "significance"}));
        cmd_network->add_option("--citing-year", citing_year, "citing year")->required();
        cmd_network->add_option("--window-years", window_years, "window length (default 2)");
        cmd_network->add_option("--cites", cites, "window numerators or total cites")
            ->check(CLI::IsMember({"window", "total"}));
        cmd_network->add_flag("--matched-only", matched_only, "matched-only denominators");
        cmd_network->add_option("--alpha", alpha, "significance level");
        cmd_network->add_option("--test", test_name, "dunnett-c|tukey")
            ->check(CLI::IsMember({"dunnett-c", "tukey"}));

        cmd_models = app.add_subcommand("models", "M1-M4 random-intercept model suite");
        cmd_models->add_option("--indicators", indicators_path, "indicators.csv")->required();
        add_common(cmd_models, false);
        cmd_models->add_option("--alpha", alpha, "significance level");
        cmd_models->add_option("--nodes", quad_nodes, "quadrature nodes (1 = Laplace)");

        cmd_simulate = app.add_subcommand("simulate", "generate a synthetic corpus");
        cmd_simulate->add_option("--spec", spec_path, "simulation spec (JSON)")->required();
        add_common(cmd_simulate, false);
        cmd_simulate->add_option("--workers", workers, "worker threads (output is identical)");
    }

    YearRange resolve_window() const {
        if (window_first != 0 || window_last != 0) {
            YearRange w{window_first, window_last};
            if (!w.valid()) throw std::invalid_argument("window-first must not exceed window-last");
            return w;
        }
        if (citing_year == 0)
            throw std::invalid_argument("need --window-first/--window-last or --citing-year");
        if (window_years < 1) throw std::invalid_argument("window-years must be >= 1");
        return {citing_year - window_years, citing_year - 1};
    }

    int dispatch() {
        if (cmd_stats->parsed()) {
            StatsArgs a{corpus_path, master_path, outdir,
                        citing_year ? std::optional<int>(citing_year) : std::nullopt,
                        resolve_window(), strict, workers};
            run_stats(a);
        } else if (cmd_tally->parsed()) {
            TallyArgs a;
            a.corpus_path = corpus_path;
            a.master_path = master_path;
            a.outdir = outdir;
            a.window_scope = scope == "window";
            a.matched_only = matched_only;
            a.strict = strict;
            a.workers = workers;
            if (citing_year) a.citing_year = citing_year;
            if (a.window_scope || window_first || window_last) {
                a.window = resolve_window();
                a.use_cited_window = true;
            } else {
                a.use_cited_window = false;  // all cited years: a total-cites tally
            }
            run_tally(a);
        } else if (cmd_indicators->parsed()) {
            IndicatorsArgs a;
            a.corpus_path = corpus_path;
            a.master_path = master_path;
            a.outdir = outdir;
            a.strict = strict;
            a.config.citing_year = citing_year;
            a.config.window_years = window_years;
            a.config.matched_only = matched_only;
            a.config.fractional_all_refs_norm = fractional_norm == "all";
            a.config.cp_publications_citing_year_only = cp_citing_year_only;
            a.config.n_workers = workers;
            run_indicators(a);
        } else if (cmd_correlate->parsed()) {
            run_correlate({indicators_path, outdir});
        } else if (cmd_posthoc->parsed()) {
            PosthocArgs a;
            a.corpus_path = corpus_path;
            a.master_path = master_path;
            a.outdir = outdir;
            a.journals = split(journal_list, ',');
            a.citing_year = citing_year;
            a.window_years = window_years;
            a.total_cites = cites == "total";
            a.matched_only = matched_only;
            a.alpha = alpha;
            a.test = test_name == "tukey" ? PosthocTest::TukeyHSD : PosthocTest::DunnettC;
            a.strict = strict;
            a.workers = workers;
            run_posthoc(a);
        } else if (cmd_network->parsed()) {
            NetworkArgs a;
            a.corpus_path = corpus_path;
            a.master_path = master_path;
            a.outdir = outdir;
            a.partition_path = partition_path;
            a.significance = kind == "significance";
            a.citing_year = citing_year;
            a.window_years = window_years;
            a.total_cites = cites == "total";
            a.matched_only = matched_only;
            a.alpha = alpha;
            a.test = test_name == "tukey" ? PosthocTest::TukeyHSD : PosthocTest::DunnettC;
            a.strict = strict;
            a.workers = workers;
            run_network(a);
        } else if (cmd_models->parsed()) {
            ModelsArgs a;
            a.indicators_path = indicators_path;
            a.outdir = outdir;
            a.options.alpha = alpha;
            a.options.n_quadrature = quad_nodes;
            run_models(a);
        } else if (cmd_simulate->parsed()) {
            run_simulate({spec_path, outdir, workers});
        }
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    Cli cli;
    try {
        cli.app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return cli.app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return cli.app.exit(e);
    } catch (const CLI::ParseError& e) {
        cli.app.exit(e);
        print_error(64, "usage", e.what());
        return 64;
    }

    try {
        std::fprintf(stderr, "fracif %s\n", fracif::pipeline::kVersion);
        return cli.dispatch();
    } catch (const fracif::pipeline::MissingInputError& e) {
        print_error(66, "missing_input", e.what());
        return 66;
    } catch (const std::invalid_argument& e) {
        print_error(65, "invalid_config", e.what());
        return 65;
    } catch (const fracif::DataError& e) {
        print_error(67, "data", e.what());
        return 67;
    } catch (const std::exception& e) {
        print_error(70, "internal", e.what());
        return 70;
    }
}
