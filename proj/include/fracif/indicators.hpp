#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fracif/counting.hpp"
#include "fracif/corpus.hpp"
#include "fracif/util.hpp"

namespace fracif {

// Per-journal indicator bundle (reference IF is externally supplied).
struct IndicatorRow {
    std::string journal_id;
    std::optional<double> reference_if;
    double quasi_if_integer = 0.0;
    double quasi_if_fractional = 0.0;
    std::optional<double> cp_fractional;
    std::uint64_t denominator_citable = 0;
    std::optional<std::string> field_id;
};

struct ExclusionRecord {
    std::string journal_id;
    std::string reason;
};

struct IndicatorTable {
    std::vector<IndicatorRow> rows;            // sorted by journal_id
    std::vector<ExclusionRecord> exclusions;   // every master journal not in rows
    YearRange window{};
    int citing_year = 0;
};

// numerator / (citable_y1 + citable_y2); a zero denominator excludes the
// journal and is signaled, never silently zeroed.
inline double quasi_if(double numerator, std::uint64_t citable_y1, std::uint64_t citable_y2) {
    if (numerator < 0.0) throw std::invalid_argument("quasi_if: negative numerator");
    std::uint64_t denom = citable_y1 + citable_y2;
    if (denom == 0) throw std::invalid_argument("quasi_if: zero citable-item denominator");
    return numerator / static_cast<double>(denom);
}

inline double cp_ratio(double total_fractional_cites, std::uint64_t publications) {
    if (total_fractional_cites < 0.0) throw std::invalid_argument("cp_ratio: negative cites");
    if (publications == 0) throw std::invalid_argument("cp_ratio: zero publications");
    return total_fractional_cites / static_cast<double>(publications);
}

struct IndicatorConfig {
    int citing_year = 0;
    int window_years = 2;             // window = [citing_year - window_years, citing_year - 1]
    bool matched_only = false;        // denominator counts only master-matched refs
    bool fractional_all_refs_norm = false;  // normalize window citations by the
                                            // total reference count instead of the
                                            // window reference count
    bool cp_publications_citing_year_only = false;
    unsigned n_workers = 1;

    YearRange window() const {
        return {citing_year - window_years, citing_year - 1};
    }
};

// One row per journal passing the filters (positive numerator, positive
// citable counts in every window year); everything else lands in the
// exclusion report exactly once.
inline IndicatorTable build_indicator_table(std::span<const DocumentRecord> corpus,
                                            const JournalMaster& master,
                                            const IndicatorConfig& config) {
    if (config.window_years < 1)
        throw std::invalid_argument("build_indicator_table: window length must be >= 1");
    const YearRange window = config.window();

    std::vector<DocumentRecord const*> citing;
    for (const auto& doc : corpus)
        if (doc.pub_year == config.citing_year) citing.push_back(&doc);
    std::vector<DocumentRecord> citing_docs;
    citing_docs.reserve(citing.size());
    for (const auto* d : citing) citing_docs.push_back(*d);

    NormalizationScope window_scope =
        config.fractional_all_refs_norm
            ? NormalizationScope::all_refs(config.matched_only)
            : NormalizationScope::window_refs(window, config.matched_only);
    CitationTally window_tally =
        accumulate(std::span<const DocumentRecord>(citing_docs), master, window_scope, window,
                   /*keep_per_doc=*/false, config.n_workers);
    CitationTally total_tally =
        accumulate(std::span<const DocumentRecord>(citing_docs), master,
                   NormalizationScope::all_refs(config.matched_only), std::nullopt,
                   /*keep_per_doc=*/false, config.n_workers);

    IndicatorTable table;
    table.window = window;
    table.citing_year = config.citing_year;
    for (const auto& entry : master.entries()) {
        std::string missing_years;
        for (int y = window.first; y <= window.last; ++y) {
            if (entry.citable_in(y) == 0) {
                if (!missing_years.empty()) missing_years += ",";
                missing_years += std::to_string(y);
            }
        }
        if (!missing_years.empty()) {
            table.exclusions.push_back({entry.journal_id, "no_citable_items:" + missing_years});
            continue;
        }
        std::uint64_t integer_num = window_tally.integer_count(entry.journal_id);
        if (integer_num == 0) {
            table.exclusions.push_back({entry.journal_id, "zero_numerator"});
            continue;
        }
        IndicatorRow row;
        row.journal_id = entry.journal_id;
        row.reference_if = entry.reference_if;
        row.field_id = entry.field_id;
        row.denominator_citable = entry.citable_in(window);
        std::uint64_t citable_first = entry.citable_in(window.first);
        std::uint64_t citable_rest = row.denominator_citable - citable_first;
        row.quasi_if_integer =
            quasi_if(static_cast<double>(integer_num), citable_first, citable_rest);
        row.quasi_if_fractional =
            quasi_if(window_tally.fractional_count(entry.journal_id), citable_first, citable_rest);
        std::uint64_t publications = config.cp_publications_citing_year_only
                                         ? entry.citable_in(config.citing_year)
                                         : entry.citable_all_years();
        if (publications > 0)
            row.cp_fractional = cp_ratio(total_tally.fractional_count(entry.journal_id), publications);
        table.rows.push_back(std::move(row));
    }
    return table;
}

// journal_id,reference_if,quasi_if_integer,quasi_if_fractional,cp_fractional,denominator_citable,field_id
inline std::string indicator_csv(const IndicatorTable& table) {
    std::string out =
        "journal_id,reference_if,quasi_if_integer,quasi_if_fractional,cp_fractional,"
        "denominator_citable,field_id\n";
    for (const auto& r : table.rows) {
        out += r.journal_id + ',';
        if (r.reference_if) out += format_fixed(*r.reference_if, 6);
        out += ',' + format_fixed(r.quasi_if_integer, 6) + ',' +
               format_fixed(r.quasi_if_fractional, 6) + ',';
        if (r.cp_fractional) out += format_fixed(*r.cp_fractional, 6);
        out += ',' + std::to_string(r.denominator_citable) + ',';
        if (r.field_id) out += *r.field_id;
        out += '\n';
    }
    return out;
}

inline std::string exclusion_tsv(const IndicatorTable& table) {
    std::string out = "journal_id\treason\n";
    for (const auto& e : table.exclusions) out += e.journal_id + '\t' + e.reason + '\n';
    return out;
}

// Reads back the CSV produced by indicator_csv (used by the correlation and
// model stages, which operate on indicator files).
inline IndicatorTable parse_indicator_csv(std::string_view text) {
    IndicatorTable table;
    std::size_t pos = 0, line_no = 0;
    bool saw_header = false;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line =
            (nl == std::string_view::npos) ? text.substr(pos) : text.substr(pos, nl - pos);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) {
            auto cols = split(line, ',');
            if (!saw_header) {
                if (cols.empty() || cols[0] != "journal_id")
                    throw DataError("indicator csv: missing header");
                saw_header = true;
            } else {
                if (cols.size() != 7)
                    throw DataError("indicator csv line " + std::to_string(line_no) +
                                    ": expected 7 columns");
                IndicatorRow r;
                r.journal_id = cols[0];
                double value = 0.0;
                bool ok = parse_number(cols[2], r.quasi_if_integer) &&
                          parse_number(cols[3], r.quasi_if_fractional) &&
                          parse_number(cols[5], r.denominator_citable);
                if (ok && !cols[1].empty()) {
                    ok = parse_number(cols[1], value);
                    r.reference_if = value;
                }
                if (ok && !cols[4].empty()) {
                    ok = parse_number(cols[4], value);
                    r.cp_fractional = value;
                }
                if (!ok)
                    throw DataError("indicator csv line " + std::to_string(line_no) +
                                    ": bad numeric field");
                if (!cols[6].empty()) r.field_id = cols[6];
                table.rows.push_back(std::move(r));
            }
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    if (!saw_header) throw DataError("indicator csv: empty input");
    return table;
}

}  // namespace fracif
