#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fracif/util.hpp"

namespace fracif {

enum class DocType { article, review, letter, proceedings, other };

inline const char* to_string(DocType t) {
    switch (t) {
        case DocType::article: return "article";
        case DocType::review: return "review";
        case DocType::letter: return "letter";
        case DocType::proceedings: return "proceedings";
        case DocType::other: return "other";
    }
    return "other";
}

inline std::optional<DocType> doc_type_from_string(std::string_view s) {
    if (s == "article") return DocType::article;
    if (s == "review") return DocType::review;
    if (s == "letter") return DocType::letter;
    if (s == "proceedings") return DocType::proceedings;
    if (s == "other") return DocType::other;
    return std::nullopt;
}

// One cited reference; cited_year is absent exactly when the source gave no
// full publication year ("in press").
struct RawReference {
    std::string cited_journal_abbrev;
    std::optional<int> cited_year;

    bool operator==(const RawReference&) const = default;
};

// One citing paper. n_refs_total is the document-level total reference count
// carried by the source record; the refs list may be shorter (truncated
// records are legal input).
struct DocumentRecord {
    std::string doc_id;
    std::string journal_abbrev;
    int pub_year = 0;
    DocType doc_type = DocType::article;
    std::uint32_t n_refs_total = 0;
    std::vector<RawReference> refs;

    // Total used as the all-references weighting denominator. A record that
    // lists more refs than it declares is counted by its list length, which
    // keeps every per-document weight vector summing to at most one.
    std::uint64_t effective_total_refs() const {
        return std::max<std::uint64_t>(n_refs_total, refs.size());
    }

    bool operator==(const DocumentRecord&) const = default;
};

using Corpus = std::vector<DocumentRecord>;

struct JournalEntry {
    std::string journal_id;
    std::string full_title;
    std::string canonical_abbrev;
    std::vector<std::string> extra_aliases;
    std::map<int, std::uint64_t> citable_items;  // year -> count
    std::optional<std::string> field_id;
    std::optional<double> reference_if;

    std::uint64_t citable_in(int year) const {
        auto it = citable_items.find(year);
        return it == citable_items.end() ? 0 : it->second;
    }

    std::uint64_t citable_in(const YearRange& window) const {
        std::uint64_t total = 0;
        for (int y = window.first; y <= window.last; ++y) total += citable_in(y);
        return total;
    }

    std::uint64_t citable_all_years() const {
        std::uint64_t total = 0;
        for (const auto& [y, c] : citable_items) total += c;
        return total;
    }
};

// Immutable journal registry with an injective normalized-alias index.
// Safe to share read-only across threads after construction.
class JournalMaster {
public:
    JournalMaster() = default;

    static JournalMaster from_entries(std::vector<JournalEntry> entries) {
        JournalMaster m;
        m.entries_ = std::move(entries);
        std::sort(m.entries_.begin(), m.entries_.end(),
                  [](const JournalEntry& a, const JournalEntry& b) { return a.journal_id < b.journal_id; });
        for (std::size_t i = 0; i < m.entries_.size(); ++i) {
            const auto& e = m.entries_[i];
            if (e.journal_id.empty()) throw DataError("journal with empty journal_id");
            if (i > 0 && m.entries_[i - 1].journal_id == e.journal_id)
                throw DataError("duplicate journal_id: " + e.journal_id);
            if (e.canonical_abbrev.empty())
                throw DataError("journal " + e.journal_id + " has no canonical abbreviation");
            m.by_id_.emplace(e.journal_id, i);
        }
        for (std::size_t i = 0; i < m.entries_.size(); ++i) {
            const auto& e = m.entries_[i];
            m.index_alias(e.canonical_abbrev, i);
            for (const auto& alias : e.extra_aliases) m.index_alias(alias, i);
        }
        return m;
    }

    const std::vector<JournalEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    const JournalEntry* find(std::string_view journal_id) const {
        auto it = by_id_.find(std::string(journal_id));
        return it == by_id_.end() ? nullptr : &entries_[it->second];
    }

    // Unique journal whose normalized alias equals normalize(abbrev), if any.
    const JournalEntry* match(std::string_view abbrev) const {
        auto it = alias_index_.find(normalize_abbrev(abbrev));
        return it == alias_index_.end() ? nullptr : &entries_[it->second];
    }

private:
    void index_alias(const std::string& alias, std::size_t idx) {
        std::string key = normalize_abbrev(alias);
        if (key.empty())
            throw DataError("journal " + entries_[idx].journal_id + " has an empty alias");
        auto [it, inserted] = alias_index_.emplace(key, idx);
        if (!inserted && it->second != idx)
            throw DataError("ambiguous alias '" + key + "' shared by journals " +
                            entries_[it->second].journal_id + " and " + entries_[idx].journal_id);
    }

    std::vector<JournalEntry> entries_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::unordered_map<std::string, std::size_t> alias_index_;
};

inline std::optional<std::string> match_journal(std::string_view abbrev, const JournalMaster& master) {
    const JournalEntry* e = master.match(abbrev);
    if (!e) return std::nullopt;
    return e->journal_id;
}

// ---------------------------------------------------------------------------
// Corpus parsing: one JSON object per line with keys
//   doc_id, journal, year, type, n_refs, refs[{j, y}]   (y may be null)
// ---------------------------------------------------------------------------

struct ParseRejection {
    std::size_t line_number = 0;  // 1-based
    std::string reason;
};

struct ParseReport {
    std::vector<ParseRejection> rejections;

    std::string to_tsv() const {
        std::string out = "line_number\treason\n";
        for (const auto& r : rejections)
            out += std::to_string(r.line_number) + "\t" + r.reason + "\n";
        return out;
    }
};

struct ParseOptions {
    bool strict = false;       // abort on first rejection
    unsigned n_workers = 1;    // line-range sharding; output independent of this
    int min_year = 1800;
    int max_year = 2100;
};

namespace detail {

inline bool parse_corpus_line(std::string_view line, const ParseOptions& opt,
                              DocumentRecord& doc, std::string& reason) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
        reason = "invalid json";
        return false;
    }
    if (!j.is_object()) {
        reason = "not a json object";
        return false;
    }
    auto require = [&](const char* key) -> const nlohmann::json* {
        auto it = j.find(key);
        if (it == j.end()) {
            reason = std::string("missing field '") + key + "'";
            return nullptr;
        }
        return &*it;
    };

    const auto* id = require("doc_id");
    if (!id) return false;
    if (!id->is_string() || id->get_ref<const std::string&>().empty()) {
        reason = "doc_id must be a non-empty string";
        return false;
    }
    doc.doc_id = id->get<std::string>();

    const auto* journal = require("journal");
    if (!journal) return false;
    if (!journal->is_string()) {
        reason = "journal must be a string";
        return false;
    }
    doc.journal_abbrev = journal->get<std::string>();

    const auto* year = require("year");
    if (!year) return false;
    if (!year->is_number_integer()) {
        reason = "year must be an integer";
        return false;
    }
    doc.pub_year = year->get<int>();
    if (doc.pub_year < opt.min_year || doc.pub_year > opt.max_year) {
        reason = "year " + std::to_string(doc.pub_year) + " outside plausible range";
        return false;
    }

    const auto* type = require("type");
    if (!type) return false;
    if (!type->is_string()) {
        reason = "type must be a string";
        return false;
    }
    auto dt = doc_type_from_string(type->get_ref<const std::string&>());
    if (!dt) {
        reason = "unknown document type '" + type->get<std::string>() + "'";
        return false;
    }
    doc.doc_type = *dt;

    const auto* n_refs = require("n_refs");
    if (!n_refs) return false;
    if (!n_refs->is_number_integer() || n_refs->get<std::int64_t>() < 0) {
        reason = "n_refs must be a non-negative integer";
        return false;
    }
    doc.n_refs_total = static_cast<std::uint32_t>(n_refs->get<std::int64_t>());

    const auto* refs = require("refs");
    if (!refs) return false;
    if (!refs->is_array()) {
        reason = "refs must be an array";
        return false;
    }
    doc.refs.clear();
    doc.refs.reserve(refs->size());
    for (const auto& r : *refs) {
        if (!r.is_object()) {
            reason = "ref entries must be objects";
            return false;
        }
        auto jt = r.find("j");
        if (jt == r.end() || !jt->is_string() || jt->get_ref<const std::string&>().empty()) {
            reason = "ref field 'j' must be a non-empty string";
            return false;
        }
        auto yt = r.find("y");
        if (yt == r.end()) {
            reason = "ref field 'y' missing (use null for unknown year)";
            return false;
        }
        RawReference ref;
        ref.cited_journal_abbrev = jt->get<std::string>();
        if (yt->is_null()) {
            ref.cited_year = std::nullopt;
        } else if (yt->is_number_integer()) {
            int y = yt->get<int>();
            if (y < opt.min_year || y > opt.max_year) {
                reason = "cited year " + std::to_string(y) + " outside plausible range";
                return false;
            }
            ref.cited_year = y;
        } else {
            reason = "ref field 'y' must be an integer or null";
            return false;
        }
        doc.refs.push_back(std::move(ref));
    }
    return true;
}

inline std::string json_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out.push_back(c);
                }
        }
    }
    return out;
}

}  // namespace detail

// Parses line-delimited records. Valid lines yield records in input order;
// malformed lines go to the rejection report (or abort in strict mode).
// Duplicate doc_ids are a load error in either mode.
inline Corpus parse_corpus(std::string_view text, const ParseOptions& opt = {},
                           ParseReport* report = nullptr) {
    struct Line {
        std::size_t number;
        std::string_view text;
    };
    std::vector<Line> lines;
    std::size_t line_no = 0, pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = (nl == std::string_view::npos)
                                    ? text.substr(pos)
                                    : text.substr(pos, nl - pos);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) lines.push_back({line_no, line});
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }

    std::vector<std::optional<DocumentRecord>> parsed(lines.size());
    std::vector<std::string> reasons(lines.size());

    const std::size_t block = 1024;
    std::size_t n_blocks = (lines.size() + block - 1) / block;
    parallel_blocks(n_blocks, opt.n_workers, [&](std::size_t b) {
        std::size_t lo = b * block, hi = std::min(lines.size(), lo + block);
        for (std::size_t i = lo; i < hi; ++i) {
            DocumentRecord doc;
            if (detail::parse_corpus_line(lines[i].text, opt, doc, reasons[i]))
                parsed[i] = std::move(doc);
        }
    });

    Corpus corpus;
    corpus.reserve(lines.size());
    std::unordered_map<std::string, std::size_t> seen_ids;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (!parsed[i]) {
            if (opt.strict)
                throw DataError("corpus line " + std::to_string(lines[i].number) + ": " + reasons[i]);
            if (report) report->rejections.push_back({lines[i].number, reasons[i]});
            continue;
        }
        auto [it, inserted] = seen_ids.emplace(parsed[i]->doc_id, lines[i].number);
        if (!inserted)
            throw DataError("duplicate doc_id '" + parsed[i]->doc_id + "' on lines " +
                            std::to_string(it->second) + " and " + std::to_string(lines[i].number));
        corpus.push_back(std::move(*parsed[i]));
    }
    return corpus;
}

inline std::string serialize_document(const DocumentRecord& d) {
    std::string out = "{\"doc_id\":\"" + detail::json_escape(d.doc_id) +
                      "\",\"journal\":\"" + detail::json_escape(d.journal_abbrev) +
                      "\",\"year\":" + std::to_string(d.pub_year) +
                      ",\"type\":\"" + to_string(d.doc_type) +
                      "\",\"n_refs\":" + std::to_string(d.n_refs_total) + ",\"refs\":[";
    for (std::size_t i = 0; i < d.refs.size(); ++i) {
        if (i) out += ',';
        out += "{\"j\":\"" + detail::json_escape(d.refs[i].cited_journal_abbrev) + "\",\"y\":";
        out += d.refs[i].cited_year ? std::to_string(*d.refs[i].cited_year) : "null";
        out += '}';
    }
    out += "]}";
    return out;
}

inline std::string serialize_corpus(const Corpus& corpus) {
    std::string out;
    for (const auto& d : corpus) {
        out += serialize_document(d);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Journal master: tab-separated with header
//   journal_id  full_title  canonical_abbrev  aliases  field_id  reference_if  [year:count ...]
// aliases are pipe-separated; field_id and reference_if may be empty.
// ---------------------------------------------------------------------------

inline JournalMaster parse_journal_master(std::string_view text) {
    std::vector<JournalEntry> entries;
    std::size_t line_no = 0, pos = 0;
    bool saw_header = false;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = (nl == std::string_view::npos)
                                    ? text.substr(pos)
                                    : text.substr(pos, nl - pos);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) {
            auto cols = split(line, '\t');
            if (!saw_header) {
                if (cols.empty() || cols[0] != "journal_id")
                    throw DataError("journal master: missing header row");
                saw_header = true;
            } else {
                if (cols.size() < 6)
                    throw DataError("journal master line " + std::to_string(line_no) +
                                    ": expected at least 6 columns");
                JournalEntry e;
                e.journal_id = cols[0];
                e.full_title = cols[1];
                e.canonical_abbrev = cols[2];
                if (!cols[3].empty())
                    for (auto& a : split(cols[3], '|'))
                        if (!a.empty()) e.extra_aliases.push_back(a);
                if (!cols[4].empty()) e.field_id = cols[4];
                if (!cols[5].empty()) {
                    double v = 0.0;
                    if (!parse_number(cols[5], v) || v < 0.0)
                        throw DataError("journal master line " + std::to_string(line_no) +
                                        ": bad reference_if '" + cols[5] + "'");
                    e.reference_if = v;
                }
                for (std::size_t c = 6; c < cols.size(); ++c) {
                    if (cols[c].empty()) continue;
                    auto sep = cols[c].find(':');
                    int year = 0;
                    long long count = 0;
                    if (sep == std::string::npos ||
                        !parse_number(std::string_view(cols[c]).substr(0, sep), year) ||
                        !parse_number(std::string_view(cols[c]).substr(sep + 1), count))
                        throw DataError("journal master line " + std::to_string(line_no) +
                                        ": bad citable column '" + cols[c] + "' (want year:count)");
                    if (count < 0)
                        throw DataError("journal master line " + std::to_string(line_no) +
                                        ": negative citable count for year " + std::to_string(year));
                    e.citable_items[year] = static_cast<std::uint64_t>(count);
                }
                entries.push_back(std::move(e));
            }
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    if (!saw_header) throw DataError("journal master: empty input");
    return JournalMaster::from_entries(std::move(entries));
}

inline std::string serialize_journal_master(const JournalMaster& master) {
    std::string out = "journal_id\tfull_title\tcanonical_abbrev\taliases\tfield_id\treference_if";
    out += '\n';
    for (const auto& e : master.entries()) {
        out += e.journal_id + '\t' + e.full_title + '\t' + e.canonical_abbrev + '\t';
        for (std::size_t i = 0; i < e.extra_aliases.size(); ++i) {
            if (i) out += '|';
            out += e.extra_aliases[i];
        }
        out += '\t';
        if (e.field_id) out += *e.field_id;
        out += '\t';
        if (e.reference_if) out += format_fixed(*e.reference_if, 6);
        for (const auto& [y, c] : e.citable_items)
            out += '\t' + std::to_string(y) + ':' + std::to_string(c);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Processing statistics (two-column report: all cited years vs cited window)
// ---------------------------------------------------------------------------

struct ProcessingStats {
    std::uint64_t n_documents = 0;
    std::uint64_t n_documents_with_refs = 0;
    std::uint64_t n_documents_with_window_refs = 0;  // >=1 ref with year in window
    std::uint64_t n_refs_total = 0;                  // reference records present
    std::uint64_t n_refs_with_year = 0;
    std::uint64_t n_refs_matched = 0;                // year present and journal matched
    std::uint64_t n_refs_with_year_in_window = 0;    // matched or not
    std::uint64_t n_refs_in_window = 0;              // matched and year in window
    // Matched references weighted by 1/n; the window column is normalized by
    // the window reference count, with the all-refs-normalized total kept
    // alongside (both appear in the source data's reporting conventions).
    double fractional_sum_all = 0.0;
    double fractional_sum_window = 0.0;
    double fractional_sum_window_all_norm = 0.0;
    double avg_refs_per_citing_doc_all = 0.0;     // n_refs_matched / fractional_sum_all
    double avg_refs_per_citing_doc_window = 0.0;  // n_refs_in_window / fractional_sum_window
};

inline ProcessingStats compute_processing_stats(std::span<const DocumentRecord> corpus,
                                                const JournalMaster& master,
                                                const YearRange& window) {
    if (!window.valid()) throw std::invalid_argument("compute_processing_stats: invalid window");
    ProcessingStats s;
    KahanSum frac_all, frac_window, frac_window_allnorm;
    for (const auto& doc : corpus) {
        ++s.n_documents;
        if (!doc.refs.empty()) ++s.n_documents_with_refs;
        std::uint64_t with_year = 0, matched = 0, in_window_any = 0, in_window_matched = 0;
        for (const auto& ref : doc.refs) {
            ++s.n_refs_total;
            if (!ref.cited_year) continue;
            ++with_year;
            bool in_window = window.contains(*ref.cited_year);
            if (in_window) ++in_window_any;
            if (master.match(ref.cited_journal_abbrev)) {
                ++matched;
                if (in_window) ++in_window_matched;
            }
        }
        s.n_refs_with_year += with_year;
        s.n_refs_matched += matched;
        s.n_refs_with_year_in_window += in_window_any;
        s.n_refs_in_window += in_window_matched;
        if (in_window_any > 0) ++s.n_documents_with_window_refs;

        std::uint64_t n_all = doc.effective_total_refs();
        if (n_all > 0 && matched > 0)
            frac_all.add(static_cast<double>(matched) / static_cast<double>(n_all));
        if (in_window_any > 0 && in_window_matched > 0)
            frac_window.add(static_cast<double>(in_window_matched) / static_cast<double>(in_window_any));
        if (n_all > 0 && in_window_matched > 0)
            frac_window_allnorm.add(static_cast<double>(in_window_matched) / static_cast<double>(n_all));
    }
    s.fractional_sum_all = frac_all.value();
    s.fractional_sum_window = frac_window.value();
    s.fractional_sum_window_all_norm = frac_window_allnorm.value();
    if (s.fractional_sum_all > 0)
        s.avg_refs_per_citing_doc_all = static_cast<double>(s.n_refs_matched) / s.fractional_sum_all;
    if (s.fractional_sum_window > 0)
        s.avg_refs_per_citing_doc_window =
            static_cast<double>(s.n_refs_in_window) / s.fractional_sum_window;
    return s;
}

inline std::string processing_stats_tsv(const ProcessingStats& s, const YearRange& window) {
    std::string out = "metric\tall_years\twindow_" + std::to_string(window.first) + "_" +
                      std::to_string(window.last) + "\n";
    auto row = [&](const char* name, const std::string& a, const std::string& b) {
        out += std::string(name) + '\t' + a + '\t' + b + '\n';
    };
    row("n_documents", std::to_string(s.n_documents), std::to_string(s.n_documents));
    row("n_documents_with_refs", std::to_string(s.n_documents_with_refs),
        std::to_string(s.n_documents_with_window_refs));
    row("n_refs", std::to_string(s.n_refs_total), std::to_string(s.n_refs_with_year_in_window));
    row("n_refs_with_year", std::to_string(s.n_refs_with_year),
        std::to_string(s.n_refs_with_year_in_window));
    row("n_refs_matched", std::to_string(s.n_refs_matched), std::to_string(s.n_refs_in_window));
    row("n_refs_fractionally_counted", format_fixed(s.fractional_sum_all, 6),
        format_fixed(s.fractional_sum_window, 6));
    row("n_refs_fractionally_counted_all_refs_norm", "",
        format_fixed(s.fractional_sum_window_all_norm, 6));
    row("avg_refs_per_citing_doc", format_fixed(s.avg_refs_per_citing_doc_all, 6),
        format_fixed(s.avg_refs_per_citing_doc_window, 6));
    return out;
}

}  // namespace fracif
