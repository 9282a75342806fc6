#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fracif/corpus.hpp"
#include "fracif/util.hpp"

namespace fracif {

// Which reference count serves as the weighting denominator n.
//   AllRefs:    the document's total reference count.
//   WindowRefs: the number of the document's references with a cited year in
//               the given window (all such refs, or only master-matched ones
//               when matched_only is set).
struct NormalizationScope {
    enum class Kind { AllRefs, WindowRefs };

    Kind kind = Kind::AllRefs;
    std::optional<YearRange> window;
    bool matched_only = false;

    static NormalizationScope all_refs(bool matched_only = false) {
        return {Kind::AllRefs, std::nullopt, matched_only};
    }
    static NormalizationScope window_refs(YearRange w, bool matched_only = false) {
        if (!w.valid()) throw std::invalid_argument("NormalizationScope: empty window");
        return {Kind::WindowRefs, w, matched_only};
    }
};

// Fractional citation weights contributed by a single citing document:
// weight[j] = multiplicity(j) / denominator_n.
struct DocWeightVector {
    std::string source_doc;
    std::uint64_t denominator_n = 0;
    std::vector<std::pair<std::string, double>> weights;  // sorted by journal_id

    double total() const {
        double t = 0;
        for (const auto& [j, w] : weights) t += w;
        return t;
    }
};

struct CitationTally {
    struct Entry {
        std::uint64_t integer_count = 0;
        double fractional_count = 0.0;
        std::vector<double> per_doc_weights;  // in canonical (doc_id-sorted) order
    };

    std::map<std::string, Entry> by_journal;

    const Entry* find(std::string_view journal_id) const {
        auto it = by_journal.find(std::string(journal_id));
        return it == by_journal.end() ? nullptr : &it->second;
    }
    std::uint64_t integer_count(std::string_view j) const {
        const Entry* e = find(j);
        return e ? e->integer_count : 0;
    }
    double fractional_count(std::string_view j) const {
        const Entry* e = find(j);
        return e ? e->fractional_count : 0.0;
    }
    std::uint64_t integer_total() const {
        std::uint64_t t = 0;
        for (const auto& [j, e] : by_journal) t += e.integer_count;
        return t;
    }
    double fractional_total() const {
        KahanSum s;
        for (const auto& [j, e] : by_journal) s.add(e.fractional_count);
        return s.value();
    }
};

// References aggregated per (cited journal, cited year) with multiplicities.
// Refs without a year, refs that fail journal matching, and (when a window
// is given) refs outside it are dropped.
inline std::map<std::pair<std::string, int>, std::uint32_t> aggregate_doc_refs(
    const DocumentRecord& doc, const JournalMaster& master,
    const std::optional<YearRange>& cited_window = std::nullopt) {
    std::map<std::pair<std::string, int>, std::uint32_t> agg;
    for (const auto& ref : doc.refs) {
        if (!ref.cited_year) continue;
        if (cited_window && !cited_window->contains(*ref.cited_year)) continue;
        const JournalEntry* e = master.match(ref.cited_journal_abbrev);
        if (!e) continue;
        ++agg[{e->journal_id, *ref.cited_year}];
    }
    return agg;
}

namespace detail {

inline std::uint64_t weighting_denominator(const DocumentRecord& doc, const JournalMaster& master,
                                           const NormalizationScope& scope) {
    if (scope.kind == NormalizationScope::Kind::AllRefs) return doc.effective_total_refs();
    std::uint64_t n = 0;
    for (const auto& ref : doc.refs) {
        if (!ref.cited_year || !scope.window->contains(*ref.cited_year)) continue;
        if (scope.matched_only && !master.match(ref.cited_journal_abbrev)) continue;
        ++n;
    }
    return n;
}

}  // namespace detail

// Weight vector for one document. The cited_window filters which references
// count as citations (the numerator); the scope chooses the denominator.
// Documents with a zero denominator contribute nothing.
inline DocWeightVector doc_weight_vector(const DocumentRecord& doc, const JournalMaster& master,
                                         const NormalizationScope& scope,
                                         const std::optional<YearRange>& cited_window = std::nullopt) {
    DocWeightVector v;
    v.source_doc = doc.doc_id;
    v.denominator_n = detail::weighting_denominator(doc, master, scope);
    if (v.denominator_n == 0) return v;

    std::map<std::string, std::uint32_t> mult;
    for (const auto& [key, count] : aggregate_doc_refs(doc, master, cited_window))
        mult[key.first] += count;
    v.weights.reserve(mult.size());
    for (const auto& [journal, count] : mult)
        v.weights.emplace_back(journal,
                               static_cast<double>(count) / static_cast<double>(v.denominator_n));
    return v;
}

// Accumulates integer and fractional tallies over a corpus.
//
// Determinism contract: documents are processed in doc_id order, partitioned
// into fixed-size blocks whose partial sums merge in block order with
// compensated accumulators. The result is bit-identical across runs, worker
// counts, and input permutations.
inline CitationTally accumulate(std::span<const DocumentRecord> corpus, const JournalMaster& master,
                                const NormalizationScope& scope,
                                const std::optional<YearRange>& cited_window = std::nullopt,
                                bool keep_per_doc = false, unsigned n_workers = 1) {
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return corpus[a].doc_id < corpus[b].doc_id;
    });

    struct BlockEntry {
        std::uint64_t integer_count = 0;
        KahanSum fractional;
        std::vector<double> per_doc_weights;
    };
    using BlockTally = std::map<std::string, BlockEntry>;

    constexpr std::size_t kBlock = 1024;
    std::size_t n_blocks = (corpus.size() + kBlock - 1) / kBlock;
    std::vector<BlockTally> blocks(n_blocks);

    parallel_blocks(n_blocks, n_workers, [&](std::size_t b) {
        BlockTally& tally = blocks[b];
        std::size_t lo = b * kBlock, hi = std::min(corpus.size(), lo + kBlock);
        for (std::size_t i = lo; i < hi; ++i) {
            const DocumentRecord& doc = corpus[order[i]];
            std::uint64_t denom = detail::weighting_denominator(doc, master, scope);
            std::map<std::string, std::uint32_t> mult;
            for (const auto& [key, count] : aggregate_doc_refs(doc, master, cited_window))
                mult[key.first] += count;
            for (const auto& [journal, count] : mult) {
                BlockEntry& e = tally[journal];
                e.integer_count += count;
                if (denom > 0) {
                    double w = static_cast<double>(count) / static_cast<double>(denom);
                    e.fractional.add(w);
                    if (keep_per_doc) e.per_doc_weights.push_back(w);
                }
            }
        }
    });

    std::map<std::string, std::pair<std::uint64_t, KahanSum>> merged;
    std::map<std::string, std::vector<double>> weights;
    for (const auto& block : blocks) {
        for (const auto& [journal, e] : block) {
            auto& [count, frac] = merged[journal];
            count += e.integer_count;
            frac.merge(e.fractional);
            if (keep_per_doc) {
                auto& w = weights[journal];
                w.insert(w.end(), e.per_doc_weights.begin(), e.per_doc_weights.end());
            }
        }
    }

    CitationTally result;
    for (auto& [journal, acc] : merged) {
        CitationTally::Entry entry;
        entry.integer_count = acc.first;
        entry.fractional_count = acc.second.value();
        if (keep_per_doc) entry.per_doc_weights = std::move(weights[journal]);
        result.by_journal.emplace(journal, std::move(entry));
    }
    return result;
}

inline CitationTally accumulate(const Corpus& corpus, const JournalMaster& master,
                                const NormalizationScope& scope,
                                const std::optional<YearRange>& cited_window = std::nullopt,
                                bool keep_per_doc = false, unsigned n_workers = 1) {
    return accumulate(std::span<const DocumentRecord>(corpus), master, scope, cited_window,
                      keep_per_doc, n_workers);
}

// Per-journal samples of the per-citing-document fractional weights, the
// observations entering the post-hoc comparisons and significance networks.
// Journals absent from the tally come back with empty observation lists.
struct WeightSampleSet {
    std::vector<std::pair<std::string, std::vector<double>>> groups;  // sorted by journal_id
};

inline WeightSampleSet weight_samples(std::span<const DocumentRecord> corpus,
                                      const JournalMaster& master,
                                      const std::vector<std::string>& journals,
                                      const NormalizationScope& scope,
                                      const std::optional<YearRange>& cited_window = std::nullopt,
                                      unsigned n_workers = 1) {
    for (const auto& j : journals)
        if (!master.find(j)) throw std::invalid_argument("weight_samples: journal not in master: " + j);
    CitationTally tally = accumulate(corpus, master, scope, cited_window, /*keep_per_doc=*/true,
                                     n_workers);
    WeightSampleSet set;
    std::vector<std::string> sorted = journals;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (const auto& j : sorted) {
        const CitationTally::Entry* e = tally.find(j);
        set.groups.emplace_back(j, e ? e->per_doc_weights : std::vector<double>{});
    }
    return set;
}

// journal_id <TAB> integer_count <TAB> fractional_count (6 decimals)
inline std::string tally_tsv(const CitationTally& tally) {
    std::string out = "journal_id\tinteger_count\tfractional_count\n";
    for (const auto& [journal, e] : tally.by_journal)
        out += journal + '\t' + std::to_string(e.integer_count) + '\t' +
               format_fixed(e.fractional_count, 6) + '\n';
    return out;
}

}  // namespace fracif
