#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fracif/corpus.hpp"
#include "fracif/rng.hpp"
#include "fracif/util.hpp"

namespace fracif {

// Seeded synthetic corpus generator. All sampling is CDF inversion on the
// splitmix64-counter stream (see rng.hpp), one independent sub-stream per
// (journal, year) block, so output is byte-identical for a given spec across
// runs, platforms, and worker counts.

enum class ReflistFamily { negative_binomial, fixed };

struct ReflistSpec {
    double mean = 10.0;
    double dispersion = 5.0;  // negative-binomial size; unused for fixed
    ReflistFamily family = ReflistFamily::negative_binomial;
};

struct FieldSpec {
    std::string field_id;
    int n_journals = 0;
    int papers_per_journal_per_year = 0;
    ReflistSpec reflist_length;
    double share_refs_to_window = 0.5;       // refs targeting the two preceding years
    double within_field_citation_share = 0.9;
};

struct SimSpec {
    std::vector<FieldSpec> fields;
    YearRange years{};
    std::uint64_t seed = 0;
    std::map<std::string, double> quality_profile;  // journal_id -> cited-side multiplier

    void validate() const {
        if (fields.empty()) throw std::invalid_argument("SimSpec: need at least one field");
        if (!years.valid()) throw std::invalid_argument("SimSpec: invalid year range");
        int total_journals = 0;
        for (const auto& f : fields) {
            if (f.field_id.empty()) throw std::invalid_argument("SimSpec: empty field_id");
            if (f.n_journals < 1 || f.papers_per_journal_per_year < 1)
                throw std::invalid_argument("SimSpec: field " + f.field_id +
                                            " needs journals and papers");
            if (f.reflist_length.mean <= 0.0)
                throw std::invalid_argument("SimSpec: reflist mean must be positive");
            if (f.reflist_length.family == ReflistFamily::negative_binomial &&
                f.reflist_length.dispersion <= 0.0)
                throw std::invalid_argument("SimSpec: reflist dispersion must be positive");
            if (f.share_refs_to_window < 0.0 || f.share_refs_to_window > 1.0 ||
                f.within_field_citation_share < 0.0 || f.within_field_citation_share > 1.0)
                throw std::invalid_argument("SimSpec: shares must lie in [0,1]");
            total_journals += f.n_journals;
        }
        if (total_journals == 0) throw std::invalid_argument("SimSpec: no journals to cite");
        for (const auto& f : fields)
            if (f.within_field_citation_share < 1.0 && total_journals == f.n_journals)
                throw std::invalid_argument("SimSpec: field " + f.field_id +
                                            " routes citations across fields but none exist");
        for (const auto& [j, q] : quality_profile)
            if (!(q > 0.0)) throw std::invalid_argument("SimSpec: quality multipliers must be > 0");
    }
};

struct SimOutput {
    Corpus corpus;
    JournalMaster master;
};

namespace detail {

inline std::string sim_journal_id(const std::string& field_id, int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", index + 1);
    return field_id + "." + buf;
}

}  // namespace detail

inline SimOutput generate(const SimSpec& spec, unsigned n_workers = 1) {
    spec.validate();

    struct Journal {
        std::string id;
        std::size_t field_index;
        double quality;
    };
    std::vector<Journal> journals;
    for (std::size_t f = 0; f < spec.fields.size(); ++f)
        for (int j = 0; j < spec.fields[f].n_journals; ++j) {
            std::string id = detail::sim_journal_id(spec.fields[f].field_id, j);
            auto q = spec.quality_profile.find(id);
            journals.push_back({id, f, q == spec.quality_profile.end() ? 1.0 : q->second});
        }
    for (const auto& [id, q] : spec.quality_profile) {
        bool known = false;
        for (const auto& j : journals) known |= j.id == id;
        if (!known) throw std::invalid_argument("SimSpec: quality profile names unknown journal " + id);
    }

    // cumulative cited-side weights per field: own pool and cross pool
    struct Pools {
        std::vector<std::size_t> own, cross;
        std::vector<double> own_cum, cross_cum;
    };
    std::vector<Pools> pools(spec.fields.size());
    for (std::size_t f = 0; f < spec.fields.size(); ++f) {
        for (std::size_t g = 0; g < journals.size(); ++g) {
            auto& p = pools[f];
            if (journals[g].field_index == f)
                p.own.push_back(g);
            else
                p.cross.push_back(g);
        }
        auto build_cum = [&](const std::vector<std::size_t>& idx, std::vector<double>& cum) {
            double total = 0.0;
            for (std::size_t g : idx) {
                total += journals[g].quality;
                cum.push_back(total);
            }
        };
        build_cum(pools[f].own, pools[f].own_cum);
        build_cum(pools[f].cross, pools[f].cross_cum);
    }

    // one block per (journal, year), generated independently
    struct Block {
        std::size_t journal_index;
        int year;
    };
    std::vector<Block> blocks;
    for (std::size_t g = 0; g < journals.size(); ++g)
        for (int y = spec.years.first; y <= spec.years.last; ++y) blocks.push_back({g, y});

    std::vector<std::vector<DocumentRecord>> block_docs(blocks.size());
    parallel_blocks(blocks.size(), n_workers, [&](std::size_t b) {
        const Block& blk = blocks[b];
        const Journal& journal = journals[blk.journal_index];
        const FieldSpec& field = spec.fields[journal.field_index];
        const Pools& pool = pools[journal.field_index];
        rng::CounterRng gen(rng::derive_stream(spec.seed, b));

        auto& docs = block_docs[b];
        docs.reserve(field.papers_per_journal_per_year);
        for (int d = 0; d < field.papers_per_journal_per_year; ++d) {
            DocumentRecord doc;
            doc.doc_id = journal.id + ":" + std::to_string(blk.year) + ":" + std::to_string(d);
            doc.journal_abbrev = journal.id;
            doc.pub_year = blk.year;
            doc.doc_type = DocType::article;
            std::uint32_t n_refs =
                field.reflist_length.family == ReflistFamily::fixed
                    ? static_cast<std::uint32_t>(std::llround(field.reflist_length.mean))
                    : rng::negative_binomial_inv(gen.next_double(), field.reflist_length.mean,
                                                 field.reflist_length.dispersion);
            doc.n_refs_total = n_refs;
            doc.refs.reserve(n_refs);
            for (std::uint32_t r = 0; r < n_refs; ++r) {
                int year;
                if (gen.next_double() < field.share_refs_to_window)
                    year = blk.year - 1 - static_cast<int>(rng::uniform_index(gen.next_double(), 2));
                else
                    year = blk.year - 3 - static_cast<int>(rng::uniform_index(gen.next_double(), 6));
                const bool within =
                    pool.cross.empty() || gen.next_double() < field.within_field_citation_share;
                const auto& idx = within ? pool.own : pool.cross;
                const auto& cum = within ? pool.own_cum : pool.cross_cum;
                std::size_t target = idx[rng::weighted_index(gen.next_double(), cum)];
                doc.refs.push_back({journals[target].id, year});
            }
            docs.push_back(std::move(doc));
        }
    });

    SimOutput out;
    for (auto& docs : block_docs)
        for (auto& d : docs) out.corpus.push_back(std::move(d));

    std::vector<JournalEntry> entries;
    entries.reserve(journals.size());
    for (const auto& j : journals) {
        JournalEntry e;
        e.journal_id = j.id;
        e.full_title = "Journal " + j.id;
        e.canonical_abbrev = j.id;
        e.field_id = spec.fields[j.field_index].field_id;
        for (int y = spec.years.first; y <= spec.years.last; ++y)
            e.citable_items[y] =
                static_cast<std::uint64_t>(spec.fields[j.field_index].papers_per_journal_per_year);
        entries.push_back(std::move(e));
    }
    out.master = JournalMaster::from_entries(std::move(entries));
    return out;
}

// ---------------------------------------------------------------------------
// SimSpec JSON config
// ---------------------------------------------------------------------------

inline SimSpec simspec_from_json(const nlohmann::json& j) {
    SimSpec spec;
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.years = {j.at("years").at("first").get<int>(), j.at("years").at("last").get<int>()};
    for (const auto& jf : j.at("fields")) {
        FieldSpec f;
        f.field_id = jf.at("field_id").get<std::string>();
        f.n_journals = jf.at("n_journals").get<int>();
        f.papers_per_journal_per_year = jf.at("papers_per_journal_per_year").get<int>();
        const auto& rl = jf.at("reflist_length");
        std::string family = rl.value("family", "negative_binomial");
        if (family == "negative_binomial")
            f.reflist_length.family = ReflistFamily::negative_binomial;
        else if (family == "fixed")
            f.reflist_length.family = ReflistFamily::fixed;
        else
            throw DataError("simspec: unknown reflist family '" + family + "'");
        f.reflist_length.mean = rl.at("mean").get<double>();
        f.reflist_length.dispersion = rl.value("dispersion", 5.0);
        f.share_refs_to_window = jf.value("share_refs_to_window", 0.5);
        f.within_field_citation_share = jf.value("within_field_citation_share", 0.9);
        spec.fields.push_back(std::move(f));
    }
    if (j.contains("quality_profile"))
        for (const auto& [id, q] : j.at("quality_profile").items())
            spec.quality_profile[id] = q.get<double>();
    spec.validate();
    return spec;
}

inline SimSpec parse_simspec(std::string_view text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw DataError("simspec: invalid json");
    try {
        return simspec_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("simspec: ") + e.what());
    }
}

}  // namespace fracif
