#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fracif/corpus.hpp"
#include "fracif/counting.hpp"
#include "fracif/stats.hpp"
#include "fracif/util.hpp"

namespace fracif {

// Journal network. Directed graphs carry reference-count weights (citation
// traffic); undirected graphs are significance networks with unit edges and
// no self-loops. Nodes are kept sorted by journal_id and exports use that
// order for 1-based vertex numbering.
struct JournalGraph {
    bool directed = false;
    std::vector<std::string> nodes;                       // sorted journal ids
    std::map<std::string, std::string> partition;         // optional node labels
    std::map<std::pair<std::size_t, std::size_t>, double> edges;

    std::size_t node_index(std::string_view id) const {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), id);
        if (it == nodes.end() || *it != id)
            throw std::invalid_argument("unknown node: " + std::string(id));
        return static_cast<std::size_t>(it - nodes.begin());
    }

    void add_edge(std::size_t a, std::size_t b, double w) {
        if (a >= nodes.size() || b >= nodes.size())
            throw std::invalid_argument("edge endpoint out of range");
        if (!directed) {
            if (a == b) throw std::invalid_argument("self-loop in undirected graph");
            if (a > b) std::swap(a, b);
        }
        edges[{a, b}] = w;
    }

    bool has_edge(std::size_t a, std::size_t b) const {
        if (!directed && a > b) std::swap(a, b);
        return edges.count({a, b}) > 0;
    }

    std::size_t degree(std::size_t v) const {
        std::size_t d = 0;
        for (const auto& [e, w] : edges)
            if (e.first == v || e.second == v) ++d;
        return d;
    }
};

// Directed citation graph among a journal subset: edge A -> B weighted by the
// number of matched references from documents published in A to B (within the
// cited window when given). No thresholds; self-loops kept.
inline JournalGraph citation_graph(std::span<const DocumentRecord> corpus,
                                   const std::vector<std::string>& journals,
                                   const JournalMaster& master,
                                   const std::optional<YearRange>& cited_window = std::nullopt) {
    if (journals.empty()) throw std::invalid_argument("citation_graph: empty journal subset");
    JournalGraph g;
    g.directed = true;
    g.nodes = journals;
    std::sort(g.nodes.begin(), g.nodes.end());
    g.nodes.erase(std::unique(g.nodes.begin(), g.nodes.end()), g.nodes.end());
    for (const auto& j : g.nodes)
        if (!master.find(j)) throw std::invalid_argument("citation_graph: journal not in master: " + j);

    std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> weights;
    for (const auto& doc : corpus) {
        const JournalEntry* source = master.match(doc.journal_abbrev);
        if (!source) continue;
        auto src_it = std::lower_bound(g.nodes.begin(), g.nodes.end(), source->journal_id);
        if (src_it == g.nodes.end() || *src_it != source->journal_id) continue;
        std::size_t src = static_cast<std::size_t>(src_it - g.nodes.begin());
        for (const auto& [key, count] : aggregate_doc_refs(doc, master, cited_window)) {
            auto dst_it = std::lower_bound(g.nodes.begin(), g.nodes.end(), key.first);
            if (dst_it == g.nodes.end() || *dst_it != key.first) continue;
            weights[{src, static_cast<std::size_t>(dst_it - g.nodes.begin())}] += count;
        }
    }
    for (const auto& [e, w] : weights) g.edges[e] = static_cast<double>(w);
    return g;
}

enum class PosthocTest { DunnettC, TukeyHSD };

// Significance network: an undirected edge joins two journals whose
// fractional-citation distributions are NOT significantly different at
// alpha. All k(k-1)/2 pairs are tested.
inline JournalGraph significance_graph(std::span<const GroupSample> samples, double alpha,
                                       PosthocTest test = PosthocTest::DunnettC) {
    validate_groups(samples, 2, 2);
    std::vector<GroupSample> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const GroupSample& a, const GroupSample& b) { return a.group_id < b.group_id; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i].group_id == sorted[i - 1].group_id)
            throw std::invalid_argument("significance_graph: duplicate group " + sorted[i].group_id);

    JournalGraph g;
    g.directed = false;
    for (const auto& s : sorted) g.nodes.push_back(s.group_id);

    auto table = test == PosthocTest::DunnettC ? dunnett_c(sorted, alpha) : tukey_hsd(sorted, alpha);
    for (const auto& c : table) {
        std::size_t i = g.node_index(c.group_i);
        std::size_t j = g.node_index(c.group_j);
        if (i < j && !c.significant) g.add_edge(i, j, 1.0);
    }
    return g;
}

// Density and average degree, all-degree convention: each tie counts at both
// endpoints (a tie is a reciprocal arc pair), so average_degree =
// 2 * density * (n - 1) within a scope. The plain undirected average degree
// is half of that.
struct DensityScope {
    std::string label;
    std::size_t n_nodes = 0;
    std::size_t n_edges = 0;
    std::optional<double> density;
    std::optional<double> average_degree;  // absent for the between scope
};

struct DensityReport {
    DensityScope complete;
    DensityScope within_a;
    DensityScope within_b;
    DensityScope between;
};

inline DensityReport density_report(const JournalGraph& graph,
                                    const std::map<std::string, std::string>& partition) {
    if (graph.directed) throw std::invalid_argument("density_report: undirected graphs only");
    std::set<std::string> labels;
    for (const auto& node : graph.nodes) {
        auto it = partition.find(node);
        if (it == partition.end())
            throw std::invalid_argument("density_report: node without partition label: " + node);
        labels.insert(it->second);
    }
    if (labels.size() != 2)
        throw std::invalid_argument("density_report: expected exactly 2 partition classes, got " +
                                    std::to_string(labels.size()));
    std::string label_a = *labels.begin();
    std::string label_b = *std::next(labels.begin());

    std::size_t n_a = 0, n_b = 0;
    std::vector<bool> in_a(graph.nodes.size());
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        in_a[i] = partition.at(graph.nodes[i]) == label_a;
        (in_a[i] ? n_a : n_b) += 1;
    }
    std::size_t e_a = 0, e_b = 0, e_cross = 0;
    for (const auto& [e, w] : graph.edges) {
        if (in_a[e.first] && in_a[e.second])
            ++e_a;
        else if (!in_a[e.first] && !in_a[e.second])
            ++e_b;
        else
            ++e_cross;
    }

    auto within = [](const std::string& label, std::size_t n, std::size_t edges) {
        DensityScope s;
        s.label = label;
        s.n_nodes = n;
        s.n_edges = edges;
        if (n >= 2) {
            double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
            s.density = static_cast<double>(edges) / pairs;
            s.average_degree = 2.0 * *s.density * static_cast<double>(n - 1);
        }
        return s;
    };

    DensityReport r;
    r.complete = within("complete", graph.nodes.size(), graph.edges.size());
    r.within_a = within(label_a, n_a, e_a);
    r.within_b = within(label_b, n_b, e_b);
    r.between.label = "between";
    r.between.n_nodes = n_a + n_b;
    r.between.n_edges = e_cross;
    if (n_a > 0 && n_b > 0)
        r.between.density =
            static_cast<double>(e_cross) / (static_cast<double>(n_a) * static_cast<double>(n_b));
    return r;
}

inline std::string density_report_csv(const DensityReport& r) {
    std::string out = "scope,n_nodes,n_edges,density,average_degree\n";
    auto row = [&](const DensityScope& s) {
        out += s.label + ',' + std::to_string(s.n_nodes) + ',' + std::to_string(s.n_edges) + ',';
        if (s.density) out += format_fixed(*s.density, 6);
        out += ',';
        if (s.average_degree) out += format_fixed(*s.average_degree, 6);
        out += '\n';
    };
    row(r.complete);
    row(r.within_a);
    row(r.within_b);
    row(r.between);
    return out;
}

// Standard Pajek .net: *Vertices with quoted labels, then *Arcs (directed)
// or *Edges (undirected), 1-based vertex numbers in sorted journal order.
inline std::string export_pajek(const JournalGraph& g) {
    std::string out = "*Vertices " + std::to_string(g.nodes.size()) + "\n";
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        out += std::to_string(i + 1) + " \"" + g.nodes[i] + "\"\n";
    out += g.directed ? "*Arcs\n" : "*Edges\n";
    for (const auto& [e, w] : g.edges)
        out += std::to_string(e.first + 1) + ' ' + std::to_string(e.second + 1) + ' ' +
               format_weight(w) + '\n';
    return out;
}

}  // namespace fracif
