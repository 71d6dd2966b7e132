#include "cohhgn/graph.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace cohhgn {

const char* feature_type_name(FeatureType t) {
    switch (t) {
        case FeatureType::Id: return "id";
        case FeatureType::Price: return "pri";
        case FeatureType::Large: return "lrg";
        case FeatureType::Middle: return "mid";
    }
    return "?";
}

FeatureType feature_type_from_name(const std::string& name) {
    for (auto t : kAllFeatureTypes)
        if (name == feature_type_name(t)) return t;
    throw DomainError("unknown feature type '" + name + "'");
}

const std::vector<int>& session_feature(const PseudoSession& s, FeatureType t) {
    switch (t) {
        case FeatureType::Id: return s.items;
        case FeatureType::Price: return s.prices;
        case FeatureType::Large: return s.large_cats;
        case FeatureType::Middle: return s.middle_cats;
    }
    throw DomainError("bad feature type");
}

int node_count(const FeatureVocabulary& vocab, FeatureType t) {
    switch (t) {
        case FeatureType::Id: return vocab.items.size_with_unknown();
        case FeatureType::Price: return vocab.n_price_bins;
        case FeatureType::Large: return vocab.large_cats.size_with_unknown();
        case FeatureType::Middle: return vocab.middle_cats.size_with_unknown();
    }
    throw DomainError("bad feature type");
}

std::vector<int> HeteroHypergraph::hyper_neighbors(int node) const {
    if (node < 0 || node >= n_nodes)
        throw DomainError("hyper_neighbors: node " + std::to_string(node) + " out of range");
    std::set<int> nbrs;
    nbrs.insert(node);
    for (const auto& edge : incidence) {
        if (std::binary_search(edge.begin(), edge.end(), node))
            nbrs.insert(edge.begin(), edge.end());
    }
    return {nbrs.begin(), nbrs.end()};
}

HeteroHypergraph build_hypergraph(const std::vector<PseudoSession>& sessions,
                                  FeatureType node_type, FeatureType edge_type, int n_nodes,
                                  int n_edges) {
    if (node_type == edge_type)
        throw DomainError("build_hypergraph: node and edge types must differ");
    HeteroHypergraph g;
    g.node_type = node_type;
    g.edge_type = edge_type;
    g.n_nodes = n_nodes;
    g.n_edges = n_edges;
    std::vector<std::set<int>> sets(n_edges);
    for (const auto& s : sessions) {
        const auto& nodes = session_feature(s, node_type);
        const auto& edges = session_feature(s, edge_type);
        for (std::size_t i = 0; i < nodes.size(); ++i) sets[edges[i]].insert(nodes[i]);
    }
    g.incidence.reserve(n_edges);
    for (auto& s : sets) g.incidence.emplace_back(s.begin(), s.end());
    return g;
}

GlobalGraph build_global_graph(const std::vector<PseudoSession>& sessions,
                               FeatureType feature_type, int epsilon, int n_nodes,
                               int max_degree) {
    if (epsilon < 1) throw ConfigError("build_global_graph: epsilon must be >= 1");
    GlobalGraph g;
    g.feature_type = feature_type;
    g.epsilon = epsilon;
    g.n_nodes = n_nodes;
    g.adjacency.assign(n_nodes, {});

    // sessions_with[v] = number of distinct sessions containing v
    std::vector<int> sessions_with(n_nodes, 0);
    for (const auto& s : sessions) {
        std::unordered_set<int> seen;
        for (int v : session_feature(s, feature_type)) seen.insert(v);
        for (int v : seen) ++sessions_with[v];
    }

    // Directed counts: for each occurrence of v at position i' in session b,
    // every other session containing v views the epsilon window around i'.
    std::unordered_map<long long, long long> counts;  // key v * n + u
    for (const auto& s : sessions) {
        const auto& seq = session_feature(s, feature_type);
        int len = static_cast<int>(seq.size());
        std::unordered_set<int> in_session(seq.begin(), seq.end());
        for (int ip = 0; ip < len; ++ip) {
            int v = seq[ip];
            int mult = sessions_with[v] - 1;  // sessions a != b sharing v
            if (mult <= 0) continue;
            int jlo = std::max(0, ip - epsilon), jhi = std::min(len - 1, ip + epsilon);
            for (int j = jlo; j <= jhi; ++j) {
                if (j == ip) continue;
                int u = seq[j];
                if (u == v) continue;  // no self loops
                counts[static_cast<long long>(v) * n_nodes + u] += mult;
            }
        }
    }

    // Symmetrize: w(v,u) + w(u,v)
    std::unordered_map<long long, long long> sym;
    for (const auto& [key, c] : counts) {
        int v = static_cast<int>(key / n_nodes), u = static_cast<int>(key % n_nodes);
        sym[static_cast<long long>(std::min(v, u)) * n_nodes + std::max(v, u)] += c;
    }

    std::vector<std::vector<std::pair<int, int>>> full(n_nodes);
    for (const auto& [key, c] : sym) {
        int v = static_cast<int>(key / n_nodes), u = static_cast<int>(key % n_nodes);
        full[v].emplace_back(u, static_cast<int>(c));
        full[u].emplace_back(v, static_cast<int>(c));
    }

    if (max_degree <= 0) {
        for (int v = 0; v < n_nodes; ++v) {
            std::sort(full[v].begin(), full[v].end());
            g.adjacency[v] = std::move(full[v]);
        }
        return g;
    }

    // Keep an edge when either endpoint ranks it in its own top max_degree
    // (heavier weight first, then lower neighbor id); keeps adjacency symmetric.
    std::set<std::pair<int, int>> kept;
    for (int v = 0; v < n_nodes; ++v) {
        auto ranked = full[v];
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        for (std::size_t r = 0; r < ranked.size() && r < static_cast<std::size_t>(max_degree); ++r)
            kept.insert({std::min(v, ranked[r].first), std::max(v, ranked[r].first)});
    }
    for (auto [v, u] : kept) {
        long long w = sym.at(static_cast<long long>(v) * n_nodes + u);
        g.adjacency[v].emplace_back(u, static_cast<int>(w));
        g.adjacency[u].emplace_back(v, static_cast<int>(w));
    }
    for (auto& adj : g.adjacency) std::sort(adj.begin(), adj.end());
    return g;
}

GraphSet build_graph_set(const std::vector<PseudoSession>& train_sessions,
                         const FeatureVocabulary& vocab, int epsilon, int max_degree) {
    GraphSet gs;
    for (auto t : kAllFeatureTypes)
        for (auto tau : kAllFeatureTypes) {
            if (t == tau) continue;
            gs.hypergraphs.emplace(
                std::make_pair(t, tau),
                build_hypergraph(train_sessions, t, tau, node_count(vocab, t),
                                 node_count(vocab, tau)));
        }
    for (auto t : {FeatureType::Id, FeatureType::Price})
        gs.global_graphs.emplace(
            t, build_global_graph(train_sessions, t, epsilon, node_count(vocab, t), max_degree));

    // Modal training price bin per item; ties resolved toward the lower bin.
    int n_items = node_count(vocab, FeatureType::Id);
    int n_bins = vocab.n_price_bins;
    std::vector<std::vector<int>> item_bin_counts(n_items, std::vector<int>(n_bins, 0));
    std::vector<long long> bin_totals(n_bins, 0);
    for (const auto& s : train_sessions)
        for (std::size_t i = 0; i < s.items.size(); ++i) {
            ++item_bin_counts[s.items[i]][s.prices[i]];
            ++bin_totals[s.prices[i]];
        }
    gs.global_modal_price_bin = static_cast<int>(
        std::max_element(bin_totals.begin(), bin_totals.end()) - bin_totals.begin());
    gs.item_price_map.assign(n_items, gs.global_modal_price_bin);
    for (int v = 0; v < n_items; ++v) {
        auto& c = item_bin_counts[v];
        auto it = std::max_element(c.begin(), c.end());
        if (*it > 0) gs.item_price_map[v] = static_cast<int>(it - c.begin());
    }
    return gs;
}

}  // namespace cohhgn
