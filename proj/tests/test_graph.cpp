#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "cohhgn/graph.hpp"

using namespace cohhgn;

namespace {

std::vector<PseudoSession> random_sessions(int n_sessions, int n_items, int n_bins, int n_large,
                                           int n_middle, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<PseudoSession> out(n_sessions);
    for (int s = 0; s < n_sessions; ++s) {
        out[s].session_id = s;
        int len = 2 + static_cast<int>(rng() % 6);
        for (int i = 0; i < len; ++i) {
            int item = static_cast<int>(rng() % n_items);
            out[s].items.push_back(item);
            out[s].prices.push_back(static_cast<int>(rng() % n_bins));
            out[s].large_cats.push_back(item % n_large);
            out[s].middle_cats.push_back(item % n_middle);
        }
    }
    return out;
}

}  // namespace

TEST_CASE("feature type names round trip") {
    for (auto t : kAllFeatureTypes) CHECK(feature_type_from_name(feature_type_name(t)) == t);
    CHECK_THROWS_AS(feature_type_from_name("bogus"), DomainError);
}

TEST_CASE("hypergraph incidence matches a brute force co-observation oracle") {
    auto sessions = random_sessions(200, 30, 5, 4, 9, 42);
    for (auto node_t : kAllFeatureTypes)
        for (auto edge_t : kAllFeatureTypes) {
            if (node_t == edge_t) continue;
            int n_nodes = node_t == FeatureType::Price ? 5 : 30;
            int n_edges = edge_t == FeatureType::Price ? 5 : 30;
            if (node_t == FeatureType::Large) n_nodes = 4;
            if (node_t == FeatureType::Middle) n_nodes = 9;
            if (edge_t == FeatureType::Large) n_edges = 4;
            if (edge_t == FeatureType::Middle) n_edges = 9;
            auto g = build_hypergraph(sessions, node_t, edge_t, n_nodes, n_edges);

            // oracle: membership matrix filled record by record
            std::vector<std::vector<bool>> member(n_edges, std::vector<bool>(n_nodes, false));
            for (const auto& s : sessions) {
                const auto& nodes = session_feature(s, node_t);
                const auto& edges = session_feature(s, edge_t);
                for (std::size_t i = 0; i < nodes.size(); ++i)
                    member[edges[i]][nodes[i]] = true;
            }
            REQUIRE(g.incidence.size() == static_cast<std::size_t>(n_edges));
            for (int e = 0; e < n_edges; ++e) {
                std::vector<int> expect;
                for (int v = 0; v < n_nodes; ++v)
                    if (member[e][v]) expect.push_back(v);
                CHECK(g.incidence[e] == expect);
            }
        }
}

TEST_CASE("hypergraph duality: incidence of (a,b) is the transpose of (b,a)") {
    auto sessions = random_sessions(120, 25, 6, 5, 8, 7);
    auto ab = build_hypergraph(sessions, FeatureType::Id, FeatureType::Price, 25, 6);
    auto ba = build_hypergraph(sessions, FeatureType::Price, FeatureType::Id, 6, 25);
    for (int e = 0; e < 6; ++e)
        for (int v : ab.incidence[e])
            CHECK(std::binary_search(ba.incidence[v].begin(), ba.incidence[v].end(), e));
    for (int e = 0; e < 25; ++e)
        for (int v : ba.incidence[e])
            CHECK(std::binary_search(ab.incidence[v].begin(), ab.incidence[v].end(), e));
}

TEST_CASE("hyper_neighbors contains the node and unions its hyperedges") {
    auto sessions = random_sessions(80, 20, 4, 4, 6, 11);
    auto g = build_hypergraph(sessions, FeatureType::Id, FeatureType::Price, 20, 4);
    for (int v = 0; v < 20; ++v) {
        auto nbrs = g.hyper_neighbors(v);
        CHECK(std::binary_search(nbrs.begin(), nbrs.end(), v));
        std::set<int> expect = {v};
        for (const auto& e : g.incidence)
            if (std::find(e.begin(), e.end(), v) != e.end()) expect.insert(e.begin(), e.end());
        CHECK(nbrs == std::vector<int>(expect.begin(), expect.end()));
    }
    CHECK_THROWS_AS(g.hyper_neighbors(20), DomainError);
    CHECK_THROWS_AS(g.hyper_neighbors(-1), DomainError);
}

TEST_CASE("build_hypergraph rejects equal node and edge types") {
    CHECK_THROWS_AS(build_hypergraph({}, FeatureType::Id, FeatureType::Id, 3, 3), DomainError);
}

TEST_CASE("global graph matches a dense window scan oracle without truncation") {
    const int n = 18;
    auto sessions = random_sessions(200, n, 5, 4, 9, 99);
    for (int epsilon : {1, 3, 12}) {
        auto g = build_global_graph(sessions, FeatureType::Id, epsilon, n, 0);

        // oracle: dense weight matrix, four plain nested loops
        std::vector<int> with(n, 0);
        for (const auto& s : sessions) {
            std::set<int> uniq(s.items.begin(), s.items.end());
            for (int v : uniq) ++with[v];
        }
        std::vector<std::vector<long long>> w(n, std::vector<long long>(n, 0));
        for (const auto& s : sessions) {
            int len = static_cast<int>(s.items.size());
            for (int i = 0; i < len; ++i)
                for (int j = 0; j < len; ++j) {
                    if (i == j || std::abs(i - j) > epsilon) continue;
                    int v = s.items[i], u = s.items[j];
                    if (u == v) continue;
                    w[v][u] += with[v] - 1;
                }
        }
        for (int v = 0; v < n; ++v)
            for (int u = v + 1; u < n; ++u) {
                long long sym = w[v][u] + w[u][v];
                auto& adj = g.adjacency[v];
                auto it = std::find_if(adj.begin(), adj.end(),
                                       [&](const auto& p) { return p.first == u; });
                if (sym == 0) {
                    CHECK(it == adj.end());
                } else {
                    REQUIRE(it != adj.end());
                    CHECK(it->second == sym);
                }
            }
    }
}

TEST_CASE("global graph is symmetric with no self loops") {
    auto sessions = random_sessions(150, 20, 5, 4, 9, 5);
    for (int max_degree : {0, 3, 12}) {
        auto g = build_global_graph(sessions, FeatureType::Id, 12, 20, max_degree);
        for (int v = 0; v < 20; ++v)
            for (auto [u, wt] : g.adjacency[v]) {
                CHECK(u != v);
                auto& back = g.adjacency[u];
                auto it = std::find_if(back.begin(), back.end(),
                                       [&](const auto& p) { return p.first == v; });
                REQUIRE(it != back.end());
                CHECK(it->second == wt);
            }
    }
}

TEST_CASE("degree truncation keeps exactly the union of per-endpoint top lists") {
    auto sessions = random_sessions(200, 16, 5, 4, 9, 23);
    const int n = 16, max_degree = 3;
    auto full = build_global_graph(sessions, FeatureType::Id, 12, n, 0);
    auto cut = build_global_graph(sessions, FeatureType::Id, 12, n, max_degree);

    // oracle from the untruncated graph
    std::set<std::pair<int, int>> expect;
    for (int v = 0; v < n; ++v) {
        auto ranked = full.adjacency[v];
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        for (int r = 0; r < max_degree && r < static_cast<int>(ranked.size()); ++r)
            expect.insert({std::min(v, ranked[r].first), std::max(v, ranked[r].first)});
    }
    std::set<std::pair<int, int>> got;
    for (int v = 0; v < n; ++v)
        for (auto [u, wt] : cut.adjacency[v])
            if (v < u) got.insert({v, u});
    CHECK(got == expect);

    // every kept weight matches the untruncated weight
    for (int v = 0; v < n; ++v)
        for (auto [u, wt] : cut.adjacency[v]) {
            auto& adj = full.adjacency[v];
            auto it = std::find_if(adj.begin(), adj.end(),
                                   [&](const auto& p) { return p.first == u; });
            REQUIRE(it != adj.end());
            CHECK(it->second == wt);
        }
}

TEST_CASE("global graph rejects bad epsilon") {
    CHECK_THROWS_AS(build_global_graph({}, FeatureType::Id, 0, 4, 0), ConfigError);
}

TEST_CASE("graph set holds twelve hypergraphs, two global graphs, and a modal price map") {
    auto sessions = random_sessions(100, 12, 4, 3, 5, 55);
    FeatureVocabulary vocab;
    for (int i = 0; i < 12; ++i) vocab.items.add("it" + std::to_string(i));
    for (int i = 0; i < 3; ++i) vocab.large_cats.add("L" + std::to_string(i));
    for (int i = 0; i < 5; ++i) vocab.middle_cats.add("M" + std::to_string(i));
    vocab.genders = {"M", "F"};
    vocab.regions = {"x"};
    vocab.n_price_bins = 4;

    auto gs = build_graph_set(sessions, vocab, 12, 12);
    CHECK(gs.hypergraphs.size() == 12);
    CHECK(gs.global_graphs.size() == 2);
    CHECK(gs.global_graphs.count(FeatureType::Id) == 1);
    CHECK(gs.global_graphs.count(FeatureType::Price) == 1);
    REQUIRE(gs.item_price_map.size() == static_cast<std::size_t>(vocab.items.size_with_unknown()));

    // modal oracle per item
    std::vector<std::vector<int>> counts(13, std::vector<int>(4, 0));
    for (const auto& s : sessions)
        for (std::size_t i = 0; i < s.items.size(); ++i) ++counts[s.items[i]][s.prices[i]];
    for (int v = 0; v < 13; ++v) {
        int best = 0;
        bool any = false;
        for (int b = 0; b < 4; ++b) {
            if (counts[v][b] > counts[v][best]) best = b;
            if (counts[v][b] > 0) any = true;
        }
        if (any)
            CHECK(gs.item_price_map[v] == best);
        else
            CHECK(gs.item_price_map[v] == gs.global_modal_price_bin);
    }
    // unseen unknown slot falls back to the global mode
    CHECK(gs.item_price_map[12] == gs.global_modal_price_bin);
}
