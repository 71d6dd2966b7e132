#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cohhgn/data.hpp"

namespace cohhgn {

enum class FeatureType { Id = 0, Price = 1, Large = 2, Middle = 3 };

constexpr std::array<FeatureType, 4> kAllFeatureTypes = {FeatureType::Id, FeatureType::Price,
                                                         FeatureType::Large, FeatureType::Middle};

const char* feature_type_name(FeatureType t);
FeatureType feature_type_from_name(const std::string& name);

const std::vector<int>& session_feature(const PseudoSession& s, FeatureType t);

// Hyperedges are values of edge_type; each connects every node_type value
// co-observed with it in some training record.
struct HeteroHypergraph {
    FeatureType node_type;
    FeatureType edge_type;
    int n_nodes = 0;
    int n_edges = 0;
    std::vector<std::vector<int>> incidence;  // per hyperedge, sorted unique node ids

    // Union of hyperedges containing `node`, including the node itself.
    std::vector<int> hyper_neighbors(int node) const;
};

// Weighted same-type co-occurrence graph over epsilon windows.
struct GlobalGraph {
    FeatureType feature_type;
    int epsilon = 0;
    int n_nodes = 0;
    // adjacency[i] = sorted (neighbor, weight) pairs; symmetric, no self loops
    std::vector<std::vector<std::pair<int, int>>> adjacency;
};

HeteroHypergraph build_hypergraph(const std::vector<PseudoSession>& sessions,
                                  FeatureType node_type, FeatureType edge_type, int n_nodes,
                                  int n_edges);

// Counts epsilon-window co-occurrences across distinct sessions, symmetrizes,
// then keeps an edge when either endpoint ranks it among its top `max_degree`
// neighbors by weight (0 = no truncation).
GlobalGraph build_global_graph(const std::vector<PseudoSession>& sessions,
                               FeatureType feature_type, int epsilon, int n_nodes,
                               int max_degree = 12);

// All graphs the model needs, plus the modal price bin per item for scoring.
struct GraphSet {
    std::map<std::pair<FeatureType, FeatureType>, HeteroHypergraph> hypergraphs;
    std::map<FeatureType, GlobalGraph> global_graphs;
    std::vector<int> item_price_map;  // modal training price bin per item id
    int global_modal_price_bin = 0;   // fallback for items without observations
};

GraphSet build_graph_set(const std::vector<PseudoSession>& train_sessions,
                         const FeatureVocabulary& vocab, int epsilon, int max_degree = 12);

int node_count(const FeatureVocabulary& vocab, FeatureType t);

}  // namespace cohhgn
