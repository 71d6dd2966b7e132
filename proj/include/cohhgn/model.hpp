#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cohhgn/graph.hpp"
#include "cohhgn/tensor.hpp"

namespace cohhgn {

struct ModelConfig {
    int d = 128;          // embedding size
    int L = 2;            // graph embedding iterations
    int heads = 4;        // self-attention heads
    int week_dim = 16;    // dimension c of the week encoding, even
    double dropout = 0.2;
    double leaky_slope = 0.01;
};

// Flattened adjacency: entry e connects source seg[e] to nbr[e]; sources are
// contiguous and nondecreasing.
struct CsrAdjacency {
    std::vector<int> seg;
    std::vector<int> nbr;
    std::vector<double> weight;  // empty for hypergraph adjacency
};

struct ModelDims {
    std::array<int, 4> n_nodes{};  // indexed by FeatureType
    int n_score_items = 0;         // real items, excluding the unknown slot
    int d_sale = 0;
    int d_type = 0;
};

// Every learnable tensor of the network, addressable by name.
struct ModelParams {
    ModelConfig cfg;
    ModelDims dims;

    std::array<Tensor, 4> table;   // shared base embeddings, h_0 for both branches
    std::array<Tensor, 4> u_t;     // intra-type attention vectors
    std::array<Tensor, 4> w_self;  // W^t of the inter-type softmax
    std::array<std::array<Tensor, 3>, 4> w_tau;  // W^t_tau, one per hyperedge type

    Tensor w1;  // (d+1, d+1) global attention
    Tensor q;   // (d+1)
    Tensor w2;  // (d, 2d) global aggregation
    Tensor w3, w4;  // (d, d) gate fusion

    Tensor w5;  // (d, 2d) session item embedding
    Tensor w6;  // (d, d_sale + week_dim)
    Tensor w7;  // (d, d_type)
    Tensor b1;  // (d)
    Tensor w8, w9;  // (d, d) item preference
    Tensor b2;      // (d)
    Tensor u_attn;  // (d)

    std::vector<Tensor> wq, wk, wv;  // per head, (d/heads, d)

    Tensor wa, wb;  // (d, 2d) co-guided gates
    Tensor wc, wd;  // (d, d) co-guided cross transforms

    static ModelParams init(const ModelDims& dims, const ModelConfig& cfg, std::uint64_t seed);

    // One entry per learnable tensor, stable order.
    std::vector<std::pair<std::string, Tensor>> parameters() const;
    void zero_grads() const;
};

struct SessionInput {
    std::vector<int> items;
    std::vector<int> prices;
    std::vector<int> large_cats;
    std::vector<int> middle_cats;
    std::vector<int> sale_flags;
    std::vector<int> attr_flags;
    int week = 1;
};

struct SessionBatch {
    std::vector<SessionInput> inputs;
    std::vector<int> labels;  // next-item index per session
};

// Last element of each session is the label, the rest is input.
SessionBatch make_batch(const std::vector<PseudoSession>& sessions, std::size_t begin,
                        std::size_t end);

// ---- standalone building blocks of the network ----

Tensor intra_type_aggregate(const Tensor& h_prev, const CsrAdjacency& adj, const Tensor& u_t);
Tensor inter_type_aggregate(const Tensor& h_prev, const std::array<Tensor, 3>& m,
                            const Tensor& w_self, const std::array<Tensor, 3>& w_tau);
Tensor global_propagate(const Tensor& h_prev, const CsrAdjacency& adj, const Tensor& session_mean,
                        const Tensor& w1, const Tensor& q, double leaky_slope);
Tensor global_aggregate(const Tensor& h_prev, const Tensor& h_neigh, const Tensor& w2);
Tensor gate_fuse(const Tensor& h_hyper, const Tensor& h_global, const Tensor& w3,
                 const Tensor& w4);

std::vector<double> week_encoding(int week, int c);
std::vector<double> item_position_encoding(int position, int d);  // 1-based position

Tensor session_item_embedding(const Tensor& h_items, const Tensor& pos_items,
                              const std::vector<int>& sale_flags,
                              const std::vector<double>& pos_time,
                              const std::vector<int>& attr_flags, const ModelParams& p);
Tensor item_preference(const Tensor& v_items, const Tensor& h_items, const ModelParams& p);
Tensor price_preference(const Tensor& h_prices, const ModelParams& p);
std::pair<Tensor, Tensor> co_guided_transform(const Tensor& item_pref, const Tensor& price_pref,
                                              const ModelParams& p);
Tensor score_items(const Tensor& item_vec, const Tensor& price_vec, const Tensor& h_id,
                   const Tensor& h_pri, const std::vector<int>& item_price_map, int n_items);
Tensor bce_loss(const Tensor& y_hat, int label);

class Model {
public:
    Model(ModelParams params) : params_(std::move(params)) {}

    // Lowers graphs to flat adjacency; must be called before forward.
    void attach_graphs(const GraphSet& graphs);

    // One probability vector over the item vocabulary per session.
    std::vector<Tensor> forward(const SessionBatch& batch, bool training, std::mt19937_64& rng);
    Tensor forward_one(const SessionInput& input, bool training, std::mt19937_64& rng);

    // Mean per-session loss over the batch; outputs are also returned.
    Tensor batch_loss(const SessionBatch& batch, bool training, std::mt19937_64& rng,
                      std::vector<Tensor>* outputs = nullptr);

    ModelParams& params() { return params_; }
    const ModelParams& params() const { return params_; }
    const std::vector<int>& item_price_map() const { return item_price_map_; }

    // Hypergraph branch for one feature type, L iterations.
    Tensor hyper_embed(FeatureType t, bool training, std::mt19937_64& rng);
    // Global branch for one feature type given the session's positions.
    Tensor global_embed(FeatureType t, const std::vector<int>& session_positions, bool training,
                        std::mt19937_64& rng);

private:
    struct BatchShared;  // per-batch cache of the session-independent branch

    std::vector<Tensor> forward_impl(const SessionBatch& batch, bool training,
                                     std::mt19937_64& rng);

    ModelParams params_;
    std::array<std::array<CsrAdjacency, 3>, 4> hyper_adj_;  // [node type][hyperedge slot]
    std::array<CsrAdjacency, 4> global_adj_;                // id and pri populated
    std::vector<int> item_price_map_;
    bool graphs_attached_ = false;
};

// The three hyperedge types for a node type, in FeatureType order.
std::array<FeatureType, 3> hyperedge_types_for(FeatureType t);

}  // namespace cohhgn
