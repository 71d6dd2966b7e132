#include "cohhgn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cohhgn {

std::array<FeatureType, 3> hyperedge_types_for(FeatureType t) {
    std::array<FeatureType, 3> out{};
    std::size_t k = 0;
    for (auto tau : kAllFeatureTypes)
        if (tau != t) out[k++] = tau;
    return out;
}

ModelParams ModelParams::init(const ModelDims& dims, const ModelConfig& cfg, std::uint64_t seed) {
    if (cfg.d % cfg.heads != 0) throw ConfigError("d must be divisible by the number of heads");
    if (cfg.week_dim % 2 != 0) throw ConfigError("week encoding dimension must be even");
    ModelParams p;
    p.cfg = cfg;
    p.dims = dims;
    const int d = cfg.d;
    std::uint64_t s = seed;
    auto he = [&s](std::vector<int> shape) { return he_init(shape, s++); };

    for (int t = 0; t < 4; ++t) {
        p.table[t] = he({dims.n_nodes[t], d});
        p.u_t[t] = he({d});
        p.w_self[t] = he({d, d});
        for (int k = 0; k < 3; ++k) p.w_tau[t][k] = he({d, d});
    }
    p.w1 = he({d + 1, d + 1});
    p.q = he({d + 1});
    p.w2 = he({d, 2 * d});
    p.w3 = he({d, d});
    p.w4 = he({d, d});
    p.w5 = he({d, 2 * d});
    p.w6 = he({d, dims.d_sale + cfg.week_dim});
    p.w7 = he({d, dims.d_type});
    p.b1 = he({d});
    p.w8 = he({d, d});
    p.w9 = he({d, d});
    p.b2 = he({d});
    p.u_attn = he({d});
    for (int i = 0; i < cfg.heads; ++i) {
        p.wq.push_back(he({d / cfg.heads, d}));
        p.wk.push_back(he({d / cfg.heads, d}));
        p.wv.push_back(he({d / cfg.heads, d}));
    }
    p.wa = he({d, 2 * d});
    p.wb = he({d, 2 * d});
    p.wc = he({d, d});
    p.wd = he({d, d});
    return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (int t = 0; t < 4; ++t) {
        std::string tn = feature_type_name(static_cast<FeatureType>(t));
        out.emplace_back("table." + tn, table[t]);
        out.emplace_back("u_t." + tn, u_t[t]);
        out.emplace_back("w_self." + tn, w_self[t]);
        auto taus = hyperedge_types_for(static_cast<FeatureType>(t));
        for (int k = 0; k < 3; ++k)
            out.emplace_back("w_tau." + tn + "." + feature_type_name(taus[k]), w_tau[t][k]);
    }
    out.emplace_back("w1", w1);
    out.emplace_back("q", q);
    out.emplace_back("w2", w2);
    out.emplace_back("w3", w3);
    out.emplace_back("w4", w4);
    out.emplace_back("w5", w5);
    out.emplace_back("w6", w6);
    out.emplace_back("w7", w7);
    out.emplace_back("b1", b1);
    out.emplace_back("w8", w8);
    out.emplace_back("w9", w9);
    out.emplace_back("b2", b2);
    out.emplace_back("u_attn", u_attn);
    for (std::size_t i = 0; i < wq.size(); ++i) {
        out.emplace_back("wq." + std::to_string(i), wq[i]);
        out.emplace_back("wk." + std::to_string(i), wk[i]);
        out.emplace_back("wv." + std::to_string(i), wv[i]);
    }
    out.emplace_back("wa", wa);
    out.emplace_back("wb", wb);
    out.emplace_back("wc", wc);
    out.emplace_back("wd", wd);
    return out;
}

void ModelParams::zero_grads() const {
    for (auto& [name, t] : parameters()) {
        (void)name;
        Tensor tt = t;
        tt.zero_grad();
    }
}

SessionBatch make_batch(const std::vector<PseudoSession>& sessions, std::size_t begin,
                        std::size_t end) {
    SessionBatch batch;
    for (std::size_t i = begin; i < end && i < sessions.size(); ++i) {
        const auto& s = sessions[i];
        if (s.length() < 2) throw DataError("make_batch: session shorter than 2");
        SessionInput in;
        std::size_t n = s.length() - 1;
        in.items.assign(s.items.begin(), s.items.begin() + n);
        in.prices.assign(s.prices.begin(), s.prices.begin() + n);
        in.large_cats.assign(s.large_cats.begin(), s.large_cats.begin() + n);
        in.middle_cats.assign(s.middle_cats.begin(), s.middle_cats.begin() + n);
        in.sale_flags = s.sale_flags;
        in.attr_flags = s.attr_flags;
        in.week = s.week;
        batch.inputs.push_back(std::move(in));
        batch.labels.push_back(s.items.back());
    }
    return batch;
}

// Per-node attention over same-type neighbors reachable through hyperedges
// of one type; scores depend only on the neighbor.
Tensor intra_type_aggregate(const Tensor& h_prev, const CsrAdjacency& adj, const Tensor& u_t) {
    int n = h_prev.rows();
    Tensor scores = matvec(h_prev, u_t);
    Tensor edge_scores = gather_vec(scores, adj.nbr);
    Tensor alpha = segment_softmax(edge_scores, adj.seg, n);
    return segment_weighted_sum(alpha, rows(h_prev, adj.nbr), adj.seg, n);
}

namespace {

// beta = elementwise softmax over four candidate matrices, applied per
// dimension; returns sum_k beta_k * v_k.
Tensor softmax4_combine(const std::array<Tensor, 4>& c, const std::array<Tensor, 4>& v) {
    Tensor mx = maximum(maximum(c[0], c[1]), maximum(c[2], c[3]));
    std::array<Tensor, 4> e;
    for (int k = 0; k < 4; ++k) e[k] = exp_t(sub(c[k], mx));
    Tensor denom = add(add(e[0], e[1]), add(e[2], e[3]));
    Tensor out = mul(div(e[0], denom), v[0]);
    for (int k = 1; k < 4; ++k) out = add(out, mul(div(e[k], denom), v[k]));
    return out;
}

}  // namespace

// Fuses the three hyperedge-type messages with the node's own state.
Tensor inter_type_aggregate(const Tensor& h_prev, const std::array<Tensor, 3>& m,
                            const Tensor& w_self, const std::array<Tensor, 3>& w_tau) {
    std::array<Tensor, 4> cand = {linear(h_prev, w_self), linear(m[0], w_tau[0]),
                                  linear(m[1], w_tau[1]), linear(m[2], w_tau[2])};
    std::array<Tensor, 4> vals = {h_prev, m[0], m[1], m[2]};
    return softmax4_combine(cand, vals);
}

// Attention over epsilon-neighborhoods with the co-occurrence weight
// concatenated to the gated neighbor embedding.
Tensor global_propagate(const Tensor& h_prev, const CsrAdjacency& adj, const Tensor& session_mean,
                        const Tensor& w1, const Tensor& q, double leaky_slope) {
    int n = h_prev.rows();
    int d = h_prev.cols();
    if (adj.nbr.empty()) return Tensor::zeros({n, d});
    // W1 [s*h_j ; w_ij] splits into W1[:, :d] (s*h_j) + w_ij * W1[:, d]
    Tensor gated = mul_rowvec(h_prev, session_mean);
    Tensor z_nodes = linear(gated, cols(w1, 0, d));           // (n, d+1)
    Tensor z_edges = rows(z_nodes, adj.nbr);                  // (E, d+1)
    Tensor w_col = col(w1, d);
    Tensor z = add(z_edges, outer(Tensor::from({static_cast<int>(adj.weight.size())}, adj.weight),
                                  w_col));
    Tensor scores = matvec(leaky_relu(z, leaky_slope), q);
    Tensor pi = segment_softmax(scores, adj.seg, n);
    return segment_weighted_sum(pi, rows(h_prev, adj.nbr), adj.seg, n);
}

// Combines a node's state with its attended neighborhood.
Tensor global_aggregate(const Tensor& h_prev, const Tensor& h_neigh, const Tensor& w2) {
    return relu(linear(concat_cols(h_prev, h_neigh), w2));
}

// Convex gate between the hypergraph and global branches.
Tensor gate_fuse(const Tensor& h_hyper, const Tensor& h_global, const Tensor& w3,
                 const Tensor& w4) {
    Tensor g = sigmoid(add(linear(h_hyper, w3), linear(h_global, w4)));
    Tensor ones = Tensor::from(g.shape(), std::vector<double>(g.size(), 1.0));
    return add(mul(g, h_hyper), mul(sub(ones, g), h_global));
}

// Seasonal week encoding: component pair k uses argument 2*m*pi / (52*k).
std::vector<double> week_encoding(int week, int c) {
    if (c % 2 != 0) throw ConfigError("week_encoding: dimension must be even");
    std::vector<double> out(c);
    for (int k = 1; k <= c / 2; ++k) {
        double arg = 2.0 * week * M_PI / (52.0 * k);
        out[2 * (k - 1)] = std::sin(arg);
        out[2 * (k - 1) + 1] = std::cos(arg);
    }
    return out;
}

// Transformer-style sinusoidal encoding, 1-based positions.
std::vector<double> item_position_encoding(int position, int d) {
    std::vector<double> out(d);
    for (int k = 0; 2 * k < d; ++k) {
        double freq = std::pow(10000.0, -2.0 * k / d);
        out[2 * k] = std::sin(position * freq);
        if (2 * k + 1 < d) out[2 * k + 1] = std::cos(position * freq);
    }
    return out;
}

// Position-aware item embedding biased by sale, time, and attribute flags.
Tensor session_item_embedding(const Tensor& h_items, const Tensor& pos_items,
                              const std::vector<int>& sale_flags,
                              const std::vector<double>& pos_time,
                              const std::vector<int>& attr_flags, const ModelParams& p) {
    Tensor lhs = linear(concat_cols(h_items, pos_items), p.w5);  // (s, d)
    std::vector<double> sale_time;
    for (int f : sale_flags) sale_time.push_back(static_cast<double>(f));
    sale_time.insert(sale_time.end(), pos_time.begin(), pos_time.end());
    Tensor x_st = Tensor::from({static_cast<int>(sale_time.size())}, sale_time);
    std::vector<double> attrs(attr_flags.begin(), attr_flags.end());
    Tensor x_ty = Tensor::from({static_cast<int>(attrs.size())}, attrs);
    Tensor bias = add(add(matvec(p.w6, x_st), matvec(p.w7, x_ty)), p.b1);  // (d)
    return tanh_t(add_rowvec(lhs, bias));
}

// Soft attention readout over the session items; beta stays unnormalized.
Tensor item_preference(const Tensor& v_items, const Tensor& h_items, const ModelParams& p) {
    Tensor v_bar = mean_rows(v_items);
    Tensor inner = sigmoid(add_rowvec(linear(v_items, p.w8), add(matvec(p.w9, v_bar), p.b2)));
    Tensor beta = matvec(inner, p.u_attn);  // (s)
    return vecmat(beta, h_items);
}

// Multi-head scaled dot-product attention over the price series, last
// position taken as the preference.
Tensor price_preference(const Tensor& h_prices, const ModelParams& p) {
    int s = h_prices.rows();
    int dh = p.cfg.d / p.cfg.heads;
    double scale_factor = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor m;
    for (int i = 0; i < p.cfg.heads; ++i) {
        Tensor qh = linear(h_prices, p.wq[i]);
        Tensor kh = linear(h_prices, p.wk[i]);
        Tensor vh = linear(h_prices, p.wv[i]);
        Tensor attn = softmax_rows(scale(matmul_nt(qh, kh), scale_factor));
        Tensor head = matmul(attn, vh);  // (s, d/h)
        m = i == 0 ? head : concat_cols(m, head);
    }
    return row(m, s - 1);
}

// Gated mutual refinement standing in for the co-guided internals.
std::pair<Tensor, Tensor> co_guided_transform(const Tensor& item_pref, const Tensor& price_pref,
                                              const ModelParams& p) {
    Tensor cat = concat_vec(item_pref, price_pref);
    Tensor g_i = sigmoid(matvec(p.wa, cat));
    Tensor g_p = sigmoid(matvec(p.wb, cat));
    Tensor ones = Tensor::from(g_i.shape(), std::vector<double>(g_i.size(), 1.0));
    Tensor item_out = add(mul(g_i, item_pref), mul(sub(ones, g_i), tanh_t(matvec(p.wc, price_pref))));
    Tensor price_out = add(mul(g_p, price_pref), mul(sub(ones, g_p), tanh_t(matvec(p.wd, item_pref))));
    return {item_out, price_out};
}

// Bilinear scores against the item and price embeddings, softmaxed.
Tensor score_items(const Tensor& item_vec, const Tensor& price_vec, const Tensor& h_id,
                   const Tensor& h_pri, const std::vector<int>& item_price_map, int n_items) {
    std::vector<int> ids(n_items);
    std::iota(ids.begin(), ids.end(), 0);
    std::vector<int> bins(item_price_map.begin(), item_price_map.begin() + n_items);
    Tensor q_id = matvec(rows(h_id, ids), item_vec);
    Tensor q_pri = matvec(rows(h_pri, bins), price_vec);
    return softmax_vec(add(q_id, q_pri));
}

// Binary cross entropy summed over the item vocabulary.
Tensor bce_loss(const Tensor& y_hat, int label) {
    if (label < 0 || label >= y_hat.rows()) throw DomainError("bce_loss: label out of range");
    Tensor yc = clamp(y_hat, 1e-12, 1.0 - 1e-12);
    Tensor log_y = log_t(yc);
    Tensor log_1my = log_t(add_scalar(scale(yc, -1.0), 1.0));
    Tensor pos = gather_vec(log_y, {label});
    Tensor pos_neg = gather_vec(log_1my, {label});
    Tensor total_neg = sum(log_1my);
    // -(log yc[label] + sum_{j != label} log(1 - yc[j]))
    return scale(add(sub(pos, pos_neg), total_neg), -1.0);
}

// ---- Model ----

namespace {

CsrAdjacency lower_hypergraph(const HeteroHypergraph& g) {
    CsrAdjacency adj;
    for (int v = 0; v < g.n_nodes; ++v) {
        // union over hyperedges containing v, self included
        std::set<int> nbrs;
        nbrs.insert(v);
        for (const auto& edge : g.incidence)
            if (std::binary_search(edge.begin(), edge.end(), v))
                nbrs.insert(edge.begin(), edge.end());
        for (int u : nbrs) {
            adj.seg.push_back(v);
            adj.nbr.push_back(u);
        }
    }
    return adj;
}

CsrAdjacency lower_global(const GlobalGraph& g) {
    CsrAdjacency adj;
    for (int v = 0; v < g.n_nodes; ++v)
        for (auto [u, w] : g.adjacency[v]) {
            adj.seg.push_back(v);
            adj.nbr.push_back(u);
            adj.weight.push_back(static_cast<double>(w));
        }
    return adj;
}

int slot_of(FeatureType t, FeatureType tau) {
    auto taus = hyperedge_types_for(t);
    for (int k = 0; k < 3; ++k)
        if (taus[k] == tau) return k;
    throw DomainError("slot_of: tau equals t");
}

}  // namespace

void Model::attach_graphs(const GraphSet& graphs) {
    for (const auto& [key, g] : graphs.hypergraphs) {
        auto [t, tau] = key;
        hyper_adj_[static_cast<int>(t)][slot_of(t, tau)] = lower_hypergraph(g);
    }
    for (const auto& [t, g] : graphs.global_graphs)
        global_adj_[static_cast<int>(t)] = lower_global(g);
    item_price_map_ = graphs.item_price_map;
    graphs_attached_ = true;
}

Tensor Model::hyper_embed(FeatureType t, bool training, std::mt19937_64& rng) {
    const int ti = static_cast<int>(t);
    Tensor h = params_.table[ti];
    for (int l = 0; l < params_.cfg.L; ++l) {
        std::array<Tensor, 3> m;
        for (int k = 0; k < 3; ++k)
            m[k] = intra_type_aggregate(h, hyper_adj_[ti][k], params_.u_t[ti]);
        h = inter_type_aggregate(h, m, params_.w_self[ti],
                                 {params_.w_tau[ti][0], params_.w_tau[ti][1], params_.w_tau[ti][2]});
        h = dropout(h, params_.cfg.dropout, rng, training);
    }
    return h;
}

Tensor Model::global_embed(FeatureType t, const std::vector<int>& session_positions, bool training,
                           std::mt19937_64& rng) {
    const int ti = static_cast<int>(t);
    Tensor h = params_.table[ti];
    for (int l = 0; l < params_.cfg.L; ++l) {
        Tensor s_bar = mean_rows(rows(h, session_positions));
        Tensor h_n = global_propagate(h, global_adj_[ti], s_bar, params_.w1, params_.q,
                                      params_.cfg.leaky_slope);
        h = global_aggregate(h, h_n, params_.w2);
        h = dropout(h, params_.cfg.dropout, rng, training);
    }
    return h;
}

std::vector<Tensor> Model::forward_impl(const SessionBatch& batch, bool training,
                                        std::mt19937_64& rng) {
    if (!graphs_attached_) throw ConfigError("Model::forward: graphs not attached");
    const auto& cfg = params_.cfg;

    // Session-independent hypergraph branch, shared across the batch.
    std::array<Tensor, 4> h_hyper;
    for (auto t : kAllFeatureTypes)
        h_hyper[static_cast<int>(t)] = hyper_embed(t, training, rng);

    std::vector<Tensor> outputs;
    outputs.reserve(batch.inputs.size());
    for (const auto& in : batch.inputs) {
        if (in.items.empty()) throw DataError("forward: empty session input");
        Tensor h_global_id = global_embed(FeatureType::Id, in.items, training, rng);
        Tensor h_global_pri = global_embed(FeatureType::Price, in.prices, training, rng);
        Tensor h_id = gate_fuse(h_hyper[0], h_global_id, params_.w3, params_.w4);
        Tensor h_pri = gate_fuse(h_hyper[1], h_global_pri, params_.w3, params_.w4);

        int s = static_cast<int>(in.items.size());
        Tensor h_items = rows(h_id, in.items);
        std::vector<double> pos_data;
        for (int i = 1; i <= s; ++i) {
            auto enc = item_position_encoding(i, cfg.d);
            pos_data.insert(pos_data.end(), enc.begin(), enc.end());
        }
        Tensor pos_items = Tensor::from({s, cfg.d}, pos_data);
        auto pos_time = week_encoding(in.week, cfg.week_dim);

        Tensor v = session_item_embedding(h_items, pos_items, in.sale_flags, pos_time,
                                          in.attr_flags, params_);
        Tensor item_pref = item_preference(v, h_items, params_);
        Tensor price_pref = price_preference(rows(h_pri, in.prices), params_);
        auto [iv, pv] = co_guided_transform(item_pref, price_pref, params_);
        outputs.push_back(
            score_items(iv, pv, h_id, h_pri, item_price_map_, params_.dims.n_score_items));
    }
    return outputs;
}

std::vector<Tensor> Model::forward(const SessionBatch& batch, bool training, std::mt19937_64& rng) {
    return forward_impl(batch, training, rng);
}

Tensor Model::forward_one(const SessionInput& input, bool training, std::mt19937_64& rng) {
    SessionBatch b;
    b.inputs.push_back(input);
    b.labels.push_back(0);
    return forward_impl(b, training, rng)[0];
}

Tensor Model::batch_loss(const SessionBatch& batch, bool training, std::mt19937_64& rng,
                         std::vector<Tensor>* outputs) {
    auto ys = forward_impl(batch, training, rng);
    Tensor total;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        Tensor l = bce_loss(ys[i], batch.labels[i]);
        total = i == 0 ? l : add(total, l);
    }
    if (outputs != nullptr) *outputs = std::move(ys);
    return scale(total, 1.0 / static_cast<double>(ys.size()));
}

}  // namespace cohhgn
