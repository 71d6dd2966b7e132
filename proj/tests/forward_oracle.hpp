#pragma once

// Plain-double reimplementation of the whole forward pass with nested loops
// and no shared code with the tensor engine; comparison target for the
// library's forward output in eval mode.

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "cohhgn/model.hpp"

namespace cohhgn::testutil {

namespace oracle_detail {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline Mat to_mat(const Tensor& t) {
    Mat m(t.rows(), Vec(t.cols()));
    for (int i = 0; i < t.rows(); ++i)
        for (int j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
    return m;
}

inline Vec to_vec(const Tensor& t) {
    Vec v(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) v[i] = t.data()[i];
    return v;
}

inline double dotv(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline Vec matv(const Mat& m, const Vec& x) {
    Vec y(m.size(), 0.0);
    for (std::size_t i = 0; i < m.size(); ++i) y[i] = dotv(m[i], x);
    return y;
}

// rows of A times M transposed, mirrors linear()
inline Mat lin(const Mat& a, const Mat& m) {
    Mat y(a.size(), Vec(m.size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j) y[i][j] = dotv(a[i], m[j]);
    return y;
}

inline Vec softmaxv(Vec x) {
    double mx = *std::max_element(x.begin(), x.end());
    double z = 0.0;
    for (auto& v : x) {
        v = std::exp(v - mx);
        z += v;
    }
    for (auto& v : x) v /= z;
    return x;
}

}  // namespace oracle_detail

inline std::vector<double> oracle_forward(const GraphSet& graphs, const ModelParams& p,
                                          const SessionInput& in) {
    using namespace oracle_detail;
    const ModelConfig& cfg = p.cfg;
    const int d = cfg.d;

    auto hyper_nbrs = [&](FeatureType t, FeatureType tau, int v) {
        const auto& g = graphs.hypergraphs.at({t, tau});
        std::set<int> s = {v};
        for (const auto& e : g.incidence)
            if (std::find(e.begin(), e.end(), v) != e.end()) s.insert(e.begin(), e.end());
        return std::vector<int>(s.begin(), s.end());
    };

    auto hyper_branch = [&](FeatureType t) {
        int ti = static_cast<int>(t);
        Mat h = to_mat(p.table[ti]);
        int n = static_cast<int>(h.size());
        Vec ut = to_vec(p.u_t[ti]);
        auto taus = hyperedge_types_for(t);
        for (int l = 0; l < cfg.L; ++l) {
            std::array<Mat, 3> m;
            for (int k = 0; k < 3; ++k) {
                m[k].assign(n, Vec(d, 0.0));
                for (int v = 0; v < n; ++v) {
                    auto nb = hyper_nbrs(t, taus[k], v);
                    Vec scores;
                    for (int u : nb) scores.push_back(dotv(h[u], ut));
                    Vec alpha = softmaxv(scores);
                    for (std::size_t e = 0; e < nb.size(); ++e)
                        for (int j = 0; j < d; ++j) m[k][v][j] += alpha[e] * h[nb[e]][j];
                }
            }
            Mat c0 = lin(h, to_mat(p.w_self[ti]));
            std::array<Mat, 3> ck;
            for (int k = 0; k < 3; ++k) ck[k] = lin(m[k], to_mat(p.w_tau[ti][k]));
            Mat next(n, Vec(d, 0.0));
            for (int v = 0; v < n; ++v)
                for (int j = 0; j < d; ++j) {
                    Vec beta = softmaxv({c0[v][j], ck[0][v][j], ck[1][v][j], ck[2][v][j]});
                    next[v][j] = beta[0] * h[v][j] + beta[1] * m[0][v][j] + beta[2] * m[1][v][j] +
                                 beta[3] * m[2][v][j];
                }
            h = std::move(next);
        }
        return h;
    };

    auto global_branch = [&](FeatureType t, const std::vector<int>& positions) {
        int ti = static_cast<int>(t);
        const auto& g = graphs.global_graphs.at(t);
        Mat h = to_mat(p.table[ti]);
        int n = static_cast<int>(h.size());
        Mat w1m = to_mat(p.w1), w2m = to_mat(p.w2);
        Vec qv = to_vec(p.q);
        for (int l = 0; l < cfg.L; ++l) {
            Vec sb(d, 0.0);
            for (int pos : positions)
                for (int j = 0; j < d; ++j) sb[j] += h[pos][j] / positions.size();
            Mat hn(n, Vec(d, 0.0));
            for (int v = 0; v < n; ++v) {
                const auto& nb = g.adjacency[v];
                if (nb.empty()) continue;
                Vec scores;
                for (auto [u, w] : nb) {
                    Vec cat(d + 1);
                    for (int j = 0; j < d; ++j) cat[j] = sb[j] * h[u][j];
                    cat[d] = static_cast<double>(w);
                    Vec z = matv(w1m, cat);
                    for (auto& x : z)
                        if (x < 0.0) x *= cfg.leaky_slope;
                    scores.push_back(dotv(z, qv));
                }
                Vec pi = softmaxv(scores);
                for (std::size_t e = 0; e < nb.size(); ++e)
                    for (int j = 0; j < d; ++j) hn[v][j] += pi[e] * h[nb[e].first][j];
            }
            Mat next(n, Vec(d, 0.0));
            for (int v = 0; v < n; ++v) {
                Vec cat(2 * d);
                for (int j = 0; j < d; ++j) {
                    cat[j] = h[v][j];
                    cat[d + j] = hn[v][j];
                }
                Vec z = matv(w2m, cat);
                for (int j = 0; j < d; ++j) next[v][j] = std::max(0.0, z[j]);
            }
            h = std::move(next);
        }
        return h;
    };

    auto fuse = [&](const Mat& a, const Mat& b) {
        Mat ga = lin(a, to_mat(p.w3)), gb = lin(b, to_mat(p.w4));
        Mat out = a;
        for (std::size_t i = 0; i < a.size(); ++i)
            for (int j = 0; j < d; ++j) {
                double g = 1.0 / (1.0 + std::exp(-(ga[i][j] + gb[i][j])));
                out[i][j] = g * a[i][j] + (1.0 - g) * b[i][j];
            }
        return out;
    };

    Mat h_id = fuse(hyper_branch(FeatureType::Id), global_branch(FeatureType::Id, in.items));
    Mat h_pri =
        fuse(hyper_branch(FeatureType::Price), global_branch(FeatureType::Price, in.prices));

    const int s = static_cast<int>(in.items.size());
    Mat h_items(s), hp_items(s);
    for (int i = 0; i < s; ++i) {
        h_items[i] = h_id[in.items[i]];
        hp_items[i] = h_pri[in.prices[i]];
    }

    // session item embedding
    Mat v(s, Vec(d, 0.0));
    {
        Vec st;
        for (int f : in.sale_flags) st.push_back(static_cast<double>(f));
        for (double x : week_encoding(in.week, cfg.week_dim)) st.push_back(x);
        Vec ty(in.attr_flags.begin(), in.attr_flags.end());
        Vec bias = matv(to_mat(p.w6), st);
        Vec b7 = matv(to_mat(p.w7), ty);
        Vec b1 = to_vec(p.b1);
        Mat w5m = to_mat(p.w5);
        for (int i = 0; i < s; ++i) {
            Vec cat(2 * d);
            auto pe = item_position_encoding(i + 1, d);
            for (int j = 0; j < d; ++j) {
                cat[j] = h_items[i][j];
                cat[d + j] = pe[j];
            }
            Vec z = matv(w5m, cat);
            for (int j = 0; j < d; ++j) v[i][j] = std::tanh(z[j] + bias[j] + b7[j] + b1[j]);
        }
    }

    // item preference, beta unnormalized
    Vec item_pref(d, 0.0);
    {
        Vec v_bar(d, 0.0);
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < d; ++j) v_bar[j] += v[i][j] / s;
        Vec b9 = matv(to_mat(p.w9), v_bar);
        Vec b2 = to_vec(p.b2), ua = to_vec(p.u_attn);
        Mat w8m = to_mat(p.w8);
        for (int i = 0; i < s; ++i) {
            Vec z = matv(w8m, v[i]);
            double beta = 0.0;
            for (int j = 0; j < d; ++j) beta += ua[j] / (1.0 + std::exp(-(z[j] + b9[j] + b2[j])));
            for (int j = 0; j < d; ++j) item_pref[j] += beta * h_items[i][j];
        }
    }

    // multi-head price preference, last row only
    Vec price_pref;
    {
        int dh = d / cfg.heads;
        for (int head = 0; head < cfg.heads; ++head) {
            Mat qh = lin(hp_items, to_mat(p.wq[head]));
            Mat kh = lin(hp_items, to_mat(p.wk[head]));
            Mat vh = lin(hp_items, to_mat(p.wv[head]));
            Vec scores(s);
            for (int j = 0; j < s; ++j)
                scores[j] = dotv(qh[s - 1], kh[j]) / std::sqrt(static_cast<double>(dh));
            Vec attn = softmaxv(scores);
            for (int c = 0; c < dh; ++c) {
                double acc = 0.0;
                for (int j = 0; j < s; ++j) acc += attn[j] * vh[j][c];
                price_pref.push_back(acc);
            }
        }
    }

    // co-guided refinement
    Vec iv(d), pv(d);
    {
        Vec cat(2 * d);
        for (int j = 0; j < d; ++j) {
            cat[j] = item_pref[j];
            cat[d + j] = price_pref[j];
        }
        Vec gi = matv(to_mat(p.wa), cat), gp = matv(to_mat(p.wb), cat);
        Vec ci = matv(to_mat(p.wc), price_pref), cp = matv(to_mat(p.wd), item_pref);
        for (int j = 0; j < d; ++j) {
            double a = 1.0 / (1.0 + std::exp(-gi[j]));
            double b = 1.0 / (1.0 + std::exp(-gp[j]));
            iv[j] = a * item_pref[j] + (1.0 - a) * std::tanh(ci[j]);
            pv[j] = b * price_pref[j] + (1.0 - b) * std::tanh(cp[j]);
        }
    }

    Vec logits(p.dims.n_score_items);
    for (int i = 0; i < p.dims.n_score_items; ++i)
        logits[i] = dotv(h_id[i], iv) + dotv(h_pri[graphs.item_price_map[i]], pv);
    return softmaxv(logits);
}

}  // namespace cohhgn::testutil
