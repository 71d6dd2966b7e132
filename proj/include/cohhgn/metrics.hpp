#pragma once

#include <map>
#include <string>
#include <vector>

#include "cohhgn/data.hpp"

namespace cohhgn {

struct EvalReport {
    std::map<int, double> precision_at;  // percent, keyed by k
    std::map<int, double> mrr_at;        // percent
    std::vector<int> ranks;              // 1-based rank of the label per session, 0 = unrankable
    std::size_t n_sessions = 0;

    std::string table(const std::string& row_label) const;
};

// 1-based rank of `label` under descending scores; ties broken by ascending
// item index.
int rank_of(const std::vector<double>& scores, int label);

int precision_at_k(const std::vector<double>& scores, int label, int k);  // 0 or 1
double mrr_at_k(const std::vector<double>& scores, int label, int k);

// Aggregates per-session metrics; scores_fn yields the score vector for a
// session (sessions with labels outside the score range count as misses).
EvalReport evaluate_rankings(const std::vector<std::vector<double>>& all_scores,
                             const std::vector<int>& labels, const std::vector<int>& ks);

EvalReport mean_report(const std::vector<EvalReport>& runs);

// Reference scorers for acceptance comparisons.
struct PopularityBaseline {
    std::vector<double> counts;
    void fit(const std::vector<PseudoSession>& train, int n_items);
    std::vector<double> score(const std::vector<int>& input_items) const;
};

struct MarkovBaseline {
    std::vector<std::vector<double>> transitions;  // [prev][next] counts
    std::vector<double> fallback;                  // popularity
    void fit(const std::vector<PseudoSession>& train, int n_items);
    std::vector<double> score(const std::vector<int>& input_items) const;
};

}  // namespace cohhgn
