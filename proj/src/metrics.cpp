#include "cohhgn/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace cohhgn {

int rank_of(const std::vector<double>& scores, int label) {
    if (label < 0 || label >= static_cast<int>(scores.size())) return 0;
    double ls = scores[label];
    int rank = 1;
    for (int i = 0; i < static_cast<int>(scores.size()); ++i) {
        if (i == label) continue;
        if (scores[i] > ls || (scores[i] == ls && i < label)) ++rank;
    }
    return rank;
}

int precision_at_k(const std::vector<double>& scores, int label, int k) {
    if (k > static_cast<int>(scores.size()))
        throw DomainError("precision_at_k: k exceeds the item count");
    int r = rank_of(scores, label);
    return (r >= 1 && r <= k) ? 1 : 0;
}

double mrr_at_k(const std::vector<double>& scores, int label, int k) {
    if (k > static_cast<int>(scores.size()))
        throw DomainError("mrr_at_k: k exceeds the item count");
    int r = rank_of(scores, label);
    return (r >= 1 && r <= k) ? 1.0 / r : 0.0;
}

EvalReport evaluate_rankings(const std::vector<std::vector<double>>& all_scores,
                             const std::vector<int>& labels, const std::vector<int>& ks) {
    if (all_scores.empty()) throw DataError("evaluate_rankings: empty session set");
    if (all_scores.size() != labels.size())
        throw DataError("evaluate_rankings: scores/labels size mismatch");
    EvalReport report;
    report.n_sessions = all_scores.size();
    std::map<int, double> p_sum, m_sum;
    for (std::size_t i = 0; i < all_scores.size(); ++i) {
        int r = rank_of(all_scores[i], labels[i]);
        report.ranks.push_back(r);
        for (int k : ks) {
            p_sum[k] += (r >= 1 && r <= k) ? 1.0 : 0.0;
            m_sum[k] += (r >= 1 && r <= k) ? 1.0 / r : 0.0;
        }
    }
    for (int k : ks) {
        report.precision_at[k] = 100.0 * p_sum[k] / report.n_sessions;
        report.mrr_at[k] = 100.0 * m_sum[k] / report.n_sessions;
    }
    return report;
}

EvalReport mean_report(const std::vector<EvalReport>& runs) {
    if (runs.empty()) throw DataError("mean_report: no runs");
    EvalReport out;
    out.n_sessions = runs.front().n_sessions;
    for (const auto& r : runs) {
        for (auto [k, v] : r.precision_at) out.precision_at[k] += v / runs.size();
        for (auto [k, v] : r.mrr_at) out.mrr_at[k] += v / runs.size();
    }
    return out;
}

std::string EvalReport::table(const std::string& row_label) const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "Method";
    for (auto [k, v] : precision_at) os << "\tP@" << k;
    for (auto [k, v] : mrr_at) os << "\tM@" << k;
    os << "\n" << row_label;
    for (auto [k, v] : precision_at) os << "\t" << v;
    for (auto [k, v] : mrr_at) os << "\t" << v;
    os << "\n";
    return os.str();
}

void PopularityBaseline::fit(const std::vector<PseudoSession>& train, int n_items) {
    counts.assign(n_items, 0.0);
    for (const auto& s : train)
        for (int v : s.items)
            if (v < n_items) counts[v] += 1.0;
}

std::vector<double> PopularityBaseline::score(const std::vector<int>&) const { return counts; }

void MarkovBaseline::fit(const std::vector<PseudoSession>& train, int n_items) {
    transitions.assign(n_items, std::vector<double>(n_items, 0.0));
    fallback.assign(n_items, 0.0);
    for (const auto& s : train) {
        for (int v : s.items)
            if (v < n_items) fallback[v] += 1.0;
        for (std::size_t i = 0; i + 1 < s.items.size(); ++i) {
            int a = s.items[i], b = s.items[i + 1];
            if (a < n_items && b < n_items) transitions[a][b] += 1.0;
        }
    }
}

std::vector<double> MarkovBaseline::score(const std::vector<int>& input_items) const {
    if (input_items.empty()) return fallback;
    int last = input_items.back();
    if (last < 0 || last >= static_cast<int>(transitions.size())) return fallback;
    const auto& row = transitions[last];
    double total = 0.0;
    for (double c : row) total += c;
    if (total == 0.0) return fallback;
    // tiny popularity term breaks ties among unseen transitions
    std::vector<double> out(row.size());
    double fb_max = *std::max_element(fallback.begin(), fallback.end());
    for (std::size_t i = 0; i < row.size(); ++i)
        out[i] = row[i] + (fb_max > 0.0 ? 1e-6 * fallback[i] / fb_max : 0.0);
    return out;
}

}  // namespace cohhgn
