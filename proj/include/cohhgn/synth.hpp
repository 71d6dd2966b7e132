#pragma once

#include <cstdint>
#include <vector>

#include "cohhgn/data.hpp"

namespace cohhgn {

// Deterministic corpus generator with a planted first-order successor rule.
struct SynthConfig {
    int n_sessions = 1000;
    int n_items = 50;
    int n_large = 5;
    int n_middle = 15;
    int n_patterns = 0;           // 0 = full successor permutation
    double pattern_strength = 0.9;  // probability the next item follows the rule
    double mean_session_length = 2.24;
    int week_min = 1;
    int week_max = 105;
    std::uint64_t seed = 7;
    SaleCalendar calendar;
};

// Each item carries a fixed (price, large, middle) assignment, so hypergraph
// incidence is exactly predictable from the item set alone.
struct SynthCorpus {
    std::vector<RawRecord> records;
    std::vector<int> successor;     // the planted rule, item -> next item
    std::vector<double> item_price;  // fixed price per item
};

SynthCorpus generate(const SynthConfig& config);

}  // namespace cohhgn
