#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "cohhgn/errors.hpp"

namespace cohhgn {

// One purchase-log row. The small category doubles as the item id.
struct RawRecord {
    int week = 0;
    std::string gender;
    std::string region;
    double price = 0.0;
    std::string large_category;
    std::string middle_category;
    std::string small_category;
    long row_index = 0;
};

// A maximal run of consecutive records sharing (gender, region); week
// decreases inside a run also end the session so the session week stays
// well defined.
struct RawSession {
    int session_id = 0;
    int week = 0;
    std::string gender;
    std::string region;
    std::vector<std::string> items;  // small categories
    std::vector<double> prices;
    std::vector<std::string> large_cats;
    std::vector<std::string> middle_cats;

    std::size_t length() const { return items.size(); }
};

// Bidirectional value<->index map with a reserved trailing unknown slot.
struct ValueVocab {
    std::vector<std::string> values;  // first-seen order
    std::unordered_map<std::string, int> index;

    void add(const std::string& v);
    int lookup(const std::string& v) const;  // unknown -> unknown_index()
    int unknown_index() const { return static_cast<int>(values.size()); }
    int size_with_unknown() const { return static_cast<int>(values.size()) + 1; }
};

// Regular sale weeks: sale 1 one week per quarter, sale 2 one week per month.
struct SaleCalendar {
    int sale1_period_weeks = 13;
    int sale2_period_weeks = 4;

    bool sale1_active(int week) const { return (week - 1) % sale1_period_weeks == 0; }
    bool sale2_active(int week) const { return (week - 1) % sale2_period_weeks == 0; }
    static constexpr int kNumSaleTypes = 2;
};

struct FeatureVocabulary {
    ValueVocab items;        // small categories
    ValueVocab large_cats;
    ValueVocab middle_cats;
    std::vector<std::string> genders;  // first-seen order
    std::vector<std::string> regions;
    int n_price_bins = 0;

    int d_sale() const { return SaleCalendar::kNumSaleTypes; }
    int d_type() const { return static_cast<int>(genders.size() + regions.size()); }
};

// Logistic distribution fitted to log-prices; bin boundaries are the
// equal-probability quantiles of the fitted CDF.
struct PriceBinner {
    double mu = 0.0;
    double scale = 0.0;
    int n_bins = 0;
    std::vector<double> boundaries;  // n_bins - 1 ascending cut points in log space

    int bin(double price) const;  // 0-based index, half-open intervals
};

// Fully indexed session ready for the model.
struct PseudoSession {
    int session_id = 0;
    std::vector<int> items;
    std::vector<int> prices;       // bin indices
    std::vector<int> large_cats;
    std::vector<int> middle_cats;
    int week = 0;
    std::string gender;
    std::string region;
    std::vector<int> sale_flags;  // length d_sale, 0/1
    std::vector<int> attr_flags;  // length d_type, 0/1

    std::size_t length() const { return items.size(); }
};

struct DatasetSplit {
    std::vector<RawSession> train;
    std::vector<RawSession> validation;
    std::vector<RawSession> test;
    int train_week_max = 0;
    int test_week_min = 0;
};

struct ColumnSchema {
    char delimiter = ',';
    std::string week = "week";
    std::string gender = "gender";
    std::string region = "region";
    std::string price = "price";
    std::string large_category = "large_category";
    std::string middle_category = "middle_category";
    std::string small_category = "small_category";
};

struct RowError {
    long line = 0;  // 1-based, header is line 1
    std::string message;
};

struct ParseResult {
    std::vector<RawRecord> records;
    std::vector<RowError> row_errors;
};

// Throws DataError when a required column is missing from the header; rows
// that fail type conversion are collected in row_errors, not dropped silently.
ParseResult parse_records(std::istream& source, const ColumnSchema& schema);
void write_records(std::ostream& out, const std::vector<RawRecord>& records,
                   const ColumnSchema& schema);

std::vector<RawSession> segment_sessions(const std::vector<RawRecord>& records);

// Iterates item-frequency and session-length deletion to a fixed point.
std::vector<RawSession> filter_sessions(std::vector<RawSession> sessions, std::size_t min_len,
                                        std::size_t min_freq);

// Method-of-moments logistic fit on log-prices.
PriceBinner fit_price_bins(const std::vector<double>& prices, int n_bins);

DatasetSplit split_by_week(std::vector<RawSession> sessions, int train_week_max,
                           double val_fraction, std::uint64_t seed);

FeatureVocabulary build_vocab(const std::vector<RawSession>& train_sessions, int n_price_bins);

std::vector<PseudoSession> encode_sessions(const std::vector<RawSession>& sessions,
                                           const FeatureVocabulary& vocab,
                                           const PriceBinner& binner,
                                           const SaleCalendar& calendar);

}  // namespace cohhgn
