#include "cohhgn/data.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace cohhgn {

void ValueVocab::add(const std::string& v) {
    if (index.find(v) == index.end()) {
        index.emplace(v, static_cast<int>(values.size()));
        values.push_back(v);
    }
}

int ValueVocab::lookup(const std::string& v) const {
    auto it = index.find(v);
    return it == index.end() ? unknown_index() : it->second;
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == delim) {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

int find_column(const std::vector<std::string>& header, const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
        throw DataError("missing required column '" + name + "' in header");
    return static_cast<int>(it - header.begin());
}

}  // namespace

ParseResult parse_records(std::istream& source, const ColumnSchema& schema) {
    std::string line;
    if (!std::getline(source, line)) throw DataError("empty input: no header row");
    auto header = split_line(line, schema.delimiter);

    const int c_week = find_column(header, schema.week);
    const int c_gender = find_column(header, schema.gender);
    const int c_region = find_column(header, schema.region);
    const int c_price = find_column(header, schema.price);
    const int c_lrg = find_column(header, schema.large_category);
    const int c_mid = find_column(header, schema.middle_category);
    const int c_sml = find_column(header, schema.small_category);
    const int max_col = std::max({c_week, c_gender, c_region, c_price, c_lrg, c_mid, c_sml});

    ParseResult result;
    long line_no = 1;
    long row_index = 0;
    while (std::getline(source, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_line(line, schema.delimiter);
        if (static_cast<int>(fields.size()) <= max_col) {
            result.row_errors.push_back({line_no, "too few fields"});
            continue;
        }
        RawRecord rec;
        rec.row_index = row_index;
        rec.gender = fields[c_gender];
        rec.region = fields[c_region];
        rec.large_category = fields[c_lrg];
        rec.middle_category = fields[c_mid];
        rec.small_category = fields[c_sml];
        try {
            std::size_t pos = 0;
            rec.week = std::stoi(fields[c_week], &pos);
            if (pos != fields[c_week].size()) throw std::invalid_argument("trailing junk");
        } catch (const std::exception&) {
            result.row_errors.push_back({line_no, "unparseable week '" + fields[c_week] + "'"});
            continue;
        }
        try {
            std::size_t pos = 0;
            rec.price = std::stod(fields[c_price], &pos);
            if (pos != fields[c_price].size()) throw std::invalid_argument("trailing junk");
        } catch (const std::exception&) {
            result.row_errors.push_back({line_no, "unparseable price '" + fields[c_price] + "'"});
            continue;
        }
        if (rec.week < 1) {
            result.row_errors.push_back({line_no, "week must be >= 1"});
            continue;
        }
        if (rec.price <= 0.0) {
            result.row_errors.push_back({line_no, "price must be positive"});
            continue;
        }
        if (rec.gender.empty() || rec.region.empty() || rec.large_category.empty() ||
            rec.middle_category.empty() || rec.small_category.empty()) {
            result.row_errors.push_back({line_no, "empty categorical field"});
            continue;
        }
        rec.row_index = row_index++;
        result.records.push_back(std::move(rec));
    }
    return result;
}

void write_records(std::ostream& out, const std::vector<RawRecord>& records,
                   const ColumnSchema& schema) {
    const char d = schema.delimiter;
    out << schema.week << d << schema.gender << d << schema.region << d << schema.price << d
        << schema.large_category << d << schema.middle_category << d << schema.small_category
        << "\n";
    for (const auto& r : records) {
        std::ostringstream price;
        price.precision(17);
        price << r.price;
        out << r.week << d << r.gender << d << r.region << d << price.str() << d
            << r.large_category << d << r.middle_category << d << r.small_category << "\n";
    }
}

std::vector<RawSession> segment_sessions(const std::vector<RawRecord>& records) {
    std::vector<RawSession> sessions;
    int prev_week = 0;
    for (const auto& rec : records) {
        bool start_new = sessions.empty();
        if (!start_new) {
            const auto& cur = sessions.back();
            // weeks inside a session are nondecreasing, so compare against the
            // previous record rather than the session start
            start_new = rec.gender != cur.gender || rec.region != cur.region ||
                        rec.week < prev_week;
        }
        prev_week = rec.week;
        if (start_new) {
            RawSession s;
            s.session_id = static_cast<int>(sessions.size());
            s.week = rec.week;
            s.gender = rec.gender;
            s.region = rec.region;
            sessions.push_back(std::move(s));
        }
        auto& s = sessions.back();
        s.items.push_back(rec.small_category);
        s.prices.push_back(rec.price);
        s.large_cats.push_back(rec.large_category);
        s.middle_cats.push_back(rec.middle_category);
    }
    return sessions;
}

std::vector<RawSession> filter_sessions(std::vector<RawSession> sessions, std::size_t min_len,
                                        std::size_t min_freq) {
    auto total_records = [](const std::vector<RawSession>& ss) {
        std::size_t n = 0;
        for (const auto& s : ss) n += s.length();
        return n;
    };
    for (;;) {
        std::size_t before = total_records(sessions);
        std::unordered_map<std::string, std::size_t> counts;
        for (const auto& s : sessions)
            for (const auto& it : s.items) ++counts[it];

        std::vector<RawSession> next;
        next.reserve(sessions.size());
        for (auto& s : sessions) {
            RawSession kept;
            kept.session_id = s.session_id;
            kept.week = s.week;
            kept.gender = s.gender;
            kept.region = s.region;
            for (std::size_t i = 0; i < s.items.size(); ++i) {
                if (counts[s.items[i]] < min_freq) continue;
                kept.items.push_back(s.items[i]);
                kept.prices.push_back(s.prices[i]);
                kept.large_cats.push_back(s.large_cats[i]);
                kept.middle_cats.push_back(s.middle_cats[i]);
            }
            if (kept.length() >= min_len) next.push_back(std::move(kept));
        }
        sessions = std::move(next);
        if (total_records(sessions) == before) break;  // fixed point
    }
    return sessions;
}

int PriceBinner::bin(double price) const {
    if (price <= 0.0) throw DomainError("bin_price: price must be positive");
    double lp = std::log(price);
    // half-open intervals: boundaries[b-1] <= lp < boundaries[b]
    auto it = std::upper_bound(boundaries.begin(), boundaries.end(), lp);
    return static_cast<int>(it - boundaries.begin());
}

PriceBinner fit_price_bins(const std::vector<double>& prices, int n_bins) {
    if (n_bins < 2) throw ConfigError("fit_price_bins: n_bins must be >= 2");
    if (prices.size() < 2) throw DataError("fit_price_bins: need at least 2 prices");
    std::vector<double> logs;
    logs.reserve(prices.size());
    for (double p : prices) {
        if (p <= 0.0) throw DomainError("fit_price_bins: price must be positive");
        logs.push_back(std::log(p));
    }
    double mean = std::accumulate(logs.begin(), logs.end(), 0.0) / logs.size();
    double var = 0.0;
    for (double x : logs) var += (x - mean) * (x - mean);
    var /= logs.size();
    if (var <= 0.0) throw DataError("fit_price_bins: zero variance in prices, degenerate fit");

    PriceBinner binner;
    binner.mu = mean;
    binner.scale = std::sqrt(var) * std::sqrt(3.0) / M_PI;  // logistic sd = scale*pi/sqrt(3)
    binner.n_bins = n_bins;
    for (int q = 1; q < n_bins; ++q) {
        double p = static_cast<double>(q) / n_bins;
        binner.boundaries.push_back(binner.mu + binner.scale * std::log(p / (1.0 - p)));
    }
    return binner;
}

DatasetSplit split_by_week(std::vector<RawSession> sessions, int train_week_max,
                           double val_fraction, std::uint64_t seed) {
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw ConfigError("split_by_week: val_fraction must be in [0, 1)");
    DatasetSplit split;
    split.train_week_max = train_week_max;
    split.test_week_min = train_week_max + 1;
    std::vector<RawSession> pool;
    for (auto& s : sessions) {
        if (s.week <= train_week_max)
            pool.push_back(std::move(s));
        else
            split.test.push_back(std::move(s));
    }
    if (pool.empty()) throw ConfigError("split_by_week: empty training partition");
    if (split.test.empty()) throw ConfigError("split_by_week: empty test partition");

    std::size_t n_val = static_cast<std::size_t>(val_fraction * pool.size());
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> is_val(pool.size(), false);
    for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (is_val[i])
            split.validation.push_back(std::move(pool[i]));
        else
            split.train.push_back(std::move(pool[i]));
    }
    return split;
}

FeatureVocabulary build_vocab(const std::vector<RawSession>& train_sessions, int n_price_bins) {
    FeatureVocabulary vocab;
    vocab.n_price_bins = n_price_bins;
    for (const auto& s : train_sessions) {
        for (const auto& v : s.items) vocab.items.add(v);
        for (const auto& v : s.large_cats) vocab.large_cats.add(v);
        for (const auto& v : s.middle_cats) vocab.middle_cats.add(v);
        if (std::find(vocab.genders.begin(), vocab.genders.end(), s.gender) == vocab.genders.end())
            vocab.genders.push_back(s.gender);
        if (std::find(vocab.regions.begin(), vocab.regions.end(), s.region) == vocab.regions.end())
            vocab.regions.push_back(s.region);
    }
    return vocab;
}

std::vector<PseudoSession> encode_sessions(const std::vector<RawSession>& sessions,
                                           const FeatureVocabulary& vocab,
                                           const PriceBinner& binner,
                                           const SaleCalendar& calendar) {
    std::vector<PseudoSession> out;
    out.reserve(sessions.size());
    for (const auto& s : sessions) {
        PseudoSession ps;
        ps.session_id = s.session_id;
        ps.week = s.week;
        ps.gender = s.gender;
        ps.region = s.region;
        for (std::size_t i = 0; i < s.items.size(); ++i) {
            ps.items.push_back(vocab.items.lookup(s.items[i]));
            ps.prices.push_back(binner.bin(s.prices[i]));
            ps.large_cats.push_back(vocab.large_cats.lookup(s.large_cats[i]));
            ps.middle_cats.push_back(vocab.middle_cats.lookup(s.middle_cats[i]));
        }
        ps.sale_flags = {calendar.sale1_active(s.week) ? 1 : 0,
                         calendar.sale2_active(s.week) ? 1 : 0};
        ps.attr_flags.assign(vocab.d_type(), 0);
        for (std::size_t g = 0; g < vocab.genders.size(); ++g)
            if (vocab.genders[g] == s.gender) ps.attr_flags[g] = 1;
        for (std::size_t r = 0; r < vocab.regions.size(); ++r)
            if (vocab.regions[r] == s.region) ps.attr_flags[vocab.genders.size() + r] = 1;
        out.push_back(std::move(ps));
    }
    return out;
}

}  // namespace cohhgn
