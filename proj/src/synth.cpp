#include "cohhgn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace cohhgn {

namespace {

std::string tag(const char* prefix, int i) {
    std::ostringstream os;
    os << prefix << "_" << i;
    return os.str();
}

const char* kGenders[] = {"M", "F"};
const char* kRegions[] = {"hokkaido", "tohoku", "kanto", "chubu", "kansai",
                          "chugoku", "shikoku", "kyushu", "okinawa"};

}  // namespace

SynthCorpus generate(const SynthConfig& config) {
    if (config.n_sessions < 1 || config.n_items < 2)
        throw ConfigError("generate: need at least 1 session and 2 items");
    if (config.pattern_strength < 0.0 || config.pattern_strength > 1.0)
        throw ConfigError("generate: pattern_strength must be a probability");
    if (config.mean_session_length <= 2.0)
        throw ConfigError("generate: mean session length must exceed 2");

    std::mt19937_64 rng(config.seed);
    auto uniform01 = [&rng] { return (rng() >> 11) * 0x1.0p-53; };
    auto uniform_int = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };

    SynthCorpus corpus;

    // Planted successor rule: one cycle over a random permutation; with
    // n_patterns > 0 only that many items get a successor.
    std::vector<int> perm(config.n_items);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    corpus.successor.assign(config.n_items, -1);
    int planted = config.n_patterns > 0 ? std::min(config.n_patterns, config.n_items)
                                        : config.n_items;
    for (int k = 0; k < planted; ++k)
        corpus.successor[perm[k]] = perm[(k + 1) % config.n_items];

    // Fixed per-item price, log-uniform over two decades.
    corpus.item_price.resize(config.n_items);
    for (int i = 0; i < config.n_items; ++i)
        corpus.item_price[i] = 100.0 * std::exp(uniform01() * std::log(100.0));

    // Geometric tail on top of the minimum length 2 hits the target mean.
    double p_stop = 1.0 / (config.mean_session_length - 1.0);

    int prev_gender = -1, prev_region = -1;
    for (int s = 0; s < config.n_sessions; ++s) {
        int gender, region;
        do {
            gender = uniform_int(2);
            region = uniform_int(9);
        } while (gender == prev_gender && region == prev_region);
        prev_gender = gender;
        prev_region = region;

        int week = config.week_min + uniform_int(config.week_max - config.week_min + 1);
        int extra = 0;
        double u = uniform01();
        if (u > 0.0) extra = static_cast<int>(std::floor(std::log(u) / std::log(1.0 - p_stop)));
        int length = 2 + extra;

        int item = uniform_int(config.n_items);
        for (int i = 0; i < length; ++i) {
            if (i > 0) {
                bool follow = corpus.successor[item] >= 0 && uniform01() < config.pattern_strength;
                item = follow ? corpus.successor[item] : uniform_int(config.n_items);
            }
            RawRecord rec;
            rec.week = week;
            rec.gender = kGenders[gender];
            rec.region = kRegions[region];
            rec.price = corpus.item_price[item];
            rec.large_category = tag("lrg", item % config.n_large);
            rec.middle_category = tag("mid", item % config.n_middle);
            rec.small_category = tag("item", item);
            rec.row_index = static_cast<long>(corpus.records.size());
            corpus.records.push_back(std::move(rec));
        }
    }
    return corpus;
}

}  // namespace cohhgn
