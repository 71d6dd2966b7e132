#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cohhgn/data.hpp"
#include "cohhgn/graph.hpp"
#include "cohhgn/model.hpp"
#include "cohhgn/trainer.hpp"

namespace cohhgn {

// Sessions as line-delimited JSON, one object per session, keys sorted;
// byte-identical across runs for identical inputs.
void write_sessions(std::ostream& out, const std::vector<PseudoSession>& sessions);
std::vector<PseudoSession> read_sessions(std::istream& in);

void write_vocab(std::ostream& out, const FeatureVocabulary& vocab, const PriceBinner& binner);
std::pair<FeatureVocabulary, PriceBinner> read_vocab(std::istream& in);

// Adjacency text format: incidence pairs for hypergraphs, weighted triples
// for global graphs, plus the item -> modal price bin map.
void write_graphs(std::ostream& out, const GraphSet& graphs);
GraphSet read_graphs(std::istream& in);

// Versioned checkpoint: text header with every shape-determining field,
// then named raw little-endian double blocks. Shape mismatch on load is a
// hard error.
void save_checkpoint(std::ostream& out, const ModelParams& params,
                     const std::vector<int>& item_price_map, std::uint64_t seed);

struct Checkpoint {
    ModelParams params;
    std::vector<int> item_price_map;
    std::uint64_t seed = 0;
};
Checkpoint load_checkpoint(std::istream& in);

void write_metrics_log(std::ostream& out, const std::vector<EpochLog>& log);
std::string report_json(const EvalReport& report);

// Convenience file wrappers; throw DataError on open failure.
void save_file(const std::string& path, const std::function<void(std::ostream&)>& writer);
std::string read_file(const std::string& path);

}  // namespace cohhgn
