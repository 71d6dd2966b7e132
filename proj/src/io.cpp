#include "cohhgn/io.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

namespace cohhgn {

using nlohmann::json;

void write_sessions(std::ostream& out, const std::vector<PseudoSession>& sessions) {
    for (const auto& s : sessions) {
        json j;
        j["id"] = s.session_id;
        j["week"] = s.week;
        j["gender"] = s.gender;
        j["region"] = s.region;
        j["items"] = s.items;
        j["prices"] = s.prices;
        j["lrg"] = s.large_cats;
        j["mid"] = s.middle_cats;
        j["sale"] = s.sale_flags;
        j["attr"] = s.attr_flags;
        out << j.dump() << "\n";
    }
}

std::vector<PseudoSession> read_sessions(std::istream& in) {
    std::vector<PseudoSession> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("sessions line " + std::to_string(line_no) + ": " + e.what());
        }
        PseudoSession s;
        s.session_id = j.at("id").get<int>();
        s.week = j.at("week").get<int>();
        s.gender = j.at("gender").get<std::string>();
        s.region = j.at("region").get<std::string>();
        s.items = j.at("items").get<std::vector<int>>();
        s.prices = j.at("prices").get<std::vector<int>>();
        s.large_cats = j.at("lrg").get<std::vector<int>>();
        s.middle_cats = j.at("mid").get<std::vector<int>>();
        s.sale_flags = j.at("sale").get<std::vector<int>>();
        s.attr_flags = j.at("attr").get<std::vector<int>>();
        out.push_back(std::move(s));
    }
    return out;
}

void write_vocab(std::ostream& out, const FeatureVocabulary& vocab, const PriceBinner& binner) {
    json j;
    j["items"] = vocab.items.values;
    j["large_cats"] = vocab.large_cats.values;
    j["middle_cats"] = vocab.middle_cats.values;
    j["genders"] = vocab.genders;
    j["regions"] = vocab.regions;
    j["n_price_bins"] = vocab.n_price_bins;
    j["binner"] = {{"mu", binner.mu}, {"scale", binner.scale}, {"n_bins", binner.n_bins},
                   {"boundaries", binner.boundaries}};
    out << j.dump(2) << "\n";
}

std::pair<FeatureVocabulary, PriceBinner> read_vocab(std::istream& in) {
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(std::string("vocab: ") + e.what());
    }
    FeatureVocabulary vocab;
    for (const auto& v : j.at("items")) vocab.items.add(v.get<std::string>());
    for (const auto& v : j.at("large_cats")) vocab.large_cats.add(v.get<std::string>());
    for (const auto& v : j.at("middle_cats")) vocab.middle_cats.add(v.get<std::string>());
    vocab.genders = j.at("genders").get<std::vector<std::string>>();
    vocab.regions = j.at("regions").get<std::vector<std::string>>();
    vocab.n_price_bins = j.at("n_price_bins").get<int>();
    PriceBinner binner;
    binner.mu = j.at("binner").at("mu").get<double>();
    binner.scale = j.at("binner").at("scale").get<double>();
    binner.n_bins = j.at("binner").at("n_bins").get<int>();
    binner.boundaries = j.at("binner").at("boundaries").get<std::vector<double>>();
    return {std::move(vocab), std::move(binner)};
}

void write_graphs(std::ostream& out, const GraphSet& graphs) {
    out << "graphs v1\n";
    for (const auto& [key, g] : graphs.hypergraphs) {
        out << "hypergraph " << feature_type_name(key.first) << " " << feature_type_name(key.second)
            << " " << g.n_nodes << " " << g.n_edges << "\n";
        for (int e = 0; e < g.n_edges; ++e) {
            out << e << ":";
            for (int v : g.incidence[e]) out << " " << v;
            out << "\n";
        }
    }
    for (const auto& [t, g] : graphs.global_graphs) {
        out << "global " << feature_type_name(t) << " " << g.n_nodes << " " << g.epsilon << "\n";
        for (int v = 0; v < g.n_nodes; ++v)
            for (auto [u, w] : g.adjacency[v])
                if (v < u) out << v << " " << u << " " << w << "\n";
        out << "end\n";
    }
    out << "item_price";
    for (int b : graphs.item_price_map) out << " " << b;
    out << "\n";
    out << "modal_price_bin " << graphs.global_modal_price_bin << "\n";
}

GraphSet read_graphs(std::istream& in) {
    GraphSet gs;
    std::string line;
    if (!std::getline(in, line) || line != "graphs v1")
        throw DataError("graphs: bad or missing header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "hypergraph") {
            std::string tn, taun;
            int n_nodes = 0, n_edges = 0;
            ls >> tn >> taun >> n_nodes >> n_edges;
            HeteroHypergraph g;
            g.node_type = feature_type_from_name(tn);
            g.edge_type = feature_type_from_name(taun);
            g.n_nodes = n_nodes;
            g.n_edges = n_edges;
            g.incidence.resize(n_edges);
            for (int e = 0; e < n_edges; ++e) {
                if (!std::getline(in, line)) throw DataError("graphs: truncated hypergraph");
                std::istringstream es(line);
                std::string label;
                es >> label;  // "<e>:"
                int v;
                while (es >> v) g.incidence[e].push_back(v);
            }
            gs.hypergraphs.emplace(std::make_pair(g.node_type, g.edge_type), std::move(g));
        } else if (kind == "global") {
            std::string tn;
            int n_nodes = 0, eps = 0;
            ls >> tn >> n_nodes >> eps;
            GlobalGraph g;
            g.feature_type = feature_type_from_name(tn);
            g.n_nodes = n_nodes;
            g.epsilon = eps;
            g.adjacency.assign(n_nodes, {});
            while (std::getline(in, line) && line != "end") {
                std::istringstream es(line);
                int v, u, w;
                if (!(es >> v >> u >> w)) throw DataError("graphs: bad global edge line");
                g.adjacency[v].emplace_back(u, w);
                g.adjacency[u].emplace_back(v, w);
            }
            for (auto& adj : g.adjacency) std::sort(adj.begin(), adj.end());
            gs.global_graphs.emplace(g.feature_type, std::move(g));
        } else if (kind == "item_price") {
            int b;
            while (ls >> b) gs.item_price_map.push_back(b);
        } else if (kind == "modal_price_bin") {
            ls >> gs.global_modal_price_bin;
        } else {
            throw DataError("graphs: unknown section '" + kind + "'");
        }
    }
    return gs;
}

namespace {

void write_block(std::ostream& out, const std::string& name, const Tensor& t) {
    out << name << " " << t.rank();
    for (int d : t.shape()) out << " " << d;
    out << "\n";
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
    out << "\n";
}

void read_block(std::istream& in, const std::string& expected_name, Tensor& t) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("checkpoint: truncated at " + expected_name);
    std::istringstream ls(line);
    std::string name;
    int rank = 0;
    ls >> name >> rank;
    std::vector<int> shape(rank);
    for (auto& d : shape) ls >> d;
    if (name != expected_name || shape != t.shape())
        throw DataError("checkpoint: block '" + name + "' " + shape_str(shape) +
                        " does not match expected '" + expected_name + "' " +
                        shape_str(t.shape()));
    in.read(reinterpret_cast<char*>(t.data().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw DataError("checkpoint: truncated data in " + expected_name);
    char nl = 0;
    in.get(nl);
    if (nl != '\n') throw DataError("checkpoint: malformed block terminator in " + expected_name);
}

}  // namespace

void save_checkpoint(std::ostream& out, const ModelParams& params,
                     const std::vector<int>& item_price_map, std::uint64_t seed) {
    out << "cohhgn-ckpt v1\n";
    json h;
    h["d"] = params.cfg.d;
    h["L"] = params.cfg.L;
    h["heads"] = params.cfg.heads;
    h["week_dim"] = params.cfg.week_dim;
    h["dropout"] = params.cfg.dropout;
    h["leaky_slope"] = params.cfg.leaky_slope;
    h["n_nodes"] = params.dims.n_nodes;
    h["n_score_items"] = params.dims.n_score_items;
    h["d_sale"] = params.dims.d_sale;
    h["d_type"] = params.dims.d_type;
    h["seed"] = seed;
    h["item_price_map"] = item_price_map;
    out << h.dump() << "\n";
    for (auto& [name, t] : params.parameters()) write_block(out, name, t);
}

Checkpoint load_checkpoint(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "cohhgn-ckpt v1")
        throw DataError("checkpoint: bad or missing magic");
    if (!std::getline(in, line)) throw DataError("checkpoint: missing header");
    json h;
    try {
        h = json::parse(line);
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint header: ") + e.what());
    }
    ModelConfig cfg;
    cfg.d = h.at("d").get<int>();
    cfg.L = h.at("L").get<int>();
    cfg.heads = h.at("heads").get<int>();
    cfg.week_dim = h.at("week_dim").get<int>();
    cfg.dropout = h.at("dropout").get<double>();
    cfg.leaky_slope = h.at("leaky_slope").get<double>();
    ModelDims dims;
    auto nn = h.at("n_nodes").get<std::vector<int>>();
    if (nn.size() != 4) throw DataError("checkpoint: bad n_nodes");
    std::copy(nn.begin(), nn.end(), dims.n_nodes.begin());
    dims.n_score_items = h.at("n_score_items").get<int>();
    dims.d_sale = h.at("d_sale").get<int>();
    dims.d_type = h.at("d_type").get<int>();

    Checkpoint ckpt{ModelParams::init(dims, cfg, 0), {}, 0};
    ckpt.item_price_map = h.at("item_price_map").get<std::vector<int>>();
    ckpt.seed = h.at("seed").get<std::uint64_t>();
    for (auto& [name, t] : ckpt.params.parameters()) {
        Tensor tt = t;
        read_block(in, name, tt);
    }
    return ckpt;
}

void write_metrics_log(std::ostream& out, const std::vector<EpochLog>& log) {
    for (const auto& e : log) {
        json j;
        j["epoch"] = e.epoch;
        j["lr"] = e.lr;
        j["split"] = "train";
        j["loss"] = e.train_loss;
        if (!e.validation.precision_at.empty()) {
            j["val_p10"] = e.validation.precision_at.at(10);
            j["val_p20"] = e.validation.precision_at.at(20);
            j["val_m10"] = e.validation.mrr_at.at(10);
            j["val_m20"] = e.validation.mrr_at.at(20);
        }
        out << j.dump() << "\n";
    }
}

std::string report_json(const EvalReport& report) {
    json j;
    for (auto [k, v] : report.precision_at) j["P@" + std::to_string(k)] = v;
    for (auto [k, v] : report.mrr_at) j["M@" + std::to_string(k)] = v;
    j["sessions"] = report.n_sessions;
    return j.dump();
}

void save_file(const std::string& path, const std::function<void(std::ostream&)>& writer) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    writer(out);
    if (!out) throw DataError("write failed: " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace cohhgn
