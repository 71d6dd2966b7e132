// Python bindings: a pipeline object covering corpus generation through
// recommendation, plus the small numeric helpers that are useful to call
// directly from tests and notebooks.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <random>
#include <sstream>

#include "cohhgn/io.hpp"
#include "cohhgn/synth.hpp"
#include "cohhgn/trainer.hpp"

namespace py = pybind11;
using namespace cohhgn;

namespace {

py::dict report_to_dict(const EvalReport& r) {
    py::dict d;
    for (const auto& [k, v] : r.precision_at) d[py::str("P@" + std::to_string(k))] = v;
    for (const auto& [k, v] : r.mrr_at) d[py::str("M@" + std::to_string(k))] = v;
    d["sessions"] = r.n_sessions;
    return d;
}

// Owns every artifact of one end-to-end run; mirrors the CLI stages.
class Pipeline {
public:
    void ingest_csv(const std::string& csv_text, std::size_t min_freq, std::size_t min_len,
                    int price_bins, int train_week_max, double val_fraction, std::uint64_t seed) {
        std::istringstream source(csv_text);
        auto parsed = parse_records(source, ColumnSchema{});
        if (parsed.records.empty()) throw DataError("no parsable records");
        auto sessions = filter_sessions(segment_sessions(parsed.records), min_len, min_freq);
        auto split = split_by_week(sessions, train_week_max, val_fraction, seed);
        vocab_ = build_vocab(split.train, price_bins);
        std::vector<double> prices;
        for (const auto& s : split.train)
            for (double p : s.prices) prices.push_back(p);
        binner_ = fit_price_bins(prices, price_bins);
        SaleCalendar calendar;
        train_ = encode_sessions(split.train, vocab_, binner_, calendar);
        val_ = encode_sessions(split.validation, vocab_, binner_, calendar);
        test_ = encode_sessions(split.test, vocab_, binner_, calendar);
    }

    void build_graphs(int epsilon, int max_degree) {
        graphs_ = build_graph_set(train_, vocab_, epsilon, max_degree);
        has_graphs_ = true;
    }

    py::list train(int d, int L, int heads, int week_dim, double dropout, int epochs,
                   int batch_size, double lr, double l2, std::uint64_t seed) {
        if (!has_graphs_) throw ConfigError("build_graphs must run before train");
        ModelConfig mc;
        mc.d = d;
        mc.L = L;
        mc.heads = heads;
        mc.week_dim = week_dim;
        mc.dropout = dropout;
        ModelDims dims;
        for (auto t : kAllFeatureTypes) dims.n_nodes[static_cast<int>(t)] = node_count(vocab_, t);
        dims.n_score_items = static_cast<int>(vocab_.items.values.size());
        dims.d_sale = vocab_.d_sale();
        dims.d_type = vocab_.d_type();
        model_.emplace(ModelParams::init(dims, mc, seed));
        model_->attach_graphs(graphs_);
        TrainConfig tc;
        tc.epochs = epochs;
        tc.batch_size = batch_size;
        tc.lr = lr;
        tc.l2 = l2;
        tc.seed = seed;
        auto result = cohhgn::train(*model_, train_, val_, tc);
        py::list log;
        for (const auto& e : result.log) {
            py::dict row;
            row["epoch"] = e.epoch;
            row["lr"] = e.lr;
            row["train_loss"] = e.train_loss;
            row["validation"] = report_to_dict(e.validation);
            log.append(row);
        }
        return log;
    }

    py::dict evaluate(const std::string& split) {
        auto& sessions = split == "train" ? train_ : split == "val" ? val_ : test_;
        if (split != "train" && split != "val" && split != "test")
            throw ConfigError("split must be train, val, or test");
        return report_to_dict(evaluate_model(require_model(), sessions, {10, 20}));
    }

    std::vector<std::pair<std::string, double>> recommend(const std::vector<std::string>& items,
                                                          int week, int k) {
        Model& model = require_model();
        SessionInput in;
        for (const auto& name : items) {
            int id = vocab_.items.lookup(name);
            in.items.push_back(id);
            in.prices.push_back(id < static_cast<int>(graphs_.item_price_map.size())
                                    ? graphs_.item_price_map[id]
                                    : graphs_.global_modal_price_bin);
            in.large_cats.push_back(vocab_.large_cats.unknown_index());
            in.middle_cats.push_back(vocab_.middle_cats.unknown_index());
        }
        in.week = week;
        SaleCalendar calendar;
        in.sale_flags = {calendar.sale1_active(week) ? 1 : 0, calendar.sale2_active(week) ? 1 : 0};
        in.attr_flags.assign(vocab_.d_type(), 0);
        std::mt19937_64 rng(0);
        Tensor y = model.forward_one(in, false, rng);
        std::vector<int> order(y.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return y.data()[a] != y.data()[b] ? y.data()[a] > y.data()[b] : a < b;
        });
        k = std::min<int>(k, static_cast<int>(order.size()));
        std::vector<std::pair<std::string, double>> top;
        for (int r = 0; r < k; ++r)
            top.emplace_back(vocab_.items.values[order[r]], y.data()[order[r]]);
        return top;
    }

    std::string checkpoint_bytes() const {
        if (!model_) throw ConfigError("no trained model");
        std::ostringstream out;
        save_checkpoint(out, model_->params(), model_->item_price_map(), 0);
        return out.str();
    }

    void load_checkpoint_bytes(const std::string& bytes) {
        if (!has_graphs_) throw ConfigError("build_graphs must run before loading a checkpoint");
        std::istringstream in(bytes);
        auto ckpt = cohhgn::load_checkpoint(in);
        model_.emplace(std::move(ckpt.params));
        model_->attach_graphs(graphs_);
    }

    std::size_t n_train() const { return train_.size(); }
    std::size_t n_val() const { return val_.size(); }
    std::size_t n_test() const { return test_.size(); }
    std::size_t n_items() const { return vocab_.items.values.size(); }

private:
    Model& require_model() {
        if (!model_) throw ConfigError("train or load a checkpoint first");
        return *model_;
    }

    FeatureVocabulary vocab_;
    PriceBinner binner_;
    std::vector<PseudoSession> train_, val_, test_;
    GraphSet graphs_;
    bool has_graphs_ = false;
    std::optional<Model> model_;
};

std::string synth_csv(int n_sessions, int n_items, double strength, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_sessions = n_sessions;
    cfg.n_items = n_items;
    cfg.pattern_strength = strength;
    cfg.seed = seed;
    auto corpus = generate(cfg);
    std::ostringstream out;
    write_records(out, corpus.records, ColumnSchema{});
    return out.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "session-based recommendation engine";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<DataError>(m, "DataError");
    py::register_exception<NumericError>(m, "NumericError");

    m.def("synth_csv", &synth_csv, py::arg("n_sessions") = 1000, py::arg("n_items") = 50,
          py::arg("strength") = 0.9, py::arg("seed") = 7,
          "generate a synthetic purchase-log corpus as csv text");

    m.def("week_encoding", &week_encoding, py::arg("week"), py::arg("c"));
    m.def("item_position_encoding", &item_position_encoding, py::arg("position"), py::arg("d"));
    m.def("rank_of", &rank_of, py::arg("scores"), py::arg("label"));
    m.def("precision_at_k", &precision_at_k, py::arg("scores"), py::arg("label"), py::arg("k"));
    m.def("mrr_at_k", &mrr_at_k, py::arg("scores"), py::arg("label"), py::arg("k"));
    m.def(
        "price_bin_boundaries",
        [](const std::vector<double>& prices, int n_bins) {
            return fit_price_bins(prices, n_bins).boundaries;
        },
        py::arg("prices"), py::arg("n_bins"),
        "log-space cut points of the fitted logistic binner");

    py::class_<Pipeline>(m, "Pipeline")
        .def(py::init<>())
        .def("ingest_csv", &Pipeline::ingest_csv, py::arg("csv_text"), py::arg("min_freq") = 10,
             py::arg("min_len") = 2, py::arg("price_bins") = 10, py::arg("train_week_max") = 101,
             py::arg("val_fraction") = 0.1, py::arg("seed") = 42)
        .def("build_graphs", &Pipeline::build_graphs, py::arg("epsilon") = 12,
             py::arg("max_degree") = 12)
        .def("train", &Pipeline::train, py::arg("d") = 32, py::arg("L") = 1, py::arg("heads") = 2,
             py::arg("week_dim") = 8, py::arg("dropout") = 0.1, py::arg("epochs") = 5,
             py::arg("batch_size") = 100, py::arg("lr") = 0.003, py::arg("l2") = 1e-5,
             py::arg("seed") = 42)
        .def("evaluate", &Pipeline::evaluate, py::arg("split") = "test")
        .def("recommend", &Pipeline::recommend, py::arg("items"), py::arg("week") = 1,
             py::arg("k") = 10)
        .def("checkpoint_bytes",
             [](const Pipeline& p) { return py::bytes(p.checkpoint_bytes()); })
        .def("load_checkpoint_bytes", &Pipeline::load_checkpoint_bytes, py::arg("bytes"))
        .def_property_readonly("n_train", &Pipeline::n_train)
        .def_property_readonly("n_val", &Pipeline::n_val)
        .def_property_readonly("n_test", &Pipeline::n_test)
        .def_property_readonly("n_items", &Pipeline::n_items);
}
