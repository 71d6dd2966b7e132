#include <doctest.h>

#include <cstdio>
#include <sstream>

#include "cohhgn/io.hpp"
#include "cohhgn/synth.hpp"

using namespace cohhgn;

namespace {

struct Corpus {
    FeatureVocabulary vocab;
    PriceBinner binner;
    std::vector<PseudoSession> sessions;
    GraphSet graphs;

    Corpus() {
        SynthConfig sc;
        sc.n_sessions = 60;
        sc.n_items = 15;
        sc.n_large = 3;
        sc.n_middle = 6;
        auto corpus = generate(sc);
        auto raw = filter_sessions(segment_sessions(corpus.records), 2, 1);
        vocab = build_vocab(raw, 4);
        std::vector<double> prices;
        for (const auto& s : raw)
            for (double p : s.prices) prices.push_back(p);
        binner = fit_price_bins(prices, 4);
        sessions = encode_sessions(raw, vocab, binner, sc.calendar);
        graphs = build_graph_set(sessions, vocab, 12, 12);
    }

    ModelDims dims() const {
        ModelDims d;
        for (auto t : kAllFeatureTypes) d.n_nodes[static_cast<int>(t)] = node_count(vocab, t);
        d.n_score_items = static_cast<int>(vocab.items.values.size());
        d.d_sale = vocab.d_sale();
        d.d_type = vocab.d_type();
        return d;
    }
};

ModelConfig small_cfg(int d = 8) {
    ModelConfig cfg;
    cfg.d = d;
    cfg.L = 1;
    cfg.heads = 2;
    cfg.week_dim = 4;
    return cfg;
}

}  // namespace

TEST_CASE("session jsonl round trips and is byte stable") {
    Corpus c;
    std::ostringstream a, b;
    write_sessions(a, c.sessions);
    write_sessions(b, c.sessions);
    CHECK(a.str() == b.str());

    std::istringstream in(a.str());
    auto back = read_sessions(in);
    REQUIRE(back.size() == c.sessions.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].session_id == c.sessions[i].session_id);
        CHECK(back[i].week == c.sessions[i].week);
        CHECK(back[i].gender == c.sessions[i].gender);
        CHECK(back[i].region == c.sessions[i].region);
        CHECK(back[i].items == c.sessions[i].items);
        CHECK(back[i].prices == c.sessions[i].prices);
        CHECK(back[i].large_cats == c.sessions[i].large_cats);
        CHECK(back[i].middle_cats == c.sessions[i].middle_cats);
        CHECK(back[i].sale_flags == c.sessions[i].sale_flags);
        CHECK(back[i].attr_flags == c.sessions[i].attr_flags);
    }

    std::istringstream junk("not json\n");
    CHECK_THROWS_AS(read_sessions(junk), DataError);
}

TEST_CASE("vocab round trips with the binner") {
    Corpus c;
    std::ostringstream out;
    write_vocab(out, c.vocab, c.binner);
    std::istringstream in(out.str());
    auto [vocab, binner] = read_vocab(in);
    CHECK(vocab.items.values == c.vocab.items.values);
    CHECK(vocab.large_cats.values == c.vocab.large_cats.values);
    CHECK(vocab.middle_cats.values == c.vocab.middle_cats.values);
    CHECK(vocab.genders == c.vocab.genders);
    CHECK(vocab.regions == c.vocab.regions);
    CHECK(vocab.n_price_bins == c.vocab.n_price_bins);
    CHECK(binner.mu == c.binner.mu);
    CHECK(binner.scale == c.binner.scale);
    CHECK(binner.boundaries == c.binner.boundaries);
    CHECK(vocab.items.lookup(c.vocab.items.values[0]) == 0);

    std::istringstream junk("{broken");
    CHECK_THROWS_AS(read_vocab(junk), DataError);
}

TEST_CASE("graph set round trips through the text format") {
    Corpus c;
    std::ostringstream out;
    write_graphs(out, c.graphs);
    std::istringstream in(out.str());
    auto back = read_graphs(in);

    REQUIRE(back.hypergraphs.size() == c.graphs.hypergraphs.size());
    for (const auto& [key, g] : c.graphs.hypergraphs) {
        const auto& h = back.hypergraphs.at(key);
        CHECK(h.n_nodes == g.n_nodes);
        CHECK(h.n_edges == g.n_edges);
        CHECK(h.incidence == g.incidence);
    }
    REQUIRE(back.global_graphs.size() == c.graphs.global_graphs.size());
    for (const auto& [t, g] : c.graphs.global_graphs) {
        const auto& h = back.global_graphs.at(t);
        CHECK(h.n_nodes == g.n_nodes);
        CHECK(h.epsilon == g.epsilon);
        CHECK(h.adjacency == g.adjacency);
    }
    CHECK(back.item_price_map == c.graphs.item_price_map);
    CHECK(back.global_modal_price_bin == c.graphs.global_modal_price_bin);

    std::istringstream junk("wrong header\n");
    CHECK_THROWS_AS(read_graphs(junk), DataError);
    std::istringstream bad("graphs v1\nbogus section\n");
    CHECK_THROWS_AS(read_graphs(bad), DataError);
}

TEST_CASE("checkpoint round trips every parameter bit for bit") {
    Corpus c;
    auto params = ModelParams::init(c.dims(), small_cfg(), 99);
    std::ostringstream out;
    save_checkpoint(out, params, c.graphs.item_price_map, 1234);

    std::istringstream in(out.str());
    auto ckpt = load_checkpoint(in);
    CHECK(ckpt.seed == 1234);
    CHECK(ckpt.item_price_map == c.graphs.item_price_map);
    CHECK(ckpt.params.cfg.d == params.cfg.d);
    CHECK(ckpt.params.cfg.heads == params.cfg.heads);
    CHECK(ckpt.params.dims.n_score_items == params.dims.n_score_items);

    auto orig = params.parameters();
    auto loaded = ckpt.params.parameters();
    REQUIRE(orig.size() == loaded.size());
    for (std::size_t i = 0; i < orig.size(); ++i) {
        CHECK(orig[i].first == loaded[i].first);
        CHECK(orig[i].second.data() == loaded[i].second.data());
    }

    // two saves of the same params are byte identical
    std::ostringstream out2;
    save_checkpoint(out2, params, c.graphs.item_price_map, 1234);
    CHECK(out.str() == out2.str());
}

TEST_CASE("checkpoint shape mismatch is a hard error") {
    Corpus c;
    auto p8 = ModelParams::init(c.dims(), small_cfg(8), 1);
    auto p16 = ModelParams::init(c.dims(), small_cfg(16), 1);
    std::ostringstream s8, s16;
    save_checkpoint(s8, p8, c.graphs.item_price_map, 0);
    save_checkpoint(s16, p16, c.graphs.item_price_map, 0);

    // header claims d=8 but the blocks carry d=16 tensors
    auto second_newline = [](const std::string& s) {
        auto a = s.find('\n');
        return s.find('\n', a + 1) + 1;
    };
    std::string franken = s8.str().substr(0, second_newline(s8.str())) +
                          s16.str().substr(second_newline(s16.str()));
    std::istringstream in(franken);
    CHECK_THROWS_AS(load_checkpoint(in), DataError);

    std::istringstream bad_magic("nope\n");
    CHECK_THROWS_AS(load_checkpoint(bad_magic), DataError);
    std::istringstream truncated("cohhgn-ckpt v1\n");
    CHECK_THROWS_AS(load_checkpoint(truncated), DataError);
}

TEST_CASE("metrics log and report json carry the headline numbers") {
    EpochLog e;
    e.epoch = 2;
    e.lr = 0.001;
    e.train_loss = 1.5;
    e.validation.precision_at[10] = 40.0;
    e.validation.precision_at[20] = 50.0;
    e.validation.mrr_at[10] = 20.0;
    e.validation.mrr_at[20] = 21.0;
    std::ostringstream out;
    write_metrics_log(out, {e});
    auto s = out.str();
    CHECK(s.find("\"epoch\":2") != std::string::npos);
    CHECK(s.find("val_m20") != std::string::npos);
    CHECK(std::count(s.begin(), s.end(), '\n') == 1);

    EvalReport r;
    r.n_sessions = 7;
    r.precision_at[10] = 12.5;
    r.mrr_at[10] = 4.25;
    auto j = report_json(r);
    CHECK(j.find("\"P@10\":12.5") != std::string::npos);
    CHECK(j.find("\"M@10\":4.25") != std::string::npos);
    CHECK(j.find("\"sessions\":7") != std::string::npos);
}

TEST_CASE("file helpers round trip and fail loudly") {
    std::string path = "io_test_tmp.txt";
    save_file(path, [](std::ostream& out) { out << "hello\n"; });
    CHECK(read_file(path) == "hello\n");
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_file("definitely/not/a/file"), DataError);
    CHECK_THROWS_AS(save_file("no_such_dir/x.txt", [](std::ostream&) {}), DataError);
}
