// Command line front end: synth -> ingest -> build-graphs -> train ->
// evaluate/recommend, plus a standalone gradcheck. Exit codes: 0 ok,
// 2 config error, 3 data error, 4 numeric failure.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cohhgn/io.hpp"
#include "cohhgn/synth.hpp"
#include "cohhgn/trainer.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

using namespace cohhgn;

std::string join_path(const std::string& dir, const std::string& name) {
    if (dir.empty()) return name;
    return dir.back() == '/' ? dir + name : dir + "/" + name;
}

std::string default_data_dir() {
    const char* env = std::getenv("COHHGN_DATA_DIR");
    return env != nullptr ? env : ".";
}

struct Paths {
    std::string dir;
    std::string train() const { return join_path(dir, "sessions.train.jsonl"); }
    std::string val() const { return join_path(dir, "sessions.val.jsonl"); }
    std::string test() const { return join_path(dir, "sessions.test.jsonl"); }
    std::string vocab() const { return join_path(dir, "vocab.json"); }
    std::string graphs() const { return join_path(dir, "graphs.txt"); }
    std::string checkpoint() const { return join_path(dir, "model.ckpt"); }
    std::string metrics() const { return join_path(dir, "metrics.jsonl"); }
    std::string manifest() const { return join_path(dir, "manifest.json"); }
};

std::vector<PseudoSession> load_sessions(const std::string& path) {
    std::istringstream in(read_file(path));
    auto sessions = read_sessions(in);
    if (sessions.empty()) throw DataError("no sessions in " + path);
    return sessions;
}

std::pair<FeatureVocabulary, PriceBinner> load_vocab(const std::string& path) {
    std::istringstream in(read_file(path));
    return read_vocab(in);
}

ModelDims dims_from_vocab(const FeatureVocabulary& vocab) {
    ModelDims dims;
    for (auto t : kAllFeatureTypes) dims.n_nodes[static_cast<int>(t)] = node_count(vocab, t);
    dims.n_score_items = static_cast<int>(vocab.items.values.size());
    dims.d_sale = vocab.d_sale();
    dims.d_type = vocab.d_type();
    return dims;
}

// ---- subcommand payloads ----

struct SynthArgs {
    std::string out = "corpus.csv";
    SynthConfig cfg;
};

int run_synth(const SynthArgs& a) {
    auto corpus = generate(a.cfg);
    save_file(a.out, [&](std::ostream& out) { write_records(out, corpus.records, ColumnSchema{}); });
    std::cout << "wrote " << corpus.records.size() << " records to " << a.out << "\n";
    return 0;
}

struct IngestArgs {
    std::string in;
    std::string dir = default_data_dir();
    std::string delimiter = ",";
    std::size_t min_freq = 10;
    std::size_t min_len = 2;
    int price_bins = 10;
    int train_week_max = 101;
    double val_fraction = 0.1;
    std::uint64_t seed = 42;
};

int run_ingest(const IngestArgs& a) {
    if (a.delimiter.size() != 1) throw ConfigError("delimiter must be a single character");
    ColumnSchema schema;
    schema.delimiter = a.delimiter[0];
    std::istringstream source(read_file(a.in));
    auto parsed = parse_records(source, schema);
    for (const auto& e : parsed.row_errors)
        std::cerr << "warning: " << a.in << " line " << e.line << ": " << e.message << "\n";
    if (parsed.records.empty()) throw DataError("no parsable records in " + a.in);

    auto sessions = filter_sessions(segment_sessions(parsed.records), a.min_len, a.min_freq);
    if (sessions.empty()) throw DataError("filtering removed every session");
    auto split = split_by_week(sessions, a.train_week_max, a.val_fraction, a.seed);
    auto vocab = build_vocab(split.train, a.price_bins);
    std::vector<double> prices;
    for (const auto& s : split.train)
        for (double p : s.prices) prices.push_back(p);
    auto binner = fit_price_bins(prices, a.price_bins);

    SaleCalendar calendar;
    Paths paths{a.dir};
    auto encode_to = [&](const std::vector<RawSession>& part, const std::string& path) {
        auto encoded = encode_sessions(part, vocab, binner, calendar);
        save_file(path, [&](std::ostream& out) { write_sessions(out, encoded); });
        return encoded.size();
    };
    std::size_t n_train = encode_to(split.train, paths.train());
    std::size_t n_val = split.validation.empty() ? 0 : encode_to(split.validation, paths.val());
    std::size_t n_test = encode_to(split.test, paths.test());
    save_file(paths.vocab(), [&](std::ostream& out) { write_vocab(out, vocab, binner); });
    std::cout << "sessions: train " << n_train << ", val " << n_val << ", test " << n_test
              << "; items " << vocab.items.values.size() << "; artifacts in " << a.dir << "\n";
    return 0;
}

struct GraphArgs {
    std::string dir = default_data_dir();
    int epsilon = 12;
    int max_degree = 12;
};

int run_build_graphs(const GraphArgs& a) {
    Paths paths{a.dir};
    auto [vocab, binner] = load_vocab(paths.vocab());
    (void)binner;
    auto train = load_sessions(paths.train());
    auto graphs = build_graph_set(train, vocab, a.epsilon, a.max_degree);
    save_file(paths.graphs(), [&](std::ostream& out) { write_graphs(out, graphs); });
    std::size_t n_edges = 0;
    for (const auto& [t, g] : graphs.global_graphs)
        for (const auto& adj : g.adjacency) n_edges += adj.size();
    std::cout << "wrote " << graphs.hypergraphs.size() << " hypergraphs and "
              << graphs.global_graphs.size() << " global graphs (" << n_edges / 2
              << " edges) to " << paths.graphs() << "\n";
    return 0;
}

struct TrainArgs {
    std::string dir = default_data_dir();
    ModelConfig model;
    TrainConfig train;
    std::uint64_t init_seed = 7;
};

int run_train(const TrainArgs& a) {
    Paths paths{a.dir};
    auto [vocab, binner] = load_vocab(paths.vocab());
    (void)binner;
    auto train_sessions = load_sessions(paths.train());
    std::vector<PseudoSession> val_sessions;
    if (std::ifstream probe(paths.val()); probe.good()) val_sessions = load_sessions(paths.val());
    std::istringstream gin(read_file(paths.graphs()));
    auto graphs = read_graphs(gin);

    Model model(ModelParams::init(dims_from_vocab(vocab), a.model, a.init_seed));
    model.attach_graphs(graphs);
    auto t0 = std::chrono::steady_clock::now();
    auto result = train(model, train_sessions, val_sessions, a.train);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    save_file(paths.checkpoint(), [&](std::ostream& out) {
        save_checkpoint(out, model.params(), model.item_price_map(), a.train.seed);
    });
    save_file(paths.metrics(), [&](std::ostream& out) { write_metrics_log(out, result.log); });

    nlohmann::json manifest;
    manifest["tool_version"] = kVersion;
    manifest["config"] = {{"d", a.model.d},
                          {"L", a.model.L},
                          {"heads", a.model.heads},
                          {"week_dim", a.model.week_dim},
                          {"dropout", a.model.dropout},
                          {"leaky_slope", a.model.leaky_slope},
                          {"epochs", a.train.epochs},
                          {"batch_size", a.train.batch_size},
                          {"lr", a.train.lr},
                          {"lr_decay_factor", a.train.lr_decay_factor},
                          {"lr_decay_every", a.train.lr_decay_every},
                          {"l2", a.train.l2},
                          {"seed", a.train.seed},
                          {"init_seed", a.init_seed}};
    manifest["artifacts"] = {{"vocab", paths.vocab()},
                             {"graphs", paths.graphs()},
                             {"checkpoint", paths.checkpoint()},
                             {"metrics", paths.metrics()},
                             {"train_sessions", paths.train()}};
    save_file(paths.manifest(), [&](std::ostream& out) { out << manifest.dump(2) << "\n"; });

    std::cout << "trained " << a.train.epochs << " epochs in " << static_cast<long>(secs)
              << "s; best epoch " << result.best_epoch << "; checkpoint " << paths.checkpoint()
              << "\n";
    return 0;
}

struct EvalArgs {
    std::string dir = default_data_dir();
    std::string split = "test";
    std::string out;
};

int run_evaluate(const EvalArgs& a) {
    Paths paths{a.dir};
    std::string session_path;
    if (a.split == "train")
        session_path = paths.train();
    else if (a.split == "val")
        session_path = paths.val();
    else if (a.split == "test")
        session_path = paths.test();
    else
        throw ConfigError("split must be train, val, or test");

    auto sessions = load_sessions(session_path);
    std::istringstream gin(read_file(paths.graphs()));
    auto graphs = read_graphs(gin);
    std::istringstream cin_(read_file(paths.checkpoint()));
    auto ckpt = load_checkpoint(cin_);
    Model model(std::move(ckpt.params));
    model.attach_graphs(graphs);

    auto report = evaluate_model(model, sessions, {10, 20});
    std::cout << report.table("CoHHGN+");
    if (!a.out.empty())
        save_file(a.out, [&](std::ostream& out) { out << report_json(report) << "\n"; });
    return 0;
}

struct RecommendArgs {
    std::string dir = default_data_dir();
    std::vector<std::string> items;
    int k = 10;
    int week = 1;
    std::string gender;
    std::string region;
};

int run_recommend(const RecommendArgs& a) {
    if (a.items.empty()) throw ConfigError("recommend: need at least one --item");
    if (a.k < 1) throw ConfigError("recommend: k must be >= 1");
    Paths paths{a.dir};
    auto [vocab, binner] = load_vocab(paths.vocab());
    (void)binner;
    std::istringstream gin(read_file(paths.graphs()));
    auto graphs = read_graphs(gin);
    std::istringstream cin_(read_file(paths.checkpoint()));
    auto ckpt = load_checkpoint(cin_);
    Model model(std::move(ckpt.params));
    model.attach_graphs(graphs);
    if (a.k > model.params().dims.n_score_items)
        throw ConfigError("recommend: k exceeds the item vocabulary");

    SessionInput in;
    for (const auto& name : a.items) {
        int id = vocab.items.lookup(name);
        if (id == vocab.items.unknown_index())
            std::cerr << "warning: unknown item '" << name << "'\n";
        in.items.push_back(id);
        // price history is reconstructed from each item's modal training bin
        int bin = id < static_cast<int>(graphs.item_price_map.size())
                      ? graphs.item_price_map[id]
                      : graphs.global_modal_price_bin;
        in.prices.push_back(bin);
        in.large_cats.push_back(vocab.large_cats.unknown_index());
        in.middle_cats.push_back(vocab.middle_cats.unknown_index());
    }
    in.week = a.week;
    SaleCalendar calendar;
    in.sale_flags = {calendar.sale1_active(a.week) ? 1 : 0, calendar.sale2_active(a.week) ? 1 : 0};
    in.attr_flags.assign(vocab.d_type(), 0);
    for (std::size_t g = 0; g < vocab.genders.size(); ++g)
        if (vocab.genders[g] == a.gender) in.attr_flags[g] = 1;
    for (std::size_t r = 0; r < vocab.regions.size(); ++r)
        if (vocab.regions[r] == a.region) in.attr_flags[vocab.genders.size() + r] = 1;

    std::mt19937_64 rng(0);
    Tensor y = model.forward_one(in, /*training=*/false, rng);
    std::vector<int> order(y.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int z) {
        return y.data()[x] != y.data()[z] ? y.data()[x] > y.data()[z] : x < z;
    });
    std::cout.precision(6);
    for (int r = 0; r < a.k; ++r)
        std::cout << vocab.items.values[order[r]] << "\t" << std::fixed << y.data()[order[r]]
                  << "\n";
    return 0;
}

struct GradcheckArgs {
    int d = 16;
    int L = 1;
    int heads = 2;
    double tolerance = 1e-4;
};

int run_gradcheck(const GradcheckArgs& a) {
    // fixed toy corpus: 8 items, 4 price bins
    FeatureVocabulary vocab;
    for (int i = 0; i < 8; ++i) vocab.items.add("it" + std::to_string(i));
    for (int i = 0; i < 3; ++i) vocab.large_cats.add("L" + std::to_string(i));
    for (int i = 0; i < 4; ++i) vocab.middle_cats.add("M" + std::to_string(i));
    vocab.genders = {"M"};
    vocab.regions = {"a", "b"};
    vocab.n_price_bins = 4;
    std::vector<PseudoSession> sessions;
    for (auto items : std::vector<std::vector<int>>{
             {0, 1, 2, 3}, {2, 3, 4, 5}, {4, 5, 6, 7}, {6, 7, 0, 1}, {1, 3, 5, 7}}) {
        PseudoSession s;
        s.session_id = static_cast<int>(sessions.size());
        s.items = items;
        for (int v : items) {
            s.prices.push_back(v % 4);
            s.large_cats.push_back(v % 3);
            s.middle_cats.push_back(v % 4);
        }
        s.week = 3 + static_cast<int>(sessions.size());
        s.sale_flags = {1, 0};
        s.attr_flags = {1, 0, 1};
        sessions.push_back(std::move(s));
    }

    ModelConfig cfg;
    cfg.d = a.d;
    cfg.L = a.L;
    cfg.heads = a.heads;
    cfg.week_dim = 4;
    Model model(ModelParams::init(dims_from_vocab(vocab), cfg, 31));
    model.attach_graphs(build_graph_set(sessions, vocab, 12, 12));
    SessionBatch batch = make_batch(sessions, 0, 2);

    std::mt19937_64 rng(0);
    auto loss_value = [&] { return model.batch_loss(batch, false, rng).item(); };

    Tape tape;
    {
        TapeScope scope(tape);
        model.params().zero_grads();
        Tensor loss = model.batch_loss(batch, false, rng);
        tape.backward(loss);
    }
    double worst = 0.0;
    std::string worst_name;
    std::size_t checked = 0;
    const double step = 1e-5;
    auto param_list = model.params().parameters();
    for (auto& [name, p] : param_list) {
        std::vector<double> autodiff = p.grad();
        Tensor t = p;
        for (std::size_t i = 0; i < t.size(); ++i) {
            double orig = t.data()[i];
            t.data()[i] = orig + step;
            double fp = loss_value();
            t.data()[i] = orig - step;
            double fm = loss_value();
            t.data()[i] = orig;
            double numeric = (fp - fm) / (2.0 * step);
            double denom = std::max({std::abs(numeric), std::abs(autodiff[i]), 1e-6});
            double err = std::abs(numeric - autodiff[i]) / denom;
            if (err > worst) {
                worst = err;
                worst_name = name;
            }
            ++checked;
        }
    }
    bool ok = worst < a.tolerance;
    std::cout << (ok ? "PASS" : "FAIL") << " gradcheck: " << checked
              << " entries, worst relative error " << worst << " (" << worst_name
              << "), tolerance " << a.tolerance << "\n";
    return ok ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CoHHGN+ session-based recommendation pipeline"};
    app.set_version_flag("--version", kVersion);
    app.set_config("--config");
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic purchase-log corpus");
    synth_cmd->add_option("--out", synth_args.out, "output csv path");
    synth_cmd->add_option("--sessions", synth_args.cfg.n_sessions, "number of sessions");
    synth_cmd->add_option("--items", synth_args.cfg.n_items, "item vocabulary size");
    synth_cmd->add_option("--large", synth_args.cfg.n_large, "large category count");
    synth_cmd->add_option("--middle", synth_args.cfg.n_middle, "middle category count");
    synth_cmd->add_option("--patterns", synth_args.cfg.n_patterns, "planted rules, 0 = all items");
    synth_cmd->add_option("--strength", synth_args.cfg.pattern_strength,
                          "probability of following the planted rule");
    synth_cmd->add_option("--mean-length", synth_args.cfg.mean_session_length);
    synth_cmd->add_option("--week-min", synth_args.cfg.week_min);
    synth_cmd->add_option("--week-max", synth_args.cfg.week_max);
    synth_cmd->add_option("--seed", synth_args.cfg.seed);

    IngestArgs ingest_args;
    auto* ingest_cmd = app.add_subcommand("ingest", "parse, sessionize, filter, split, encode");
    ingest_cmd->add_option("--in", ingest_args.in, "input csv")->required();
    ingest_cmd->add_option("--dir", ingest_args.dir, "artifact directory");
    ingest_cmd->add_option("--delimiter", ingest_args.delimiter);
    ingest_cmd->add_option("--min-freq", ingest_args.min_freq, "minimum item frequency");
    ingest_cmd->add_option("--min-len", ingest_args.min_len, "minimum session length");
    ingest_cmd->add_option("--price-bins", ingest_args.price_bins);
    ingest_cmd->add_option("--train-week-max", ingest_args.train_week_max);
    ingest_cmd->add_option("--val-fraction", ingest_args.val_fraction);
    ingest_cmd->add_option("--seed", ingest_args.seed);

    GraphArgs graph_args;
    auto* graph_cmd = app.add_subcommand("build-graphs", "build hypergraphs and global graphs");
    graph_cmd->add_option("--dir", graph_args.dir, "artifact directory");
    graph_cmd->add_option("--epsilon", graph_args.epsilon, "co-occurrence window radius");
    graph_cmd->add_option("--max-degree", graph_args.max_degree, "0 disables truncation");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train and checkpoint the model");
    train_cmd->add_option("--dir", train_args.dir, "artifact directory");
    train_cmd->add_option("--d", train_args.model.d, "embedding size");
    train_cmd->add_option("--L", train_args.model.L, "graph iterations");
    train_cmd->add_option("--heads", train_args.model.heads);
    train_cmd->add_option("--week-dim", train_args.model.week_dim);
    train_cmd->add_option("--dropout", train_args.model.dropout);
    train_cmd->add_option("--epochs", train_args.train.epochs);
    train_cmd->add_option("--batch-size", train_args.train.batch_size);
    train_cmd->add_option("--lr", train_args.train.lr);
    train_cmd->add_option("--lr-decay-factor", train_args.train.lr_decay_factor);
    train_cmd->add_option("--lr-decay-every", train_args.train.lr_decay_every);
    train_cmd->add_option("--l2", train_args.train.l2);
    train_cmd->add_option("--seed", train_args.train.seed, "shuffle and dropout seed");
    train_cmd->add_option("--init-seed", train_args.init_seed, "parameter init seed");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "score a split against a checkpoint");
    eval_cmd->add_option("--dir", eval_args.dir, "artifact directory");
    eval_cmd->add_option("--split", eval_args.split, "train, val, or test");
    eval_cmd->add_option("--out", eval_args.out, "also write a json report here");

    RecommendArgs rec_args;
    auto* rec_cmd = app.add_subcommand("recommend", "top-k next items for a partial session");
    rec_cmd->add_option("--dir", rec_args.dir, "artifact directory");
    rec_cmd->add_option("--item", rec_args.items, "session items in order, repeatable")
        ->required();
    rec_cmd->add_option("-k,--k", rec_args.k);
    rec_cmd->add_option("--week", rec_args.week);
    rec_cmd->add_option("--gender", rec_args.gender);
    rec_cmd->add_option("--region", rec_args.region);

    GradcheckArgs grad_args;
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    grad_cmd->add_option("--d", grad_args.d);
    grad_cmd->add_option("--L", grad_args.L);
    grad_cmd->add_option("--heads", grad_args.heads);
    grad_cmd->add_option("--tolerance", grad_args.tolerance);

    try {
        app.parse(argc, argv);
        if (synth_cmd->parsed()) return run_synth(synth_args);
        if (ingest_cmd->parsed()) return run_ingest(ingest_args);
        if (graph_cmd->parsed()) return run_build_graphs(graph_args);
        if (train_cmd->parsed()) return run_train(train_args);
        if (eval_cmd->parsed()) return run_evaluate(eval_args);
        if (rec_cmd->parsed()) return run_recommend(rec_args);
        if (grad_cmd->parsed()) return run_gradcheck(grad_args);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return 3;
    } catch (const DomainError& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return 3;
    } catch (const ShapeError& e) {
        std::cerr << "error: numeric: " << e.what() << "\n";
        return 4;
    } catch (const NumericError& e) {
        std::cerr << "error: numeric: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
