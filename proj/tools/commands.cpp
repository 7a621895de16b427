// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "kie/solver.hpp"

namespace kie::cli {

namespace {

using ojson = nlohmann::ordered_json;

/// Config problems the user can fix by changing flags; exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DocumentError(DocumentError::Kind::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DocumentError(DocumentError::Kind::Io, "cannot write " + path);
    out << text;
}

std::map<std::string, double> parse_mix(const std::string& text) {
    std::map<std::string, double> mix;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw UsageError("mix entries look like split=ratio, got '" + item + "'");
        try {
            mix[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
        } catch (const std::exception&) {
            throw UsageError("bad ratio in '" + item + "'");
        }
    }
    return mix;
}

std::vector<int> parse_ints(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw UsageError("bad integer '" + item + "'");
        }
    }
    return out;
}

/// Flags shared by train, eval and label.
struct ModelFlags {
    std::string config_path;
    std::string features;
    double lambda = std::numeric_limits<double>::quiet_NaN();
    double ranking_weight = std::numeric_limits<double>::quiet_NaN();
    double margin = std::numeric_limits<double>::quiet_NaN();
    int exact_threshold = -1;
    std::int64_t max_nodes = -1;
    int epochs = -1;
    std::uint64_t seed = 0;
    bool seed_set = false;

    void attach(CLI::App* app, bool training) {
        app->add_option("--config", config_path, "JSON file mirroring the training config");
        app->add_option("--exact-threshold", exact_threshold, "largest query size solved exactly");
        app->add_option("--max-nodes", max_nodes, "branch and bound node budget");
        if (!training) return;
        app->add_option("--features", features, "csv of spatial,aspect,text,edge");
        app->add_option("--lambda", lambda, "blackbox interpolation strength");
        app->add_option("--ranking-weight", ranking_weight, "weight of the ranking loss");
        app->add_option("--margin", margin, "ranking loss margin");
        app->add_option("--epochs", epochs, "number of epochs");
        app->add_option("--seed", seed, "seed for initialization and shuffling")->each([this](const std::string&) {
            seed_set = true;
        });
    }

    TrainConfig resolve() const {
        TrainConfig c;
        if (!config_path.empty()) c.apply_json(read_text(config_path));
        if (!features.empty()) c.features = FeatureSet::parse(features);
        if (!std::isnan(lambda)) c.lambda = lambda;
        if (!std::isnan(ranking_weight)) c.ranking_weight = ranking_weight;
        if (!std::isnan(margin)) c.margin = margin;
        if (exact_threshold >= 0) c.solver.exact_threshold = exact_threshold;
        if (max_nodes >= 0) c.solver.max_nodes = max_nodes;
        if (epochs >= 0) c.epochs = epochs;
        if (seed_set) c.seed = seed;
        c.validate();
        return c;
    }
};

TextEmbedder embedder_for(const Checkpoint& ckpt) {
    if (ckpt.embedder_mode == "external_table") return TextEmbedder::from_table(ckpt.embedder_table);
    return TextEmbedder::hashed(ckpt.embedder_seed);
}

double percentile95(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto k = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size()))) - 1;
    return v[std::min(k, v.size() - 1)];
}

std::string accuracy_table(const std::string& title, const EvalReport& r) {
    return title + "\n" + r.table();
}

int cmd_synth(const CorpusConfig& config, const std::string& out_dir, std::ostream& out) {
    const auto pairs = generate_corpus(config);
    write_corpus(pairs, config, out_dir);
    std::map<std::string, std::map<std::string, int>> counts;
    for (const auto& p : pairs) ++counts[p.set][p.split];
    out << "wrote " << pairs.size() << " pairs to " << out_dir << "\n";
    for (const auto& [set, by_split] : counts) {
        out << "  " << set << ":";
        for (const auto& [split, n] : by_split) out << " " << split << "=" << n;
        out << "\n";
    }
    return kExitOk;
}

struct TrainFlags {
    std::string corpus;
    std::string out = "model.json";
    std::string log;
    std::string report;
    std::uint64_t embedding_seed = 0;
    std::string embedding_table;
};

int cmd_train(const TrainFlags& f, const TrainConfig& config, std::ostream& out) {
    const TextEmbedder embedder = f.embedding_table.empty() ? TextEmbedder::hashed(f.embedding_seed)
                                                            : TextEmbedder::from_table(f.embedding_table);
    const auto train = prepare_corpus(load_corpus(f.corpus, "train"), embedder);
    const auto test = prepare_corpus(load_corpus(f.corpus, "test"), embedder);
    if (train.empty()) throw UsageError("corpus " + f.corpus + " has no training pairs");
    auto run = train_and_evaluate(train, test, config);

    Checkpoint ckpt;
    ckpt.model = run.model;
    ckpt.embedder_mode = f.embedding_table.empty() ? "hashed_trigram" : "external_table";
    ckpt.embedder_seed = f.embedding_seed;
    ckpt.embedder_table = f.embedding_table;
    ckpt.hyperparameters = {{"batch_size", config.batch_size},   {"lr0", config.lr0},
                            {"lr_decay", config.lr_decay},       {"epochs", config.epochs},
                            {"lambda", config.lambda},           {"ranking_weight", config.ranking_weight},
                            {"margin", config.margin},           {"seed", static_cast<double>(config.seed)},
                            {"exact_threshold", config.solver.exact_threshold}};
    save_checkpoint(ckpt, f.out);
    if (!f.log.empty()) write_text(f.log, run.log);
    if (!f.report.empty()) {
        ojson j;
        j["train"] = ojson::parse(run.train_report.to_json(false));
        j["test"] = ojson::parse(run.test_report.to_json(false));
        write_text(f.report, j.dump(2) + "\n");
    }
    out << accuracy_table("train", run.train_report);
    if (!test.empty()) out << accuracy_table("test", run.test_report);
    out << "checkpoint: " << f.out << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& corpus, const std::string& set,
             const std::string& report_path, bool timing, const SolverConfig& solver, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(model_path);
    const auto pairs = prepare_corpus(load_corpus(corpus, set), embedder_for(ckpt));
    const auto report = evaluate(ckpt.model, pairs, solver);
    if (!report_path.empty()) write_text(report_path, report.to_json(timing));
    out << report.table();
    if (timing) {
        char line[96];
        std::snprintf(line, sizeof line, "exact solves: %.1f%%, mean solve time %.3f ms\n",
                      100.0 * report.exact_fraction, 1e3 * report.mean_solve_time_s);
        out << line;
    }
    return kExitOk;
}

int cmd_label(const std::string& model_path, const std::string& support_path, const std::string& query_path,
              const std::string& out_path, const SolverConfig& solver, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(model_path);
    const Document support = load_document(support_path);
    Document query = load_document(query_path);
    std::set<std::string> support_ids;
    for (const auto& l : support.landmarks) support_ids.insert(l.id);
    const bool shared = std::any_of(query.landmarks.begin(), query.landmarks.end(),
                                    [&](const Landmark& l) { return support_ids.count(l.id) > 0; });
    if (!support.landmarks.empty() && !shared) {
        throw UsageError("landmark alignment impossible: query shares no landmark id with the support");
    }
    for (auto& f : query.fields) f.label.reset();
    const PreparedPair pair = prepare_pair(support, query, embedder_for(ckpt),
                                           PartialAssignment(static_cast<int>(query.fields.size()),
                                                             static_cast<int>(support.fields.size())));
    const auto fwd = ckpt.model.forward(pair.query_graph, pair.support_graph);
    const auto rep = solve(fwd.affinity, solver);

    ojson j;
    j["doc_id"] = query.doc_id;
    j["fields"] = ojson::array();
    for (int i = 0; i < rep.assignment.rows(); ++i) {
        const auto& f = pair.query.fields[i];
        ojson fj;
        fj["id"] = f.id;
        fj["text"] = f.text;
        const int c = rep.assignment.col(i);
        if (c >= 0) {
            fj["label"] = pair.labels.base_of(*pair.support.fields[c].label);
            fj["support_field"] = pair.support.fields[c].id;
        } else {
            fj["label"] = nullptr;
            fj["support_field"] = nullptr;
        }
        j["fields"].push_back(std::move(fj));
    }
    ojson cols = ojson::array();
    for (int c : rep.assignment.col_of_row()) cols.push_back(c >= 0 ? ojson(c) : ojson(nullptr));
    j["assignment"] = std::move(cols);
    j["objective"] = rep.objective;
    j["exact"] = rep.exact;
    const std::string text = j.dump(2) + "\n";
    if (out_path.empty()) out << text;
    else write_text(out_path, text);
    return kExitOk;
}

int cmd_solve_bench(const std::string& sizes, int seeds, std::uint64_t seed, std::int64_t max_nodes, bool timing,
                    const std::string& out_path, std::ostream& out) {
    if (seeds < 1) throw UsageError("--seeds must be >= 1");
    auto ns = parse_ints(sizes);
    if (ns.empty() || std::any_of(ns.begin(), ns.end(), [](int n) { return n < 1; })) {
        throw UsageError("--sizes must list positive integers");
    }
    const auto rows = solve_bench(ns, seeds, seed, max_nodes);
    const std::string table = bench_table(rows, timing);
    out << table;
    if (!out_path.empty()) write_text(out_path, table);
    return kExitOk;
}

}  // namespace

std::vector<PreparedPair> prepare_corpus(const std::vector<CorpusPair>& pairs, const TextEmbedder& embedder) {
    std::vector<PreparedPair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        auto pp = prepare_pair(p.support, p.query, embedder, p.truth);
        pp.pair_id = p.pair_id;
        pp.split = p.split;
        pp.template_id = p.template_id;
        out.push_back(std::move(pp));
    }
    return out;
}

TrainingRun train_and_evaluate(const std::vector<PreparedPair>& train, const std::vector<PreparedPair>& test,
                               const TrainConfig& config) {
    TrainingRun run;
    run.model = AffinityModel::create(config.features, config.seed);
    std::ostringstream log;
    fit(run.model, train, config, [&](const EpochMetrics& m) {
        run.epochs.push_back(m);
        ojson j;
        j["epoch"] = m.epoch;
        j["lr"] = m.lr;
        j["loss"] = m.loss;
        j["hamming"] = m.hamming;
        j["ranking"] = m.ranking;
        j["train_accuracy"] = m.accuracy;
        j["train"] = m.split_accuracy;
        log << j.dump() << "\n";
    });
    run.log = log.str();
    run.train_report = evaluate(run.model, train, config.solver);
    if (!test.empty()) run.test_report = evaluate(run.model, test, config.solver);
    return run;
}

std::vector<BenchRow> solve_bench(const std::vector<int>& sizes, int seeds, std::uint64_t seed, std::int64_t max_nodes) {
    std::vector<BenchRow> rows;
    for (int n : sizes) {
        BenchRow row;
        row.size = n;
        std::vector<double> heuristic_t, exact_t;
        double gap_sum = 0.0;
        for (int k = 0; k < seeds; ++k) {
            const auto inst_seed = Rng::mix(seed, static_cast<std::uint64_t>(n) * 100003 + k);
            const auto a = random_instance(n, n, true, inst_seed);
            const auto h = solve_heuristic(a, inst_seed);
            SolverConfig sc;
            sc.exact_threshold = n;
            sc.max_nodes = max_nodes;
            sc.seed = inst_seed;
            const auto e = solve_exact(a, sc);
            const double ref = std::max(e.objective, h.objective);
            const double gap = ref > 0.0 ? (ref - h.objective) / ref : 0.0;
            gap_sum += gap;
            row.max_gap = std::max(row.max_gap, gap);
            row.certified += e.exact ? 1 : 0;
            heuristic_t.push_back(h.wall_time_s);
            exact_t.push_back(e.wall_time_s);
            ++row.instances;
        }
        row.mean_gap = gap_sum / row.instances;
        row.heuristic_p95_s = percentile95(heuristic_t);
        row.exact_p95_s = percentile95(exact_t);
        rows.push_back(row);
    }
    return rows;
}

std::string bench_table(const std::vector<BenchRow>& rows, bool timing) {
    std::ostringstream os;
    char line[200];
    if (timing) {
        std::snprintf(line, sizeof line, "%5s %9s %10s %10s %9s %14s %14s\n", "size", "instances", "mean_gap",
                      "max_gap", "certified", "heur_p95_ms", "exact_p95_ms");
    } else {
        std::snprintf(line, sizeof line, "%5s %9s %10s %10s %9s\n", "size", "instances", "mean_gap", "max_gap",
                      "certified");
    }
    os << line;
    for (const auto& r : rows) {
        if (timing) {
            std::snprintf(line, sizeof line, "%5d %9d %10.6f %10.6f %9d %14.3f %14.3f\n", r.size, r.instances,
                          r.mean_gap, r.max_gap, r.certified, 1e3 * r.heuristic_p95_s, 1e3 * r.exact_p95_s);
        } else {
            std::snprintf(line, sizeof line, "%5d %9d %10.6f %10.6f %9d\n", r.size, r.instances, r.mean_gap,
                          r.max_gap, r.certified);
        }
        os << line;
    }
    return os.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"One-shot key information extraction by partial graph matching", "kie"};
    app.require_subcommand(1);

    CorpusConfig corpus;
    std::string synth_out = "corpus";
    std::string mix;
    int test_templates = -1;
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    synth->add_option("--templates", corpus.templates, "number of layout styles")->check(CLI::PositiveNumber);
    synth->add_option("--test-templates", test_templates, "styles held out for testing (0 disables the split)");
    synth->add_option("--queries", corpus.queries, "query documents per style");
    synth->add_option("--mix", mix, "split ratios, e.g. clean=0.5,drifted=0.3,outliers=0.2");
    synth->add_option("--seed", corpus.seed, "generator seed");
    synth->add_option("--out", synth_out, "output directory");

    TrainFlags tf;
    ModelFlags train_flags;
    auto* train = app.add_subcommand("train", "train the affinity model on a corpus");
    train->add_option("--corpus", tf.corpus, "corpus directory")->required();
    train->add_option("--out", tf.out, "checkpoint path");
    train->add_option("--log", tf.log, "JSON-lines training log");
    train->add_option("--report", tf.report, "final evaluation report (JSON)");
    train->add_option("--embedding-seed", tf.embedding_seed, "seed of the hashed text embedding");
    train->add_option("--embedding-table", tf.embedding_table, "word2vec text table to use instead");
    train_flags.attach(train, true);

    std::string model_path, support_path, query_path, label_out;
    ModelFlags label_flags;
    auto* label = app.add_subcommand("label", "label a query document against a support document");
    label->add_option("--model", model_path, "checkpoint")->required();
    label->add_option("--support", support_path, "labeled support document")->required();
    label->add_option("--query", query_path, "query document")->required();
    label->add_option("--out", label_out, "write the result here instead of stdout");
    label_flags.attach(label, false);

    std::string eval_model, eval_corpus, eval_set = "test", eval_out;
    bool eval_no_timing = false;
    ModelFlags eval_flags;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
    eval->add_option("--model", eval_model, "checkpoint")->required();
    eval->add_option("--corpus", eval_corpus, "corpus directory")->required();
    eval->add_option("--set", eval_set, "train, test or all");
    eval->add_option("--out", eval_out, "JSON report path");
    eval->add_flag("--no-timing", eval_no_timing, "leave timings out of the report");
    eval_flags.attach(eval, false);

    std::string bench_sizes = "5,10,20,40", bench_out;
    int bench_seeds = 20;
    std::uint64_t bench_seed = 0;
    std::int64_t bench_nodes = 200'000;
    bool bench_no_timing = false;
    auto* bench = app.add_subcommand("solve-bench", "compare the exact and heuristic solvers");
    bench->add_option("--sizes", bench_sizes, "csv of instance sizes");
    bench->add_option("--seeds", bench_seeds, "instances per size");
    bench->add_option("--seed", bench_seed, "base seed");
    bench->add_option("--max-nodes", bench_nodes, "branch and bound node budget for the reference");
    bench->add_flag("--no-timing", bench_no_timing, "omit timing columns");
    bench->add_option("--out", bench_out, "also write the table here");

    std::vector<std::string> argv_tail(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(argv_tail.begin(), argv_tail.end());
    try {
        app.parse(argv_tail);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*synth) {
            if (!mix.empty()) corpus.mix = parse_mix(mix);
            corpus.test_templates = test_templates >= 0 ? test_templates : std::max(1, corpus.templates / 3);
            try {
                corpus.validate();
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            return cmd_synth(corpus, synth_out, out);
        }
        if (*train) return cmd_train(tf, train_flags.resolve(), out);
        if (*label) {
            return cmd_label(model_path, support_path, query_path, label_out, label_flags.resolve().solver, out);
        }
        if (*eval) {
            return cmd_eval(eval_model, eval_corpus, eval_set == "all" ? "" : eval_set, eval_out, !eval_no_timing,
                            eval_flags.resolve().solver, out);
        }
        if (*bench) {
            return cmd_solve_bench(bench_sizes, bench_seeds, bench_seed, bench_nodes, !bench_no_timing, bench_out, out);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DocumentError& e) {
        err << "error: " << e.what() << "\n";
        return e.kind() == DocumentError::Kind::Io ? kExitRuntime : kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace kie::cli
