// SPDX-License-Identifier: Apache-2.0
#include "kie/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "kie/rng.hpp"

namespace kie {

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(lr0 > 0.0)) throw std::invalid_argument("lr0 must be > 0");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw std::invalid_argument("lr_decay must be in (0, 1]");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
    if (!(ranking_weight >= 0.0)) throw std::invalid_argument("ranking_weight must be >= 0");
    if (!(margin >= 0.0)) throw std::invalid_argument("margin must be >= 0");
    if (solver.exact_threshold < 0) throw std::invalid_argument("exact_threshold must be >= 0");
    if (solver.max_nodes < 1) throw std::invalid_argument("max_nodes must be >= 1");
    if (features == FeatureSet::none()) throw std::invalid_argument("no feature enabled");
}

void TrainConfig::apply_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "batch_size") batch_size = value.get<int>();
            else if (key == "lr0") lr0 = value.get<double>();
            else if (key == "lr_decay") lr_decay = value.get<double>();
            else if (key == "epochs") epochs = value.get<int>();
            else if (key == "lambda") lambda = value.get<double>();
            else if (key == "ranking_weight") ranking_weight = value.get<double>();
            else if (key == "margin") margin = value.get<double>();
            else if (key == "seed") seed = value.get<std::uint64_t>();
            else if (key == "features") features = FeatureSet::parse(value.get<std::string>());
            else if (key == "exact_threshold") solver.exact_threshold = value.get<int>();
            else if (key == "max_nodes") solver.max_nodes = value.get<std::int64_t>();
            else throw std::invalid_argument("unknown config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("bad config value: ") + e.what());
    }
}

std::string TrainConfig::to_json() const {
    nlohmann::ordered_json j;
    j["batch_size"] = batch_size;
    j["lr0"] = lr0;
    j["lr_decay"] = lr_decay;
    j["epochs"] = epochs;
    j["lambda"] = lambda;
    j["ranking_weight"] = ranking_weight;
    j["margin"] = margin;
    j["seed"] = seed;
    j["features"] = features.to_string();
    j["exact_threshold"] = solver.exact_threshold;
    j["max_nodes"] = solver.max_nodes;
    return j.dump(2) + "\n";
}

AdamState AdamState::for_model(const AffinityModel& model) {
    AdamState s;
    s.m = model.zero_gradients();
    s.v = model.zero_gradients();
    return s;
}

void adam_step(AffinityModel& model, const ModelGradients& grads, AdamState& state, double lr) {
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
    };
    for (int s = 0; s < kScorerCount; ++s) {
        auto& p = model.mlp(static_cast<Scorer>(s)).params();
        for (std::size_t l = 0; l < p.weights.size(); ++l) {
            update(p.weights[l], grads[s].weights[l], state.m[s].weights[l], state.v[s].weights[l]);
            update(p.biases[l], grads[s].biases[l], state.m[s].biases[l], state.v[s].biases[l]);
        }
    }
}

HammingLoss hamming_loss(const PartialAssignment& predicted, const PartialAssignment& truth) {
    if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols()) {
        throw std::invalid_argument("hamming_loss: shape mismatch");
    }
    if (!truth.is_feasible()) throw std::invalid_argument("hamming_loss: ground truth is infeasible");
    HammingLoss out;
    const int nq = truth.rows();
    out.grad = Eigen::MatrixXd::Constant(nq, truth.cols(), nq > 0 ? 1.0 / nq : 0.0);
    if (nq == 0) return out;
    int wrong = 0;
    for (int i = 0; i < nq; ++i) {
        if (truth.matched(i)) out.grad(i, truth.col(i)) = -1.0 / nq;
        if (predicted.col(i) == truth.col(i)) continue;
        wrong += int(predicted.matched(i)) + int(truth.matched(i));
    }
    out.loss = static_cast<double>(wrong) / nq;
    return out;
}

BlackboxGrad blackbox_grad(const AffinityMatrix& a, const PartialAssignment& predicted, const Eigen::MatrixXd& dl_dp,
                           double lambda, const SolveFn& solve_fn) {
    if (!(lambda > 0.0)) throw std::invalid_argument("blackbox_grad: lambda must be > 0");
    if (dl_dp.rows() != a.rows() || dl_dp.cols() != a.cols()) {
        throw std::invalid_argument("blackbox_grad: dL/dP shape mismatch");
    }
    AffinityMatrix perturbed = a;
    perturbed.vertex = a.vertex - lambda * dl_dp;
    BlackboxGrad out;
    out.perturbed = solve_fn(perturbed);
    out.vertex = -(out.perturbed.dense() - predicted.dense()) / lambda;
    out.edge = Eigen::MatrixXd::Zero(a.edge.rows(), a.edge.cols());
    if (a.edge.size() == 0) return out;

    const int ns = a.cols();
    std::vector<int> support_index(static_cast<std::size_t>(ns) * ns, -1);
    for (std::size_t f = 0; f < a.support_edges.size(); ++f) {
        const auto& e = a.support_edges[f];
        support_index[static_cast<std::size_t>(e.from) * ns + e.to] = static_cast<int>(f);
    }
    auto credit = [&](const PartialAssignment& p, double sign) {
        for (std::size_t e = 0; e < a.query_edges.size(); ++e) {
            const int ca = p.col(a.query_edges[e].from), cb = p.col(a.query_edges[e].to);
            if (ca < 0 || cb < 0) continue;
            const int f = support_index[static_cast<std::size_t>(ca) * ns + cb];
            if (f >= 0) out.edge(static_cast<Eigen::Index>(e), f) += sign / lambda;
        }
    };
    credit(out.perturbed, -1.0);
    credit(predicted, +1.0);
    return out;
}

PreparedPair prepare_pair(const Document& support, const Document& query, const TextEmbedder& embedder,
                          const std::optional<PartialAssignment>& truth) {
    PreparedPair p;
    auto [suffixed, labels] = suffix_multiregion_labels(support);
    p.support = std::move(suffixed);
    p.labels = std::move(labels);
    p.query = align_landmarks(p.support, query);
    const int nq = static_cast<int>(p.query.fields.size());
    const int ns = static_cast<int>(p.support.fields.size());

    if (truth) {
        if (truth->rows() != nq || truth->cols() != ns) {
            throw std::invalid_argument("ground truth shape does not match the documents");
        }
        if (!truth->is_feasible()) throw std::invalid_argument("ground truth is not a partial assignment");
        p.truth = *truth;
    } else {
        const auto query_suffixed = suffix_multiregion_labels(p.query).first;
        std::map<std::string, int> column_of;
        for (int a = 0; a < ns; ++a) column_of[*p.support.fields[a].label] = a;
        p.truth = PartialAssignment(nq, ns);
        for (int i = 0; i < nq; ++i) {
            const auto& label = query_suffixed.fields[i].label;
            if (!label) continue;
            if (auto it = column_of.find(*label); it != column_of.end()) p.truth.set(i, it->second);
        }
    }
    p.truth_labels.resize(nq);
    for (int i = 0; i < nq; ++i) {
        if (p.truth.matched(i)) p.truth_labels[i] = p.labels.base_of(*p.support.fields[p.truth.col(i)].label);
    }
    p.support_graph = build_field_graph(p.support, embedder);
    p.query_graph = build_field_graph(p.query, embedder);
    return p;
}

int count_correct(const PreparedPair& pair, const std::vector<int>& col_of_row) {
    int correct = 0;
    for (std::size_t i = 0; i < col_of_row.size(); ++i) {
        const int c = col_of_row[i];
        const auto& want = pair.truth_labels[i];
        if (c < 0) {
            correct += want ? 0 : 1;
        } else if (want && pair.labels.base_of(*pair.support.fields[c].label) == *want) {
            ++correct;
        }
    }
    return correct;
}

PairStep accumulate_pair_gradient(const AffinityModel& model, const PreparedPair& pair, const TrainConfig& config,
                                  ModelGradients& grads) {
    PairStep step;
    const auto fwd = model.forward(pair.query_graph, pair.support_graph);
    const SolveFn solve_fn = [&](const AffinityMatrix& a) { return solve(a, config.solver).assignment; };
    const PartialAssignment predicted = solve_fn(fwd.affinity);

    const auto h = hamming_loss(predicted, pair.truth);
    auto bb = blackbox_grad(fwd.affinity, predicted, h.grad, config.lambda, solve_fn);
    step.hamming = h.loss;
    if (config.ranking_weight > 0.0) {
        const auto r = ranking_loss(fwd.affinity.vertex, pair.truth, config.margin);
        step.ranking = r.loss;
        bb.vertex += config.ranking_weight * r.grad;
    }
    model.backward(fwd, bb.vertex, bb.edge, grads);
    step.fields = predicted.rows();
    step.correct = count_correct(pair, predicted.col_of_row());
    return step;
}

EpochMetrics train_epoch(AffinityModel& model, const std::vector<PreparedPair>& pairs, const TrainConfig& config,
                         AdamState& state, int epoch) {
    if (pairs.empty()) throw std::invalid_argument("train_epoch: empty dataset");
    config.validate();
    EpochMetrics m;
    m.epoch = epoch;
    m.lr = config.lr0 * std::pow(config.lr_decay, epoch - 1);

    std::vector<int> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(Rng::mix(config.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(std::span<int>(order));

    std::map<std::string, std::pair<int, int>> tally;  // split -> (correct, fields)
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
        auto grads = model.zero_gradients();
        for (std::size_t k = start; k < end; ++k) {
            const auto& pair = pairs[order[k]];
            const auto step = accumulate_pair_gradient(model, pair, config, grads);
            m.hamming += step.hamming;
            m.ranking += step.ranking;
            for (const std::string& key : {std::string("all"), pair.split}) {
                if (key.empty()) continue;
                tally[key].first += step.correct;
                tally[key].second += step.fields;
            }
        }
        for (auto& g : grads) g *= 1.0 / static_cast<double>(end - start);
        adam_step(model, grads, state, m.lr);
    }
    const double n = static_cast<double>(pairs.size());
    m.hamming /= n;
    m.ranking /= n;
    m.loss = m.hamming + config.ranking_weight * m.ranking;
    for (const auto& [key, cf] : tally) {
        m.split_accuracy[key] = cf.second ? static_cast<double>(cf.first) / cf.second : 0.0;
    }
    m.accuracy = m.split_accuracy["all"];
    return m;
}

void fit(AffinityModel& model, const std::vector<PreparedPair>& pairs, const TrainConfig& config,
         const std::function<void(const EpochMetrics&)>& on_epoch) {
    config.validate();
    model.set_features(config.features);
    auto state = AdamState::for_model(model);
    for (int e = 1; e <= config.epochs; ++e) {
        const auto m = train_epoch(model, pairs, config, state, e);
        if (on_epoch) on_epoch(m);
    }
}

EvalReport evaluate(const AffinityModel& model, const std::vector<PreparedPair>& pairs, const SolverConfig& solver) {
    EvalReport r;
    int exact = 0;
    double time = 0.0;
    for (const auto& pair : pairs) {
        const auto fwd = model.forward(pair.query_graph, pair.support_graph);
        const auto rep = solve(fwd.affinity, solver);
        PairResult pr;
        pr.pair_id = pair.pair_id;
        pr.split = pair.split;
        pr.template_id = pair.template_id;
        pr.assignment = rep.assignment.col_of_row();
        pr.greedy = greedy_row_argmax(fwd.affinity.vertex);
        pr.fields = rep.assignment.rows();
        pr.correct = count_correct(pair, pr.assignment);
        pr.greedy_correct = count_correct(pair, pr.greedy);
        pr.objective = rep.objective;
        pr.exact = rep.exact;
        pr.solve_time_s = rep.wall_time_s;
        exact += rep.exact ? 1 : 0;
        time += rep.wall_time_s;

        for (int i = 0; i < pr.fields; ++i) {
            if (pair.truth_labels[i]) continue;
            ++r.outliers;
            if (pr.assignment[i] < 0) ++r.outliers_rejected;
            else ++r.outliers_mismatched;
        }
        auto add = [&](SplitStats& s) {
            ++s.pairs;
            s.fields += pr.fields;
            s.correct += pr.correct;
            s.greedy_correct += pr.greedy_correct;
        };
        add(r.splits["all"]);
        if (!pair.split.empty()) add(r.splits[pair.split]);
        if (!pair.template_id.empty()) add(r.templates[pair.template_id]);
        r.pairs.push_back(std::move(pr));
    }
    if (!pairs.empty()) {
        r.exact_fraction = static_cast<double>(exact) / static_cast<double>(pairs.size());
        r.mean_solve_time_s = time / static_cast<double>(pairs.size());
    }
    return r;
}

namespace {

/// Known split tags first in a fixed order, then any others, then "all".
std::vector<std::string> split_order(const std::map<std::string, SplitStats>& splits) {
    static const std::vector<std::string> known = {"clean", "drifted", "outliers", "drifted+outliers", "flipped"};
    std::vector<std::string> out;
    for (const auto& k : known) {
        if (splits.count(k)) out.push_back(k);
    }
    for (const auto& [k, _] : splits) {
        if (k != "all" && std::find(known.begin(), known.end(), k) == known.end()) out.push_back(k);
    }
    if (splits.count("all")) out.push_back("all");
    return out;
}

nlohmann::ordered_json stats_json(const SplitStats& s) {
    return {{"pairs", s.pairs},
            {"fields", s.fields},
            {"correct", s.correct},
            {"accuracy", s.accuracy()},
            {"greedy_correct", s.greedy_correct},
            {"greedy_accuracy", s.greedy_accuracy()}};
}

}  // namespace

std::string EvalReport::to_json(bool include_timing) const {
    nlohmann::ordered_json j;
    j["splits"] = nlohmann::ordered_json::object();
    for (const auto& k : split_order(splits)) j["splits"][k] = stats_json(splits.at(k));
    j["templates"] = nlohmann::ordered_json::object();
    for (const auto& [k, s] : templates) j["templates"][k] = stats_json(s);
    j["outliers"] = {{"total", outliers},
                     {"rejected", outliers_rejected},
                     {"mismatched", outliers_mismatched},
                     {"rejection_rate", outlier_rejection()}};
    j["solver"] = {{"exact_fraction", exact_fraction}};
    if (include_timing) j["solver"]["mean_solve_time_s"] = mean_solve_time_s;
    j["pairs"] = nlohmann::ordered_json::array();
    for (const auto& p : pairs) {
        nlohmann::ordered_json pj;
        pj["pair_id"] = p.pair_id;
        pj["split"] = p.split;
        pj["template"] = p.template_id;
        pj["fields"] = p.fields;
        pj["correct"] = p.correct;
        pj["greedy_correct"] = p.greedy_correct;
        pj["objective"] = p.objective;
        pj["exact"] = p.exact;
        pj["assignment"] = p.assignment;
        if (include_timing) pj["solve_time_s"] = p.solve_time_s;
        j["pairs"].push_back(std::move(pj));
    }
    return j.dump(2) + "\n";
}

std::string EvalReport::table() const {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-18s %6s %7s %9s %9s\n", "split", "pairs", "fields", "accuracy", "greedy");
    os << line;
    for (const auto& k : split_order(splits)) {
        const auto& s = splits.at(k);
        std::snprintf(line, sizeof line, "%-18s %6d %7d %8.2f%% %8.2f%%\n", k.c_str(), s.pairs, s.fields,
                      100.0 * s.accuracy(), 100.0 * s.greedy_accuracy());
        os << line;
    }
    std::snprintf(line, sizeof line, "outliers rejected: %d/%d (%.2f%%), mismatched: %d\n", outliers_rejected,
                  outliers, 100.0 * outlier_rejection(), outliers_mismatched);
    os << line;
    return os.str();
}

}  // namespace kie
