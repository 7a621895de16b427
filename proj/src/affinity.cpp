// SPDX-License-Identifier: Apache-2.0
#include "kie/affinity.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace kie {

namespace {

constexpr std::array<int, kScorerCount> kInputDims = {4, 4, 2 * kEmbeddingDim, 4, 8};

struct PairIndex {
    std::vector<int> left, right;
};

/// Rows r = i * n_right + a over all (i, a).
PairIndex all_pairs(int n_left, int n_right) {
    PairIndex p;
    p.left.reserve(static_cast<std::size_t>(n_left) * n_right);
    p.right.reserve(p.left.capacity());
    for (int i = 0; i < n_left; ++i) {
        for (int a = 0; a < n_right; ++a) {
            p.left.push_back(i);
            p.right.push_back(a);
        }
    }
    return p;
}

struct ScoredBlock {
    Eigen::MatrixXd scores;
    std::optional<MlpCache> cache;
};

ScoredBlock score_spatial(const Mlp& mlp, const FieldGraph& q, const FieldGraph& s) {
    if (q.n_landmarks != s.n_landmarks) {
        throw std::invalid_argument("landmark count mismatch: query has " + std::to_string(q.n_landmarks) +
                                    ", support has " + std::to_string(s.n_landmarks));
    }
    const int nq = q.n_fields, ns = s.n_fields, L = q.n_landmarks;
    ScoredBlock out{Eigen::MatrixXd::Zero(nq, ns), std::nullopt};
    if (nq == 0 || ns == 0 || L == 0) return out;

    PairIndex idx;
    const std::size_t n = static_cast<std::size_t>(nq) * ns * L;
    idx.left.reserve(n);
    idx.right.reserve(n);
    for (int i = 0; i < nq; ++i) {
        for (int a = 0; a < ns; ++a) {
            for (int k = 0; k < L; ++k) {
                idx.left.push_back(i * L + k);
                idx.right.push_back(a * L + k);
            }
        }
    }
    out.cache = mlp.forward_paired(q.vertex_spatial, s.vertex_spatial, std::move(idx.left), std::move(idx.right));
    const Eigen::VectorXd& y = out.cache->output;
    for (int i = 0; i < nq; ++i) {
        for (int a = 0; a < ns; ++a) {
            out.scores(i, a) = y.segment((static_cast<Eigen::Index>(i) * ns + a) * L, L).mean();
        }
    }
    return out;
}

ScoredBlock score_vertex_pairs(const Mlp& mlp, const Eigen::MatrixXd& qf, const Eigen::MatrixXd& sf) {
    const auto nq = static_cast<int>(qf.rows()), ns = static_cast<int>(sf.rows());
    ScoredBlock out{Eigen::MatrixXd::Zero(nq, ns), std::nullopt};
    if (nq == 0 || ns == 0) return out;
    auto idx = all_pairs(nq, ns);
    out.cache = mlp.forward_paired(qf, sf, std::move(idx.left), std::move(idx.right));
    for (int i = 0; i < nq; ++i) {
        for (int a = 0; a < ns; ++a) out.scores(i, a) = out.cache->output(static_cast<Eigen::Index>(i) * ns + a);
    }
    return out;
}

struct EdgeBlock {
    Eigen::MatrixXd scores;
    std::optional<MlpCache> direction, aspect;
};

EdgeBlock score_edges(const Mlp& dir_mlp, const Mlp& asp_mlp, const FieldGraph& q, const FieldGraph& s) {
    const auto eq = static_cast<int>(q.edges.size()), es = static_cast<int>(s.edges.size());
    EdgeBlock out;
    if (eq == 0 || es == 0) {
        out.scores.resize(0, 0);
        return out;
    }
    auto idx = all_pairs(eq, es);
    out.direction = dir_mlp.forward_paired(q.edge_direction, s.edge_direction, idx.left, idx.right);
    out.aspect = asp_mlp.forward_paired(q.edge_aspect, s.edge_aspect, std::move(idx.left), std::move(idx.right));
    const Eigen::VectorXd sum = 0.5 * (out.direction->output + out.aspect->output);
    out.scores = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        sum.data(), eq, es);
    return out;
}

nlohmann::json mlp_to_json(const Mlp& mlp) {
    nlohmann::json layers = nlohmann::json::array();
    const auto& p = mlp.params();
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        nlohmann::json w = nlohmann::json::array();
        for (Eigen::Index r = 0; r < p.weights[l].rows(); ++r) {
            std::vector<double> row(p.weights[l].cols());
            for (Eigen::Index c = 0; c < p.weights[l].cols(); ++c) row[c] = p.weights[l](r, c);
            w.push_back(row);
        }
        std::vector<double> b(p.biases[l].data(), p.biases[l].data() + p.biases[l].size());
        layers.push_back({{"weight", w}, {"bias", b}});
    }
    return layers;
}

Mlp mlp_from_json(const nlohmann::json& layers) {
    Mlp m;
    for (const auto& layer : layers) {
        const auto& w = layer.at("weight");
        const auto rows = static_cast<Eigen::Index>(w.size());
        const auto cols = rows == 0 ? 0 : static_cast<Eigen::Index>(w[0].size());
        Eigen::MatrixXd wm(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            if (static_cast<Eigen::Index>(w[r].size()) != cols) throw std::runtime_error("ragged weight matrix");
            for (Eigen::Index c = 0; c < cols; ++c) wm(r, c) = w[r][c].get<double>();
        }
        const auto b = layer.at("bias").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(b.size()) != rows) throw std::runtime_error("bias length mismatch");
        m.params().weights.push_back(std::move(wm));
        m.params().biases.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), rows));
    }
    return m;
}

}  // namespace

const char* scorer_name(Scorer s) {
    switch (s) {
        case Scorer::Spatial: return "spatial";
        case Scorer::Aspect: return "aspect";
        case Scorer::Text: return "text";
        case Scorer::EdgeDirection: return "edge_direction";
        case Scorer::EdgeAspect: return "edge_aspect";
    }
    return "?";
}

FeatureSet FeatureSet::parse(const std::string& csv) {
    FeatureSet f = none();
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        if (item == "spatial") {
            f.spatial = true;
        } else if (item == "aspect") {
            f.aspect = true;
        } else if (item == "text") {
            f.text = true;
        } else if (item == "edge") {
            f.edge = true;
        } else if (item == "all") {
            f = all();
        } else {
            throw std::invalid_argument("unknown feature '" + item + "' (expected spatial, aspect, text, edge)");
        }
    }
    if (f == none()) throw std::invalid_argument("feature list is empty");
    return f;
}

std::string FeatureSet::to_string() const {
    std::string out;
    auto add = [&](bool on, const char* name) {
        if (!on) return;
        if (!out.empty()) out += ',';
        out += name;
    };
    add(spatial, "spatial");
    add(aspect, "aspect");
    add(text, "text");
    add(edge, "edge");
    return out;
}

AffinityModel AffinityModel::create(FeatureSet features, std::uint64_t seed) {
    AffinityModel m;
    m.features_ = features;
    for (int s = 0; s < kScorerCount; ++s) {
        Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(s)));
        m.mlps_[s] = Mlp::with_default_hidden(kInputDims[s], rng);
    }
    return m;
}

Eigen::MatrixXd AffinityModel::spatial_affinity(const FieldGraph& q, const FieldGraph& s) const {
    return score_spatial(mlp(Scorer::Spatial), q, s).scores;
}

Eigen::MatrixXd AffinityModel::aspect_affinity(const FieldGraph& q, const FieldGraph& s) const {
    return score_vertex_pairs(mlp(Scorer::Aspect), q.vertex_aspect, s.vertex_aspect).scores;
}

Eigen::MatrixXd AffinityModel::text_affinity(const FieldGraph& q, const FieldGraph& s) const {
    return score_vertex_pairs(mlp(Scorer::Text), q.vertex_text, s.vertex_text).scores;
}

Eigen::MatrixXd AffinityModel::vertex_affinity(const FieldGraph& q, const FieldGraph& s) const {
    if (features_.n_vertex() == 0) throw std::invalid_argument("no vertex feature enabled");
    return forward(q, s).affinity.vertex;
}

Eigen::MatrixXd AffinityModel::edge_affinity(const FieldGraph& q, const FieldGraph& s) const {
    return score_edges(mlp(Scorer::EdgeDirection), mlp(Scorer::EdgeAspect), q, s).scores;
}

AffinityForward AffinityModel::forward(const FieldGraph& q, const FieldGraph& s) const {
    AffinityForward fwd;
    fwd.computed = true;
    fwd.n_landmarks = q.n_landmarks;
    const int nq = q.n_fields, ns = s.n_fields;
    fwd.affinity.vertex = Eigen::MatrixXd::Zero(nq, ns);
    const int n_vertex = features_.n_vertex();
    fwd.vertex_weight = n_vertex > 0 ? 1.0 / n_vertex : 0.0;

    auto accumulate = [&](Scorer scorer, ScoredBlock block) {
        fwd.affinity.vertex += fwd.vertex_weight * block.scores;
        fwd.caches[static_cast<int>(scorer)] = std::move(block.cache);
    };
    if (features_.spatial) accumulate(Scorer::Spatial, score_spatial(mlp(Scorer::Spatial), q, s));
    if (features_.aspect) {
        accumulate(Scorer::Aspect, score_vertex_pairs(mlp(Scorer::Aspect), q.vertex_aspect, s.vertex_aspect));
    }
    if (features_.text) {
        accumulate(Scorer::Text, score_vertex_pairs(mlp(Scorer::Text), q.vertex_text, s.vertex_text));
    }

    fwd.affinity.edge.resize(0, 0);
    if (features_.edge && !q.edges.empty() && !s.edges.empty()) {
        auto block = score_edges(mlp(Scorer::EdgeDirection), mlp(Scorer::EdgeAspect), q, s);
        fwd.affinity.edge = std::move(block.scores);
        fwd.affinity.query_edges = q.edges;
        fwd.affinity.support_edges = s.edges;
        fwd.caches[static_cast<int>(Scorer::EdgeDirection)] = std::move(block.direction);
        fwd.caches[static_cast<int>(Scorer::EdgeAspect)] = std::move(block.aspect);
    }
    return fwd;
}

void AffinityModel::backward(const AffinityForward& fwd, const Eigen::MatrixXd& d_vertex,
                             const Eigen::MatrixXd& d_edge, ModelGradients& grads) const {
    if (!fwd.valid()) throw std::logic_error("affinity backward called before forward");
    const auto nq = fwd.affinity.vertex.rows(), ns = fwd.affinity.vertex.cols();
    if (d_vertex.rows() != nq || d_vertex.cols() != ns) throw std::invalid_argument("d_vertex shape mismatch");

    if (const auto& c = fwd.caches[static_cast<int>(Scorer::Spatial)]) {
        const int L = fwd.n_landmarks;
        Eigen::VectorXd d_out(c->output.size());
        const double scale = fwd.vertex_weight / L;
        for (Eigen::Index i = 0; i < nq; ++i) {
            for (Eigen::Index a = 0; a < ns; ++a) {
                d_out.segment((i * ns + a) * L, L).setConstant(scale * d_vertex(i, a));
            }
        }
        mlp(Scorer::Spatial).backward(*c, d_out, grads[static_cast<int>(Scorer::Spatial)]);
    }
    for (Scorer scorer : {Scorer::Aspect, Scorer::Text}) {
        const auto& c = fwd.caches[static_cast<int>(scorer)];
        if (!c) continue;
        Eigen::VectorXd d_out(nq * ns);
        for (Eigen::Index i = 0; i < nq; ++i) {
            for (Eigen::Index a = 0; a < ns; ++a) d_out(i * ns + a) = fwd.vertex_weight * d_vertex(i, a);
        }
        mlp(scorer).backward(*c, d_out, grads[static_cast<int>(scorer)]);
    }

    const auto& cd = fwd.caches[static_cast<int>(Scorer::EdgeDirection)];
    const auto& ca = fwd.caches[static_cast<int>(Scorer::EdgeAspect)];
    if (cd && ca && d_edge.size() > 0) {
        const auto& e = fwd.affinity.edge;
        if (d_edge.rows() != e.rows() || d_edge.cols() != e.cols()) throw std::invalid_argument("d_edge shape mismatch");
        Eigen::VectorXd d_out(e.size());
        for (Eigen::Index r = 0; r < e.rows(); ++r) {
            for (Eigen::Index f = 0; f < e.cols(); ++f) d_out(r * e.cols() + f) = 0.5 * d_edge(r, f);
        }
        mlp(Scorer::EdgeDirection).backward(*cd, d_out, grads[static_cast<int>(Scorer::EdgeDirection)]);
        mlp(Scorer::EdgeAspect).backward(*ca, d_out, grads[static_cast<int>(Scorer::EdgeAspect)]);
    }
}

ModelGradients AffinityModel::zero_gradients() const {
    ModelGradients g;
    for (int s = 0; s < kScorerCount; ++s) g[s] = mlps_[s].params().zeros_like();
    return g;
}

RankingLossResult ranking_loss(const Eigen::MatrixXd& vertex, const PartialAssignment& gt, double margin) {
    RankingLossResult out{0.0, Eigen::MatrixXd::Zero(vertex.rows(), vertex.cols())};
    const int pairs = gt.n_matched();
    if (pairs == 0) return out;
    for (int i = 0; i < gt.rows(); ++i) {
        if (!gt.matched(i)) continue;
        const int a = gt.col(i);
        const double v = vertex(i, a);
        for (Eigen::Index b = 0; b < vertex.cols(); ++b) {
            if (b == a) continue;
            const double h = margin - (v - vertex(i, b));
            if (h > 0.0) {
                out.loss += h;
                out.grad(i, a) -= 1.0;
                out.grad(i, b) += 1.0;
            }
        }
        for (Eigen::Index j = 0; j < vertex.rows(); ++j) {
            if (j == i) continue;
            const double h = margin - (v - vertex(j, a));
            if (h > 0.0) {
                out.loss += h;
                out.grad(i, a) -= 1.0;
                out.grad(j, a) += 1.0;
            }
        }
    }
    out.loss /= pairs;
    out.grad /= pairs;
    return out;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["format"] = kCheckpointFormat;
    j["features"] = ckpt.model.features().to_string();
    j["embedder"] = {{"mode", ckpt.embedder_mode}, {"seed", ckpt.embedder_seed}, {"table", ckpt.embedder_table}};
    j["hyperparameters"] = ckpt.hyperparameters;
    j["mlps"] = nlohmann::ordered_json::object();
    for (int s = 0; s < kScorerCount; ++s) {
        j["mlps"][scorer_name(static_cast<Scorer>(s))] = mlp_to_json(ckpt.model.mlp(static_cast<Scorer>(s)));
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out << j.dump() << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("checkpoint " + path.string() + " is not valid JSON: " + e.what());
    }
    if (j.value("format", "") != kCheckpointFormat) {
        throw std::runtime_error("checkpoint " + path.string() + " has unsupported format tag");
    }
    Checkpoint ckpt;
    ckpt.model = AffinityModel::create(FeatureSet::parse(j.at("features").get<std::string>()), 0);
    for (int s = 0; s < kScorerCount; ++s) {
        auto m = mlp_from_json(j.at("mlps").at(scorer_name(static_cast<Scorer>(s))));
        if (m.input_dim() != kInputDims[s]) throw std::runtime_error("checkpoint mlp has wrong input width");
        ckpt.model.mlp(static_cast<Scorer>(s)) = std::move(m);
    }
    const auto& e = j.at("embedder");
    ckpt.embedder_mode = e.at("mode").get<std::string>();
    ckpt.embedder_seed = e.at("seed").get<std::uint64_t>();
    ckpt.embedder_table = e.value("table", "");
    ckpt.hyperparameters = j.value("hyperparameters", std::map<std::string, double>{});
    return ckpt;
}

}  // namespace kie
