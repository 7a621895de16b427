// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "kie/affinity.hpp"
#include "kie/graph_builder.hpp"
#include "kie/rng.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace kie;
using namespace kie::testing;

namespace {

const TextEmbedder& embedder() {
    static const TextEmbedder e = TextEmbedder::hashed(1);
    return e;
}

std::pair<FieldGraph, FieldGraph> random_graphs(Rng& rng, int nq, int ns, int n_landmarks) {
    const Document s = random_document(rng, ns, n_landmarks, Role::Support);
    Document q = random_document(rng, nq, 0);
    q.landmarks = s.landmarks;
    return {build_field_graph(q, embedder()), build_field_graph(s, embedder())};
}

Eigen::MatrixXd one_row(const Eigen::MatrixXd& a, Eigen::Index ra, const Eigen::MatrixXd& b, Eigen::Index rb) {
    Eigen::MatrixXd x(1, a.cols() + b.cols());
    x << a.row(ra), b.row(rb);
    return x;
}

}  // namespace

TEST_CASE("mlp shapes and stub") {
    Rng rng(1);
    const Mlp m = Mlp::with_default_hidden(4, rng);
    REQUIRE(m.params().weights.size() == 3);
    CHECK(m.params().weights[0].rows() == 64);
    CHECK(m.params().weights[0].cols() == 4);
    CHECK(m.params().weights[1].rows() == 64);
    CHECK(m.params().weights[2].rows() == 1);
    const double s0 = std::sqrt(6.0 / 68.0);
    CHECK(m.params().weights[0].cwiseAbs().maxCoeff() <= s0);
    CHECK(m.params().biases[0].isZero());
    CHECK(m.params().all_finite());

    const Mlp stub = Mlp::linear(3, 1.0, 0.5);
    Eigen::MatrixXd x(2, 3);
    x << 1, 2, 3, -1, 0, 4;
    const Eigen::VectorXd y = stub.evaluate(x);
    CHECK(y(0) == doctest::Approx(6.5));
    CHECK(y(1) == doctest::Approx(3.5));
    CHECK_THROWS_AS(stub.evaluate(Eigen::MatrixXd::Zero(1, 2)), std::invalid_argument);
}

TEST_CASE("paired forward equals explicit concatenation") {
    Rng rng(2);
    const Mlp m = Mlp::with_default_hidden(5, rng);
    const Eigen::MatrixXd left = random_matrix(rng, 3, 2), right = random_matrix(rng, 4, 3);
    std::vector<int> li = {0, 2, 1, 2}, ri = {3, 0, 0, 1};
    const auto paired = m.forward_paired(left, right, li, ri);
    for (std::size_t r = 0; r < li.size(); ++r) {
        const double direct = m.evaluate(one_row(left, li[r], right, ri[r]))(0);
        CHECK(std::abs(paired.output(static_cast<Eigen::Index>(r)) - direct) < 1e-12);
    }
}

TEST_CASE("spatial affinity with a sum stub") {
    FieldGraph q, s;
    q.n_fields = s.n_fields = 1;
    q.n_landmarks = s.n_landmarks = 1;
    q.vertex_spatial = Eigen::MatrixXd(1, 2);
    q.vertex_spatial << 1, 2;
    s.vertex_spatial = Eigen::MatrixXd(1, 2);
    s.vertex_spatial << 3, 4;
    auto model = AffinityModel::create(FeatureSet::parse("spatial"), 0);
    model.mlp(Scorer::Spatial) = Mlp::linear(4, 1.0, 0.0);
    CHECK(model.spatial_affinity(q, s)(0, 0) == doctest::Approx(10.0));
    CHECK(model.vertex_affinity(q, s)(0, 0) == doctest::Approx(10.0));
}

TEST_CASE("aspect and edge stubs") {
    FieldGraph g;
    g.n_fields = 2;
    g.n_landmarks = 0;
    g.vertex_aspect = Eigen::MatrixXd(2, 2);
    g.vertex_aspect << 0.2, 0.1, 0.3, 0.3;
    g.vertex_spatial.resize(0, 2);
    g.vertex_text = Eigen::MatrixXd::Zero(2, kEmbeddingDim);
    g.edges = {{0, 1}, {1, 0}};
    g.edge_direction = Eigen::MatrixXd::Zero(2, 2);
    g.edge_aspect = Eigen::MatrixXd::Zero(2, 4);

    auto model = AffinityModel::create(FeatureSet::parse("aspect,edge"), 0);
    model.mlp(Scorer::Aspect) = Mlp::linear(4, 1.0, 0.0);
    model.mlp(Scorer::EdgeDirection) = Mlp::linear(4, 0.0, 2.0);
    model.mlp(Scorer::EdgeAspect) = Mlp::linear(8, 0.0, 4.0);
    CHECK(model.aspect_affinity(g, g)(0, 0) == doctest::Approx(0.6));
    const auto e = model.edge_affinity(g, g);
    REQUIRE(e.rows() == 2);
    REQUIRE(e.cols() == 2);
    CHECK(e(1, 0) == doctest::Approx(3.0));

    FieldGraph lonely = g;
    lonely.edges.clear();
    lonely.edge_direction.resize(0, 2);
    lonely.edge_aspect.resize(0, 4);
    CHECK(model.edge_affinity(lonely, g).size() == 0);
    const auto fwd = model.forward(lonely, g);
    CHECK(fwd.affinity.edge.size() == 0);
    CHECK(fwd.affinity.query_edges.empty());
}

TEST_CASE("vectorized affinities match scalar loops") {
    Rng rng(3);
    const auto model = AffinityModel::create(FeatureSet::all(), 4);
    for (int t = 0; t < 5; ++t) {
        const auto [q, s] = random_graphs(rng, rng.range(1, 5), rng.range(2, 5), rng.range(1, 3));
        const int L = q.n_landmarks;
        const auto spatial = model.spatial_affinity(q, s);
        const auto aspect = model.aspect_affinity(q, s);
        const auto text = model.text_affinity(q, s);
        for (int i = 0; i < q.n_fields; ++i) {
            for (int a = 0; a < s.n_fields; ++a) {
                double sum = 0.0;
                for (int k = 0; k < L; ++k) {
                    sum += model.mlp(Scorer::Spatial).evaluate(one_row(q.vertex_spatial, i * L + k, s.vertex_spatial, a * L + k))(0);
                }
                CHECK(std::abs(spatial(i, a) - sum / L) < 1e-12);
                CHECK(std::abs(aspect(i, a) - model.mlp(Scorer::Aspect).evaluate(one_row(q.vertex_aspect, i, s.vertex_aspect, a))(0)) < 1e-12);
                CHECK(std::abs(text(i, a) - model.mlp(Scorer::Text).evaluate(one_row(q.vertex_text, i, s.vertex_text, a))(0)) < 1e-12);
            }
        }
        const auto vertex = model.vertex_affinity(q, s);
        CHECK((vertex - (spatial + aspect + text) / 3.0).cwiseAbs().maxCoeff() < 1e-12);

        const auto edge = model.edge_affinity(q, s);
        for (std::size_t e = 0; e < q.edges.size(); ++e) {
            for (std::size_t f = 0; f < s.edges.size(); ++f) {
                const auto ei = static_cast<Eigen::Index>(e), fi = static_cast<Eigen::Index>(f);
                const double d = model.mlp(Scorer::EdgeDirection).evaluate(one_row(q.edge_direction, ei, s.edge_direction, fi))(0);
                const double asp = model.mlp(Scorer::EdgeAspect).evaluate(one_row(q.edge_aspect, ei, s.edge_aspect, fi))(0);
                CHECK(std::abs(edge(ei, fi) - 0.5 * (d + asp)) < 1e-12);
            }
        }
    }
}

TEST_CASE("enabled features") {
    Rng rng(4);
    const auto [q, s] = random_graphs(rng, 3, 4, 2);
    auto model = AffinityModel::create(FeatureSet::all(), 9);

    SUBCASE("spatial only equals the spatial block") {
        model.set_features(FeatureSet::parse("spatial"));
        CHECK((model.vertex_affinity(q, s) - model.spatial_affinity(q, s)).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("disabled inputs have no influence") {
        model.set_features(FeatureSet::parse("spatial,aspect,edge"));
        FieldGraph q2 = q;
        q2.vertex_text = random_matrix(rng, q2.vertex_text.rows(), q2.vertex_text.cols());
        CHECK(model.vertex_affinity(q, s) == model.vertex_affinity(q2, s));
        model.set_features(FeatureSet::parse("spatial,aspect"));
        q2.edge_direction = random_matrix(rng, q2.edge_direction.rows(), 2);
        CHECK(model.forward(q2, s).affinity.edge.size() == 0);
    }
    SUBCASE("no vertex feature is an error") {
        model.set_features(FeatureSet::parse("edge"));
        CHECK_THROWS_AS(model.vertex_affinity(q, s), std::invalid_argument);
    }
    SUBCASE("landmark mismatch is an error") {
        FieldGraph q3 = q;
        q3.n_landmarks = 1;
        CHECK_THROWS_AS(model.spatial_affinity(q3, s), std::invalid_argument);
    }
    SUBCASE("identical documents give the same matrix in either role") {
        CHECK(model.vertex_affinity(s, s) == model.vertex_affinity(s, s));
        const auto v = model.vertex_affinity(s, s);
        CHECK(v.rows() == v.cols());
    }
    CHECK(FeatureSet::parse("edge,spatial").to_string() == "spatial,edge");
    CHECK_THROWS_AS(FeatureSet::parse("colour"), std::invalid_argument);
}

TEST_CASE("mlp gradients agree with central differences") {
    Rng rng(5);
    for (int t = 0; t < 5; ++t) {
        auto model = AffinityModel::create(FeatureSet::all(), 100 + t);
        const auto [q, s] = random_graphs(rng, 3, 3, 2);
        const auto errors = mlp_gradient_errors(model, q, s, rng, 1e-5);
        for (int sc = 0; sc < kScorerCount; ++sc) {
            CHECK_MESSAGE(errors[sc] < 1e-4, scorer_name(static_cast<Scorer>(sc)));
        }
    }
}

TEST_CASE("ranking loss values") {
    const PartialAssignment identity(2, std::vector<int>{0, 1});
    Eigen::MatrixXd v(2, 2);
    v << 1, 0, 0, 1;
    auto r = ranking_loss(v, identity, 0.5);
    CHECK(r.loss == doctest::Approx(0.0));
    CHECK(r.grad.isZero());
    v << 0.1, 0, 0, 0.1;
    r = ranking_loss(v, identity, 0.5);
    CHECK(r.loss == doctest::Approx(0.8));
    // d/dV_00: two active hinges at -1 each, averaged over two pairs
    CHECK(r.grad(0, 0) == doctest::Approx(-1.0));
    // V_01 competes in row 0 of pair (0,0) and in column 1 of pair (1,1)
    CHECK(r.grad(0, 1) == doctest::Approx(1.0));
    CHECK(r.grad(1, 0) == doctest::Approx(1.0));
    CHECK(r.grad(1, 1) == doctest::Approx(-1.0));

    // outlier rows contribute nothing on their own
    const PartialAssignment none(2, std::vector<int>{kUnmatched, kUnmatched});
    CHECK(ranking_loss(v, none, 0.5).loss == 0.0);
}

TEST_CASE("ranking loss gradient agrees with central differences") {
    Rng rng(6);
    for (int t = 0; t < 20; ++t) CHECK(ranking_gradient_error(rng, t % 3 == 0, 1e-5) < 1e-4);
}

TEST_CASE("checkpoint round trip") {
    Rng rng(7);
    const auto [q, s] = random_graphs(rng, 3, 4, 2);
    Checkpoint ck;
    ck.model = AffinityModel::create(FeatureSet::parse("spatial,aspect,edge"), 3);
    ck.embedder_seed = 11;
    ck.hyperparameters = {{"lambda", 20.0}};
    const auto path = std::filesystem::temp_directory_path() / "kie_ckpt.json";
    save_checkpoint(ck, path);
    const auto back = load_checkpoint(path);
    CHECK(back.model.features() == ck.model.features());
    CHECK(back.embedder_seed == 11);
    CHECK(back.hyperparameters.at("lambda") == 20.0);
    const auto a = ck.model.forward(q, s).affinity;
    const auto b = back.model.forward(q, s).affinity;
    CHECK(a.vertex == b.vertex);
    CHECK(a.edge == b.edge);
    std::filesystem::remove(path);
    CHECK_THROWS(load_checkpoint(path));
}
