// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "kie/rng.hpp"
#include "kie/text_embedder.hpp"

using namespace kie;

TEST_CASE("fnv1a reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("hashed trigram embedding") {
    const auto e = TextEmbedder::hashed(7);
    CHECK(e.embed("").size() == kEmbeddingDim);
    CHECK(e.embed("").isZero());
    CHECK(e.embed("   ").isZero());
    CHECK(e.embed("total") == e.embed("total"));
    CHECK(e.embed_token("total").norm() == doctest::Approx(1.0));
    CHECK(e.embed_token("x").norm() == doctest::Approx(1.0));
    const Eigen::VectorXd avg = (e.embed("a") + e.embed("b")) / 2.0;
    CHECK((e.embed("a b") - avg).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((e.embed(" a\tb\n") - avg).cwiseAbs().maxCoeff() < 1e-15);
    // rebuilt from the same seed gives the same vectors, another seed does not
    CHECK(TextEmbedder::hashed(7).embed("amount 12") == e.embed("amount 12"));
    CHECK(TextEmbedder::hashed(8).embed("amount 12") != e.embed("amount 12"));
}

TEST_CASE("hashed embedding reproduces the trigram construction") {
    // "<ab>" has the trigrams "<ab" and "ab>"; rebuild the vector from a
    // projection drawn the same way.
    const std::uint64_t seed = 3;
    Rng rng(seed);
    Eigen::MatrixXd projection(kTrigramBins, kEmbeddingDim);
    for (int r = 0; r < kTrigramBins; ++r) {
        for (int c = 0; c < kEmbeddingDim; ++c) projection(r, c) = rng.uniform(-1.0, 1.0);
    }
    const auto b1 = fnv1a64("<ab") % kTrigramBins;
    const auto b2 = fnv1a64("ab>") % kTrigramBins;
    Eigen::VectorXd expected = projection.row(static_cast<Eigen::Index>(b1)).transpose() +
                               projection.row(static_cast<Eigen::Index>(b2)).transpose();
    expected.normalize();
    const auto got = TextEmbedder::hashed(seed).embed_token("ab");
    CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("external table lookup") {
    const auto path = std::filesystem::temp_directory_path() / "kie_table.txt";
    {
        std::ofstream out(path);
        out << "2 300\n";
        for (const char* tok : {"total", "date"}) {
            out << tok;
            for (int k = 0; k < kEmbeddingDim; ++k) out << ' ' << (tok[0] == 't' ? 1.0 : 0.5) * (k % 3);
            out << '\n';
        }
    }
    const auto e = TextEmbedder::from_table(path);
    CHECK(e.mode() == TextEmbedder::Mode::ExternalTable);
    CHECK(e.embed("total")(2) == doctest::Approx(2.0));
    CHECK(e.embed("unknown").isZero());
    CHECK(e.embed("total date")(1) == doctest::Approx(0.75));
    CHECK(e.embed("total zzz")(2) == doctest::Approx(1.0));
    std::filesystem::remove(path);

    CHECK_THROWS(TextEmbedder::from_table("/nonexistent/table.txt"));
}
