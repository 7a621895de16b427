// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "kie/doc_model.hpp"
#include "test_support.hpp"

using namespace kie;
using namespace kie::testing;

namespace {

const char* kDocJson = R"({
  "doc_id": "d1",
  "image_size": [1000, 500],
  "role": "query",
  "landmarks": [
    {"id": "hdr", "box": [10, 10, 300, 40], "text": "Invoice"},
    {"id": "tot", "box": [10, 400, 200, 430], "text": "Total"}
  ],
  "fields": [
    {"id": "a", "box": [100, 50, 200, 100], "text": "12.00", "label": "amount"},
    {"id": "b", "box": [400, 50, 600, 80], "text": "2021-01-01", "label": null},
    {"id": "c", "box": [400, 300, 700, 330], "text": "main st"}
  ]
})";

std::string with_replacement(std::string text, const std::string& from, const std::string& to) {
    text.replace(text.find(from), from.size(), to);
    return text;
}

DocumentError::Kind error_kind(const std::string& text) {
    try {
        parse_document(text);
    } catch (const DocumentError& e) {
        return e.kind();
    }
    FAIL("document was accepted");
    return DocumentError::Kind::Io;
}

}  // namespace

TEST_CASE("pixel boxes are normalized by the image size") {
    const Document d = parse_document(kDocJson);
    REQUIRE(d.fields.size() == 3);
    REQUIRE(d.landmarks.size() == 2);
    CHECK(d.fields[0].box.x1 == doctest::Approx(0.1));
    CHECK(d.fields[0].box.y1 == doctest::Approx(0.1));
    CHECK(d.fields[0].box.x2 == doctest::Approx(0.2));
    CHECK(d.fields[0].box.y2 == doctest::Approx(0.2));
    CHECK(d.fields[0].label == std::optional<std::string>("amount"));
    CHECK_FALSE(d.fields[1].label.has_value());
    CHECK_FALSE(d.fields[2].label.has_value());
    CHECK(d.landmarks[1].id == "tot");
}

TEST_CASE("malformed documents are rejected with a kind") {
    CHECK(error_kind("{not json") == DocumentError::Kind::Parse);
    CHECK(error_kind(with_replacement(kDocJson, "[100, 50, 200, 100]", "[300, 50, 200, 100]")) ==
          DocumentError::Kind::Schema);
    CHECK(error_kind(with_replacement(kDocJson, "[1000, 500]", "[0, 500]")) == DocumentError::Kind::Schema);
    CHECK(error_kind(with_replacement(kDocJson, "\"id\": \"b\"", "\"id\": \"a\"")) == DocumentError::Kind::DuplicateId);
    CHECK(error_kind(with_replacement(kDocJson, "\"id\": \"tot\"", "\"id\": \"hdr\"")) ==
          DocumentError::Kind::DuplicateId);
    CHECK(error_kind(with_replacement(kDocJson, "\"box\": [400, 50, 600, 80], ", "")) == DocumentError::Kind::Schema);
    // support documents need every field labeled
    CHECK(error_kind(with_replacement(kDocJson, "\"query\"", "\"support\"")) == DocumentError::Kind::Schema);
}

TEST_CASE("missing file is an io error") {
    try {
        load_document("/nonexistent/doc.json");
        FAIL("no exception");
    } catch (const DocumentError& e) {
        CHECK(e.kind() == DocumentError::Kind::Io);
    }
}

TEST_CASE("load save load round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "kie_doc_roundtrip";
    std::filesystem::create_directories(dir);
    const Document a = parse_document(kDocJson);
    save_document(a, dir / "a.json");
    const Document b = load_document(dir / "a.json");
    CHECK(a == b);
    save_document(b, dir / "b.json");
    CHECK(serialize_document(a) == serialize_document(b));
    std::filesystem::remove_all(dir);
}

TEST_CASE("suffixing multi-region labels") {
    SUBCASE("groups are numbered, singletons kept") {
        const Document s = make_document(Role::Support, {},
                                         {make_field("f0", box_at(0.5, 0.1), "x", "total"),
                                          make_field("f1", box_at(0.5, 0.3), "x", "address"),
                                          make_field("f2", box_at(0.5, 0.4), "x", "address")});
        auto [out, map] = suffix_multiregion_labels(s);
        CHECK(*out.fields[0].label == "total");
        CHECK(*out.fields[1].label == "address#1");
        CHECK(*out.fields[2].label == "address#2");
        CHECK(map.base_of("address#2") == "address");
        CHECK(map.base_of("total") == "total");
    }
    SUBCASE("reading order follows the top edge") {
        const Document s = make_document(Role::Support, {},
                                         {make_field("f0", box_at(0.5, 0.3), "x", "addr"),
                                          make_field("f1", box_at(0.5, 0.1), "x", "addr"),
                                          make_field("f2", box_at(0.5, 0.2), "x", "addr")});
        auto [out, map] = suffix_multiregion_labels(s);
        CHECK(*out.fields[1].label == "addr#1");
        CHECK(*out.fields[2].label == "addr#2");
        CHECK(*out.fields[0].label == "addr#3");
        // restoring recovers the original multiset
        std::vector<std::string> restored;
        for (const auto& f : out.fields) restored.push_back(map.base_of(*f.label));
        CHECK(std::count(restored.begin(), restored.end(), "addr") == 3);
    }
    SUBCASE("unique labels leave the document unchanged") {
        const Document s = make_document(Role::Support, {},
                                         {make_field("f0", box_at(0.2, 0.2), "x", "a"),
                                          make_field("f1", box_at(0.6, 0.2), "x", "b")});
        auto [out, map] = suffix_multiregion_labels(s);
        CHECK(out == s);
        for (const auto& [k, v] : map.entries()) CHECK(k == v);
    }
}

TEST_CASE("label suffix stripping") {
    CHECK(strip_label_suffix("address#2") == "address");
    CHECK(strip_label_suffix("address") == "address");
    CHECK(strip_label_suffix(strip_label_suffix("a#1")) == "a");
    CHECK(strip_label_suffix("a#0") == "a#0");
    CHECK(strip_label_suffix("a#") == "a#");
}

TEST_CASE("landmark alignment repairs and prunes") {
    const Document s = make_document(
        Role::Support,
        {make_landmark("hdr", box_at(0.5, 0.05)), make_landmark("tot", box_at(0.1, 0.9)), make_landmark("mid", box_at(0.1, 0.5))},
        {make_field("f0", box_at(0.5, 0.5), "x", "a")});

    SUBCASE("missing landmark becomes a dummy with the support box") {
        const Document q = make_document(Role::Query, {make_landmark("tot", box_at(0.12, 0.91)), make_landmark("mid", box_at(0.1, 0.52))},
                                         {make_field("q0", box_at(0.5, 0.5))});
        const Document out = align_landmarks(s, q);
        REQUIRE(out.landmarks.size() == 3);
        CHECK(out.landmarks[0].id == "hdr");
        CHECK(out.landmarks[0].is_dummy);
        CHECK(out.landmarks[0].box == s.landmarks[0].box);
        CHECK_FALSE(out.landmarks[1].is_dummy);
        CHECK(out.landmarks[1].box == q.landmarks[0].box);
    }
    SUBCASE("extra landmark is removed and order follows the support") {
        const Document q = make_document(Role::Query,
                                         {make_landmark("noise", box_at(0.7, 0.7)), make_landmark("mid", box_at(0.1, 0.5)),
                                          make_landmark("tot", box_at(0.1, 0.9)), make_landmark("hdr", box_at(0.5, 0.05))},
                                         {make_field("q0", box_at(0.5, 0.5))});
        const Document out = align_landmarks(s, q);
        REQUIRE(out.landmarks.size() == 3);
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(out.landmarks[k].id == s.landmarks[k].id);
            CHECK_FALSE(out.landmarks[k].is_dummy);
        }
        CHECK(out.fields == q.fields);
    }
}
