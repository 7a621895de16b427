// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kie {

/// Axis-aligned box in normalized page coordinates, [0,1] on both axes.
struct BBox {
    double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }

    bool operator==(const BBox&) const = default;
};

/// Box as it appears in the source file, in pixels.
using PixelBox = std::array<double, 4>;

struct Landmark {
    std::string id;
    BBox box;
    PixelBox pixel_box{};
    std::string text;
    bool is_dummy = false;

    bool operator==(const Landmark&) const = default;
};

struct Field {
    std::string id;
    BBox box;
    PixelBox pixel_box{};
    std::string text;
    std::optional<std::string> label;

    bool operator==(const Field&) const = default;
};

enum class Role { Support, Query };

struct Document {
    std::string doc_id;
    double width_px = 0.0;
    double height_px = 0.0;
    Role role = Role::Query;
    std::vector<Landmark> landmarks;
    std::vector<Field> fields;

    bool operator==(const Document&) const = default;
};

class DocumentError : public std::runtime_error {
public:
    enum class Kind { Parse, Schema, DuplicateId, Io };

    DocumentError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Maps suffixed labels ("address#2") back to their base label ("address").
class LabelMap {
public:
    void add(std::string suffixed, std::string base);

    /// Base label for a suffixed one. Labels never renamed are returned as-is.
    std::string base_of(std::string_view label) const;

    const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

private:
    std::map<std::string, std::string, std::less<>> entries_;
};

/// Drops a trailing "#k" (k >= 1) suffix if present.
std::string strip_label_suffix(std::string_view label);

Document load_document(const std::filesystem::path& path);
Document parse_document(std::string_view json_text);
std::string serialize_document(const Document& doc);
void save_document(const Document& doc, const std::filesystem::path& path);

/// Checks the structural invariants; throws DocumentError on the first breach.
void validate_document(const Document& doc);

/// Fills normalized boxes from pixel boxes and the image size.
void normalize_boxes(Document& doc);

/// Relabels every group of k >= 2 fields sharing a label as label#1..label#k
/// in reading order (top edge, then left edge). Works on any labeled document;
/// unlabeled fields are left alone.
std::pair<Document, LabelMap> suffix_multiregion_labels(const Document& doc);

/// Returns the query with exactly the support's landmark id sequence. Extra
/// query landmarks are dropped; missing ones become dummies carrying the
/// support's normalized box.
Document align_landmarks(const Document& support, const Document& query);

}  // namespace kie
