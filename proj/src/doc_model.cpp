// SPDX-License-Identifier: Apache-2.0
#include "kie/doc_model.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace kie {

using ojson = nlohmann::ordered_json;

namespace {

[[noreturn]] void schema_error(const std::string& msg) {
    throw DocumentError(DocumentError::Kind::Schema, msg);
}

PixelBox read_box(const ojson& j, const std::string& where) {
    if (!j.is_array() || j.size() != 4) schema_error(where + ": box must be an array of 4 numbers");
    PixelBox box{};
    for (std::size_t i = 0; i < 4; ++i) {
        if (!j[i].is_number()) schema_error(where + ": box entries must be numbers");
        box[i] = j[i].get<double>();
    }
    return box;
}

std::string read_string(const ojson& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) schema_error(where + ": missing \"" + key + "\"");
    if (!it->is_string()) schema_error(where + ": \"" + key + "\" must be a string");
    return it->get<std::string>();
}

BBox to_normalized(const PixelBox& p, double w, double h) {
    return BBox{p[0] / w, p[1] / h, p[2] / w, p[3] / h};
}

ojson box_json(const PixelBox& p) { return ojson::array({p[0], p[1], p[2], p[3]}); }

void check_box(const BBox& b, const std::string& where) {
    if (!(b.x1 <= b.x2) || !(b.y1 <= b.y2)) schema_error(where + ": box has x1 > x2 or y1 > y2");
    for (double v : {b.x1, b.y1, b.x2, b.y2}) {
        if (!(v >= 0.0 && v <= 1.0)) schema_error(where + ": box lies outside the image");
    }
}

}  // namespace

void LabelMap::add(std::string suffixed, std::string base) {
    entries_.insert_or_assign(std::move(suffixed), std::move(base));
}

std::string LabelMap::base_of(std::string_view label) const {
    auto it = entries_.find(label);
    if (it != entries_.end()) return it->second;
    return std::string(label);
}

std::string strip_label_suffix(std::string_view label) {
    const auto pos = label.rfind('#');
    if (pos == std::string_view::npos || pos + 1 >= label.size()) return std::string(label);
    const auto digits = label.substr(pos + 1);
    int k = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || k < 1 || digits[0] == '0') {
        return std::string(label);
    }
    return std::string(label.substr(0, pos));
}

void normalize_boxes(Document& doc) {
    for (auto& l : doc.landmarks) l.box = to_normalized(l.pixel_box, doc.width_px, doc.height_px);
    for (auto& f : doc.fields) f.box = to_normalized(f.pixel_box, doc.width_px, doc.height_px);
}

void validate_document(const Document& doc) {
    if (!(doc.width_px > 0.0) || !(doc.height_px > 0.0)) {
        schema_error("document " + doc.doc_id + ": image_size components must be > 0");
    }
    std::set<std::string> seen;
    for (const auto& l : doc.landmarks) {
        const std::string where = "landmark " + l.id;
        check_box(l.box, where);
        if (!seen.insert(l.id).second) {
            throw DocumentError(DocumentError::Kind::DuplicateId, "duplicate landmark id: " + l.id);
        }
    }
    seen.clear();
    for (const auto& f : doc.fields) {
        const std::string where = "field " + f.id;
        check_box(f.box, where);
        if (!seen.insert(f.id).second) {
            throw DocumentError(DocumentError::Kind::DuplicateId, "duplicate field id: " + f.id);
        }
        if (doc.role == Role::Support && !f.label) {
            schema_error(where + ": every support field needs a label");
        }
    }
}

Document parse_document(std::string_view json_text) {
    ojson j;
    try {
        j = ojson::parse(json_text);
    } catch (const ojson::parse_error& e) {
        throw DocumentError(DocumentError::Kind::Parse, e.what());
    }
    if (!j.is_object()) schema_error("document must be a JSON object");

    Document doc;
    doc.doc_id = read_string(j, "doc_id", "document");

    auto size = j.find("image_size");
    if (size == j.end() || !size->is_array() || size->size() != 2 || !(*size)[0].is_number() ||
        !(*size)[1].is_number()) {
        schema_error("document " + doc.doc_id + ": image_size must be [w, h]");
    }
    doc.width_px = (*size)[0].get<double>();
    doc.height_px = (*size)[1].get<double>();

    const std::string role = read_string(j, "role", "document " + doc.doc_id);
    if (role == "support") {
        doc.role = Role::Support;
    } else if (role == "query") {
        doc.role = Role::Query;
    } else {
        schema_error("document " + doc.doc_id + ": role must be \"support\" or \"query\"");
    }

    auto lms = j.find("landmarks");
    if (lms == j.end() || !lms->is_array()) schema_error("document " + doc.doc_id + ": landmarks must be an array");
    for (const auto& lj : *lms) {
        if (!lj.is_object()) schema_error("landmark entries must be objects");
        Landmark l;
        l.id = read_string(lj, "id", "landmark");
        if (!lj.contains("box")) schema_error("landmark " + l.id + ": missing \"box\"");
        l.pixel_box = read_box(lj["box"], "landmark " + l.id);
        l.text = read_string(lj, "text", "landmark " + l.id);
        if (auto d = lj.find("dummy"); d != lj.end() && d->is_boolean()) l.is_dummy = d->get<bool>();
        doc.landmarks.push_back(std::move(l));
    }

    auto fields = j.find("fields");
    if (fields == j.end() || !fields->is_array()) schema_error("document " + doc.doc_id + ": fields must be an array");
    for (const auto& fj : *fields) {
        if (!fj.is_object()) schema_error("field entries must be objects");
        Field f;
        f.id = read_string(fj, "id", "field");
        if (!fj.contains("box")) schema_error("field " + f.id + ": missing \"box\"");
        f.pixel_box = read_box(fj["box"], "field " + f.id);
        f.text = read_string(fj, "text", "field " + f.id);
        if (auto lab = fj.find("label"); lab != fj.end() && !lab->is_null()) {
            if (!lab->is_string()) schema_error("field " + f.id + ": label must be a string or null");
            f.label = lab->get<std::string>();
        }
        doc.fields.push_back(std::move(f));
    }

    normalize_boxes(doc);
    validate_document(doc);
    return doc;
}

Document load_document(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DocumentError(DocumentError::Kind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_document(ss.str());
}

std::string serialize_document(const Document& doc) {
    ojson j;
    j["doc_id"] = doc.doc_id;
    j["image_size"] = ojson::array({doc.width_px, doc.height_px});
    j["role"] = doc.role == Role::Support ? "support" : "query";
    j["landmarks"] = ojson::array();
    for (const auto& l : doc.landmarks) {
        ojson lj;
        lj["id"] = l.id;
        lj["box"] = box_json(l.pixel_box);
        lj["text"] = l.text;
        if (l.is_dummy) lj["dummy"] = true;
        j["landmarks"].push_back(std::move(lj));
    }
    j["fields"] = ojson::array();
    for (const auto& f : doc.fields) {
        ojson fj;
        fj["id"] = f.id;
        fj["box"] = box_json(f.pixel_box);
        fj["text"] = f.text;
        fj["label"] = f.label ? ojson(*f.label) : ojson(nullptr);
        j["fields"].push_back(std::move(fj));
    }
    return j.dump(2) + "\n";
}

void save_document(const Document& doc, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DocumentError(DocumentError::Kind::Io, "cannot write " + path.string());
    out << serialize_document(doc);
}

std::pair<Document, LabelMap> suffix_multiregion_labels(const Document& doc) {
    Document out = doc;
    LabelMap map;

    std::unordered_map<std::string, std::vector<std::size_t>> groups;
    std::vector<std::string> order;
    for (std::size_t i = 0; i < doc.fields.size(); ++i) {
        if (!doc.fields[i].label) continue;
        auto [it, inserted] = groups.try_emplace(*doc.fields[i].label);
        if (inserted) order.push_back(*doc.fields[i].label);
        it->second.push_back(i);
    }

    for (const auto& label : order) {
        auto& members = groups[label];
        if (members.size() < 2) continue;
        std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            const auto& ba = doc.fields[a].box;
            const auto& bb = doc.fields[b].box;
            if (ba.y1 != bb.y1) return ba.y1 < bb.y1;
            return ba.x1 < bb.x1;
        });
        for (std::size_t k = 0; k < members.size(); ++k) {
            std::string suffixed = label + "#" + std::to_string(k + 1);
            out.fields[members[k]].label = suffixed;
            map.add(std::move(suffixed), label);
        }
    }
    return {std::move(out), std::move(map)};
}

Document align_landmarks(const Document& support, const Document& query) {
    Document out = query;
    out.landmarks.clear();
    out.landmarks.reserve(support.landmarks.size());

    std::unordered_map<std::string, const Landmark*> by_id;
    for (const auto& l : query.landmarks) by_id.emplace(l.id, &l);

    for (const auto& ref : support.landmarks) {
        if (auto it = by_id.find(ref.id); it != by_id.end()) {
            out.landmarks.push_back(*it->second);
            continue;
        }
        Landmark dummy;
        dummy.id = ref.id;
        dummy.text = ref.text;
        dummy.box = ref.box;
        dummy.pixel_box = {ref.box.x1 * query.width_px, ref.box.y1 * query.height_px,
                           ref.box.x2 * query.width_px, ref.box.y2 * query.height_px};
        dummy.is_dummy = true;
        out.landmarks.push_back(std::move(dummy));
    }
    return out;
}

}  // namespace kie
