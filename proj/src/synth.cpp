// SPDX-License-Identifier: Apache-2.0
#include "kie/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "kie/rng.hpp"
#include "kie/text_embedder.hpp"

namespace kie {

namespace {

using ojson = nlohmann::ordered_json;

constexpr double kLineHeight = 0.022;

constexpr std::array<const char*, 30> kKeys = {
    "Invoice No", "Date",       "Total",     "Subtotal", "Tax",      "Customer", "Address",  "Amount Due",
    "Fare",       "Distance",   "Order ID",  "Phone",    "Account",  "Reference", "Balance", "Payment",
    "Due Date",   "Terminal",   "Cashier",   "Vendor",   "Discount", "Tip",      "Plate No", "Start Time",
    "End Time",   "Card No",    "Station",   "Seller",   "Buyer",    "Quantity"};

constexpr std::array<const char*, 8> kHeaders = {"INVOICE",     "RECEIPT",    "TAXI FARE",       "SALES SLIP",
                                                 "TRAIN TICKET", "BILL",      "PAYMENT VOUCHER", "DELIVERY NOTE"};

constexpr std::array<const char*, 6> kFooters = {"Thank you", "Signature", "Stamp", "Keep this slip",
                                                 "Customer copy", "Valid without seal"};

constexpr std::array<const char*, 24> kWords = {"north", "river", "lane",  "maple", "grand", "union", "west",  "park",
                                                "hill",  "green", "ocean", "cedar", "lake",  "bright", "stone", "field",
                                                "smith", "chen",  "garcia", "wang", "lopez", "kumar", "ivanov", "sato"};

std::string label_of(std::string_view key) {
    std::string out;
    for (char c : key) out += c == ' ' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string make_text(TextKind kind, Rng& rng) {
    char buf[64];
    switch (kind) {
        case TextKind::Digits: {
            std::string s;
            const int n = rng.range(6, 10);
            for (int i = 0; i < n; ++i) s += static_cast<char>('0' + rng.range(0, 9));
            return s;
        }
        case TextKind::Amount: {
            const int whole = rng.range(1, 9999);
            const int cents = rng.range(0, 99);
            if (whole >= 1000) {
                std::snprintf(buf, sizeof buf, "%d,%03d.%02d", whole / 1000, whole % 1000, cents);
            } else {
                std::snprintf(buf, sizeof buf, "%d.%02d", whole, cents);
            }
            return buf;
        }
        case TextKind::Date: {
            const int y = rng.range(2015, 2024), m = rng.range(1, 12), d = rng.range(1, 28);
            if (rng.bernoulli(0.5)) {
                std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
            } else {
                std::snprintf(buf, sizeof buf, "%02d/%02d/%04d", d, m, y);
            }
            return buf;
        }
        case TextKind::Words: {
            std::string s;
            const int n = rng.range(2, 3);
            for (int i = 0; i < n; ++i) {
                if (i) s += ' ';
                s += kWords[rng.below(kWords.size())];
            }
            return s;
        }
    }
    return {};
}

/// One to two circled digits, a token pool no field generator produces.
std::string outlier_text(Rng& rng) {
    std::string s;
    const int n = rng.range(1, 2);
    for (int i = 0; i < n; ++i) {
        s += "\xE2\x91";
        s += static_cast<char>(0xA0 + rng.range(0, 19));
    }
    return s;
}

double kind_width(TextKind kind, Rng& rng) {
    switch (kind) {
        case TextKind::Digits: return rng.uniform(0.10, 0.13);
        case TextKind::Amount: return rng.uniform(0.09, 0.12);
        case TextKind::Date: return rng.uniform(0.11, 0.13);
        case TextKind::Words: return rng.uniform(0.27, 0.32);
    }
    return 0.1;
}

BBox at(double x, double y, double w, double h) { return {x, y, x + w, y + h}; }

/// Snaps a normalized box to whole pixels and clamps it to the page.
void place(BBox box, double width_px, double height_px, PixelBox& pixel, BBox& normalized) {
    box.x1 = std::clamp(box.x1, 0.0, 1.0);
    box.x2 = std::clamp(box.x2, box.x1, 1.0);
    box.y1 = std::clamp(box.y1, 0.0, 1.0);
    box.y2 = std::clamp(box.y2, box.y1, 1.0);
    pixel = {std::round(box.x1 * width_px), std::round(box.y1 * height_px), std::round(box.x2 * width_px),
             std::round(box.y2 * height_px)};
    normalized = {pixel[0] / width_px, pixel[1] / height_px, pixel[2] / width_px, pixel[3] / height_px};
}

BBox shifted(BBox b, double dx, double dy) { return {b.x1 + dx, b.y1 + dy, b.x2 + dx, b.y2 + dy}; }

double center_distance(const BBox& a, const BBox& b) { return std::hypot(a.cx() - b.cx(), a.cy() - b.cy()); }

bool separated(const BBox& a, const BBox& b, double gap) {
    return a.x2 + gap <= b.x1 || b.x2 + gap <= a.x1 || a.y2 + gap <= b.y1 || b.y2 + gap <= a.y1;
}

/// A query field before ordering: the slot and region it came from, or -1 for outliers.
struct Draft {
    BBox box;
    std::string text;
    int slot = -1;
    int region = 0;
};

std::string pair_id_of(const Template& t, int q) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_q%03d", t.template_id.c_str(), q);
    return buf;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DocumentError(DocumentError::Kind::Io, "cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DocumentError(DocumentError::Kind::Io, "cannot write " + p.string());
    out << text;
}

const std::set<std::string>& known_splits() {
    static const std::set<std::string> s = {"clean", "drifted", "outliers", "drifted+outliers", "flipped"};
    return s;
}

}  // namespace

Template make_template(int index, std::uint64_t seed) {
    Rng rng(Rng::mix(seed, 0x7e3a0000ULL + static_cast<std::uint64_t>(index)));
    Template t;
    char id[16];
    std::snprintf(id, sizeof id, "tpl%02d", index);
    t.template_id = id;
    t.text_seed = rng.next_u64();
    static constexpr std::array<std::pair<double, double>, 3> kSizes = {{{1000, 1400}, {1240, 1754}, {850, 1100}}};
    const auto size = kSizes[rng.below(kSizes.size())];
    t.width_px = size.first;
    t.height_px = size.second;

    t.n_rows = rng.range(5, 7);
    t.row_spacing = rng.uniform(0.075, 0.10);
    const double y0 = rng.uniform(0.14, 0.20);
    const double lx = rng.uniform(0.05, 0.09);
    const double lw = rng.uniform(0.12, 0.17);
    const double fx = lx + lw + rng.uniform(0.02, 0.04);
    const double rx = rng.uniform(0.52, 0.56);
    const double rlw = rng.uniform(0.10, 0.12);
    const double rfx = rx + rlw + 0.02;
    t.column_spacing = rfx - fx;

    std::vector<int> key_order(kKeys.size());
    std::iota(key_order.begin(), key_order.end(), 0);
    rng.shuffle(std::span<int>(key_order));
    std::size_t next_key = 0;

    auto add_landmark = [&](std::string text, BBox box) {
        t.landmarks.push_back({"l" + std::to_string(t.landmarks.size()), std::move(text), box});
    };
    add_landmark(kHeaders[rng.below(kHeaders.size())], at(rng.uniform(0.35, 0.45), 0.05, rng.uniform(0.15, 0.25), 0.03));

    // Row kinds lean on one narrow kind so text alone rarely separates neighbours.
    static constexpr std::array<TextKind, 3> kNarrow = {TextKind::Digits, TextKind::Amount, TextKind::Date};
    const TextKind dominant = kNarrow[rng.below(kNarrow.size())];
    std::vector<TextKind> kinds(t.n_rows);
    for (auto& k : kinds) k = rng.bernoulli(0.7) ? dominant : static_cast<TextKind>(rng.below(4));
    bool has_flip_pair = false;
    for (int r = 0; r + 1 < t.n_rows; ++r) {
        has_flip_pair |= (kinds[r] == TextKind::Words) != (kinds[r + 1] == TextKind::Words);
    }
    if (!has_flip_pair) {
        const int r = rng.range(1, t.n_rows - 1);
        kinds[r] = TextKind::Words;
        kinds[r - 1] = dominant;
    }

    std::vector<bool> right(t.n_rows, false);
    const int n_right = rng.range(1, 2);
    for (int k = 0, tries = 0; k < n_right && tries < 50; ++tries) {
        const int r = rng.range(0, t.n_rows - 1);
        if (right[r] || kinds[r] == TextKind::Words) continue;
        right[r] = true;
        ++k;
    }

    for (int r = 0; r < t.n_rows; ++r) {
        const double y = y0 + r * t.row_spacing;
        const std::string key = kKeys[key_order[next_key++]];
        add_landmark(key + ":", at(lx, y, lw, kLineHeight));
        t.slots.push_back({label_of(key), kinds[r], {at(fx, y, kind_width(kinds[r], rng), kLineHeight)}, r, 0});
        if (right[r]) {
            const std::string rkey = kKeys[key_order[next_key++]];
            const TextKind rk = kNarrow[rng.below(kNarrow.size())];
            add_landmark(rkey + ":", at(rx, y, rlw, kLineHeight));
            t.slots.push_back({label_of(rkey), rk, {at(rfx, y, kind_width(rk, rng), kLineHeight)}, r, 1});
        }
    }
    if (rng.bernoulli(0.5)) {
        const double y = y0 + (t.n_rows - 1 + 1.3) * t.row_spacing;
        add_landmark(kFooters[rng.below(kFooters.size())], at(lx, std::min(y, 0.95), rng.uniform(0.12, 0.2), kLineHeight));
    }

    auto left_slot_of_row = [&](int r) {
        for (int s = 0; s < static_cast<int>(t.slots.size()); ++s) {
            if (t.slots[s].row == r && t.slots[s].column == 0) return s;
        }
        return -1;
    };
    auto ratio = [](const BBox& a, const BBox& b) {
        const double rw = std::max(a.width(), b.width()) / std::min(a.width(), b.width());
        const double rh = std::max(a.height(), b.height()) / std::min(a.height(), b.height());
        return std::max(rw, rh);
    };
    for (int r = 0; r + 1 < t.n_rows; ++r) {
        const int a = left_slot_of_row(r), b = left_slot_of_row(r + 1);
        if (ratio(t.slots[a].boxes[0], t.slots[b].boxes[0]) >= 2.0) t.flip_candidates.emplace_back(a, b);
    }

    // A words slot outside every flip pair may wrap onto a second line.
    if (rng.bernoulli(0.35)) {
        std::vector<int> eligible;
        for (int s = 0; s < static_cast<int>(t.slots.size()); ++s) {
            if (t.slots[s].kind != TextKind::Words) continue;
            const bool in_flip = std::any_of(t.flip_candidates.begin(), t.flip_candidates.end(),
                                             [&](const auto& p) { return p.first == s || p.second == s; });
            if (!in_flip) eligible.push_back(s);
        }
        if (!eligible.empty()) {
            auto& slot = t.slots[eligible[rng.below(eligible.size())]];
            const BBox& first = slot.boxes[0];
            slot.boxes.push_back(at(first.x1, first.y2 + 0.008, 0.8 * first.width(), kLineHeight));
        }
    }
    return t;
}

int nearest_landmark_errors(const Document& support, const Document& query, const PartialAssignment& truth) {
    std::map<std::string, const Landmark*> support_landmarks;
    for (const auto& l : support.landmarks) support_landmarks[l.id] = &l;
    const auto support_labels = suffix_multiregion_labels(support);
    int errors = 0;
    for (int i = 0; i < truth.rows(); ++i) {
        if (!truth.matched(i)) continue;
        const BBox& q = query.fields[i].box;
        const Landmark* lq = nullptr;
        const Landmark* ls = nullptr;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& l : query.landmarks) {
            auto it = support_landmarks.find(l.id);
            if (it == support_landmarks.end()) continue;
            const double d = center_distance(q, l.box);
            if (d < best) {
                best = d;
                lq = &l;
                ls = it->second;
            }
        }
        if (!lq) {
            ++errors;
            continue;
        }
        const double ox = q.cx() - lq->box.cx(), oy = q.cy() - lq->box.cy();
        int pick = -1;
        double pick_d = std::numeric_limits<double>::infinity();
        for (int a = 0; a < static_cast<int>(support.fields.size()); ++a) {
            const BBox& s = support.fields[a].box;
            const double d = std::hypot(s.cx() - ls->box.cx() - ox, s.cy() - ls->box.cy() - oy);
            if (d < pick_d) {
                pick_d = d;
                pick = a;
            }
        }
        const auto& labels = support_labels.second;
        const auto& fields = support_labels.first.fields;
        if (labels.base_of(*fields[pick].label) != labels.base_of(*fields[truth.col(i)].label)) ++errors;
    }
    return errors;
}

PerturbSpec sample_perturbation(const Template& t, const std::string& split, std::uint64_t seed) {
    if (!known_splits().count(split)) throw std::invalid_argument("unknown split tag '" + split + "'");
    Rng rng(seed);
    PerturbSpec p;
    if (split == "drifted" || split == "drifted+outliers") {
        DriftSpec d;
        d.axis = DriftAxis::Vertical;
        d.magnitude = rng.uniform(0.9, 1.1) * t.row_spacing;
        d.start_row = rng.range(1, std::max(1, t.n_rows / 2));
        p.drift = d;
    }
    if (split == "outliers" || split == "drifted+outliers") p.outlier_count = rng.range(1, 2);
    if (split == "flipped") {
        if (t.flip_candidates.empty()) throw std::invalid_argument(t.template_id + " has no flippable slot pair");
        p.flip = t.flip_candidates[rng.below(t.flip_candidates.size())];
    }
    return p;
}

GeneratedPair generate_pair(const Template& t, const PerturbSpec& perturb, std::uint64_t seed) {
    Rng rng(seed);
    GeneratedPair out;

    Document& s = out.support;
    s.doc_id = t.template_id + "-support";
    s.width_px = t.width_px;
    s.height_px = t.height_px;
    s.role = Role::Support;
    for (const auto& l : t.landmarks) {
        Landmark lm{l.id, {}, {}, l.text, false};
        place(l.box, t.width_px, t.height_px, lm.pixel_box, lm.box);
        s.landmarks.push_back(std::move(lm));
    }
    std::vector<std::vector<int>> support_index(t.slots.size());
    {
        Rng text_rng(t.text_seed);
        for (std::size_t k = 0; k < t.slots.size(); ++k) {
            const auto& slot = t.slots[k];
            for (const auto& box : slot.boxes) {
                Field f{"f" + std::to_string(s.fields.size()), {}, {}, make_text(slot.kind, text_rng), slot.label};
                place(box, t.width_px, t.height_px, f.pixel_box, f.box);
                support_index[k].push_back(static_cast<int>(s.fields.size()));
                s.fields.push_back(std::move(f));
            }
        }
    }

    // Query geometry in normalized units, jitter first.
    auto jitter = [&](BBox b) {
        const double dx = perturb.jitter_std * rng.normal();
        const double dy = perturb.jitter_std * rng.normal();
        return shifted(b, dx, dy);
    };
    std::vector<BBox> landmark_boxes;
    for (const auto& l : t.landmarks) landmark_boxes.push_back(jitter(l.box));
    std::vector<Draft> drafts;
    std::vector<std::vector<int>> draft_of_slot(t.slots.size());
    for (std::size_t k = 0; k < t.slots.size(); ++k) {
        for (std::size_t r = 0; r < t.slots[k].boxes.size(); ++r) {
            draft_of_slot[k].push_back(static_cast<int>(drafts.size()));
            drafts.push_back({jitter(t.slots[k].boxes[r]), make_text(t.slots[k].kind, rng), static_cast<int>(k),
                              static_cast<int>(r)});
        }
    }

    bool drifted = false;
    if (perturb.drift) {
        const auto& d = *perturb.drift;
        double magnitude = d.magnitude;
        double extent = 0.0;
        for (const auto& dr : drafts) {
            if (t.slots[dr.slot].row >= d.start_row) {
                extent = std::max(extent, d.axis == DriftAxis::Vertical ? dr.box.y2 : dr.box.x2);
            }
        }
        magnitude = std::max(0.0, std::min(magnitude, 0.99 - extent));
        for (auto& dr : drafts) {
            if (t.slots[dr.slot].row < d.start_row) continue;
            dr.box = d.axis == DriftAxis::Vertical ? shifted(dr.box, 0.0, magnitude) : shifted(dr.box, magnitude, 0.0);
        }
        drifted = magnitude > 0.0;
    }

    if (perturb.flip) {
        const auto [a, b] = *perturb.flip;
        if (a < 0 || b < 0 || a >= static_cast<int>(t.slots.size()) || b >= static_cast<int>(t.slots.size())) {
            throw std::invalid_argument("flip slot out of range");
        }
        BBox& ba = drafts[draft_of_slot[a][0]].box;
        BBox& bb = drafts[draft_of_slot[b][0]].box;
        const BBox old_a = ba;
        ba = at(bb.x1, bb.y1, old_a.width(), old_a.height());
        bb = at(old_a.x1, old_a.y1, bb.width(), bb.height());
    }

    for (int k = 0; k < perturb.outlier_count; ++k) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            const BBox cand = at(rng.uniform(0.04, 0.9), rng.uniform(0.1, 0.95), rng.uniform(0.025, 0.05), kLineHeight);
            bool ok = true;
            for (const auto& dr : drafts) ok = ok && separated(cand, dr.box, 0.03);
            for (const auto& lb : landmark_boxes) ok = ok && separated(cand, lb, 0.03);
            for (const auto& f : s.fields) ok = ok && center_distance(cand, f.box) >= 0.1;
            if (!ok) continue;
            drafts.push_back({cand, outlier_text(rng), -1, 0});
            break;
        }
    }

    Document& q = out.query;
    q.doc_id = t.template_id + "-query";
    q.width_px = t.width_px;
    q.height_px = t.height_px;
    q.role = Role::Query;
    std::vector<int> keep(t.landmarks.size());
    std::iota(keep.begin(), keep.end(), 0);
    if (perturb.drop_landmarks > 0) {
        std::vector<int> droppable(keep.begin() + 1, keep.end());
        rng.shuffle(std::span<int>(droppable));
        const int n_drop = std::min(perturb.drop_landmarks, static_cast<int>(droppable.size()) - 1);
        std::set<int> dropped(droppable.begin(), droppable.begin() + std::max(0, n_drop));
        std::erase_if(keep, [&](int i) { return dropped.count(i) > 0; });
    }
    for (int i : keep) {
        Landmark lm{t.landmarks[i].id, {}, {}, t.landmarks[i].text, false};
        place(landmark_boxes[i], t.width_px, t.height_px, lm.pixel_box, lm.box);
        q.landmarks.push_back(std::move(lm));
    }

    for (auto& dr : drafts) {
        PixelBox pb;
        place(dr.box, t.width_px, t.height_px, pb, dr.box);
    }
    std::vector<int> order(drafts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        const BBox &a = drafts[x].box, &b = drafts[y].box;
        return a.y1 != b.y1 ? a.y1 < b.y1 : a.x1 < b.x1;
    });
    std::vector<int> truth(drafts.size(), kUnmatched);
    for (std::size_t k = 0; k < order.size(); ++k) {
        const Draft& dr = drafts[order[k]];
        Field f{"q" + std::to_string(k), {}, {}, dr.text, std::nullopt};
        place(dr.box, t.width_px, t.height_px, f.pixel_box, f.box);
        if (dr.slot >= 0) {
            f.label = t.slots[dr.slot].label;
            truth[k] = support_index[dr.slot][dr.region];
        }
        q.fields.push_back(std::move(f));
    }
    out.truth = PartialAssignment(static_cast<int>(s.fields.size()), std::move(truth));

    const bool effective_drift = drifted && nearest_landmark_errors(s, q, out.truth) >= 1;
    const bool outliers = out.truth.n_matched() < out.truth.rows();
    if (perturb.flip) out.split = "flipped";
    else if (effective_drift && outliers) out.split = "drifted+outliers";
    else if (effective_drift) out.split = "drifted";
    else if (outliers) out.split = "outliers";
    else out.split = "clean";
    return out;
}

void CorpusConfig::validate() const {
    if (templates < 1) throw std::invalid_argument("need at least one template");
    if (test_templates < 0) throw std::invalid_argument("test_templates must be >= 0");
    if (test_templates > 0 && templates < 2) {
        throw std::invalid_argument("a train/test style split needs at least 2 templates");
    }
    if (test_templates >= templates && test_templates > 0) {
        throw std::invalid_argument("test_templates must leave at least one training template");
    }
    if (queries < 1) throw std::invalid_argument("queries must be >= 1");
    if (mix.empty()) throw std::invalid_argument("split mix is empty");
    double total = 0.0;
    for (const auto& [k, v] : mix) {
        if (!known_splits().count(k)) throw std::invalid_argument("unknown split tag '" + k + "'");
        if (!(v >= 0.0)) throw std::invalid_argument("split ratio for '" + k + "' must be >= 0");
        total += v;
    }
    if (!(total > 0.0)) throw std::invalid_argument("split ratios sum to zero");
}

std::map<std::string, int> split_counts(const std::map<std::string, double>& mix, int total) {
    double sum = 0.0;
    for (const auto& [_, v] : mix) sum += v;
    std::map<std::string, int> counts;
    std::vector<std::pair<double, std::string>> remainders;
    int assigned = 0;
    for (const auto& [k, v] : mix) {
        const double exact = total * v / sum;
        counts[k] = static_cast<int>(std::floor(exact));
        assigned += counts[k];
        remainders.emplace_back(exact - std::floor(exact), k);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[remainders[i % remainders.size()].second];
    return counts;
}

std::vector<CorpusPair> generate_corpus(const CorpusConfig& config) {
    config.validate();
    std::vector<CorpusPair> out;
    const auto counts = split_counts(config.mix, config.queries);
    std::vector<std::string> plan;
    for (const auto& [k, n] : counts) plan.insert(plan.end(), n, k);

    for (int ti = 0; ti < config.templates; ++ti) {
        const Template t = make_template(ti, config.seed);
        const bool test = ti >= config.templates - config.test_templates;
        for (int qi = 0; qi < config.queries; ++qi) {
            const std::uint64_t base = Rng::mix(config.seed, static_cast<std::uint64_t>(ti) * 1'000'000 + qi);
            // A drift that misses every landmark row is redrawn a few times
            // before the pair is accepted with the clean tag.
            GeneratedPair gp;
            for (std::uint64_t attempt = 0; attempt < 8; ++attempt) {
                const std::uint64_t s = Rng::mix(base, attempt);
                gp = generate_pair(t, sample_perturbation(t, plan[qi], Rng::mix(s, 1)), s);
                if (gp.split == plan[qi]) break;
            }
            CorpusPair cp;
            cp.pair_id = pair_id_of(t, qi);
            cp.set = test ? "test" : "train";
            cp.template_id = t.template_id;
            cp.split = gp.split;
            cp.support = std::move(gp.support);
            cp.query = std::move(gp.query);
            cp.query.doc_id = cp.pair_id + "-query";
            cp.truth = std::move(gp.truth);
            out.push_back(std::move(cp));
        }
    }
    return out;
}

std::string truth_to_json(const Document& support, const Document& query, const PartialAssignment& truth) {
    if (truth.rows() != static_cast<int>(query.fields.size()) || truth.cols() != static_cast<int>(support.fields.size())) {
        throw std::invalid_argument("ground truth shape does not match the documents");
    }
    ojson j;
    j["truth"] = ojson::object();
    for (int i = 0; i < truth.rows(); ++i) {
        j["truth"][query.fields[i].id] = truth.matched(i) ? ojson(support.fields[truth.col(i)].id) : ojson(nullptr);
    }
    return j.dump(2) + "\n";
}

PartialAssignment truth_from_json(const std::string& text, const Document& support, const Document& query) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DocumentError(DocumentError::Kind::Parse, std::string("ground truth: ") + e.what());
    }
    std::map<std::string, int> col_of;
    for (std::size_t a = 0; a < support.fields.size(); ++a) col_of[support.fields[a].id] = static_cast<int>(a);
    PartialAssignment p(static_cast<int>(query.fields.size()), static_cast<int>(support.fields.size()));
    const auto& m = j.at("truth");
    for (std::size_t i = 0; i < query.fields.size(); ++i) {
        auto it = m.find(query.fields[i].id);
        if (it == m.end() || it->is_null()) continue;
        auto c = col_of.find(it->get<std::string>());
        if (c == col_of.end()) {
            throw DocumentError(DocumentError::Kind::Schema, "ground truth names unknown support field " +
                                                                 it->get<std::string>());
        }
        p.set(static_cast<int>(i), c->second);
    }
    if (!p.is_feasible()) throw DocumentError(DocumentError::Kind::Schema, "ground truth is not one-to-one");
    return p;
}

void write_corpus(const std::vector<CorpusPair>& pairs, const CorpusConfig& config, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    ojson manifest;
    manifest["format"] = "kie-corpus/1";
    manifest["seed"] = config.seed;
    manifest["templates"] = config.templates;
    manifest["test_templates"] = config.test_templates;
    manifest["queries"] = config.queries;
    manifest["mix"] = config.mix;
    std::map<std::string, std::set<std::string>> styles;
    std::map<std::string, std::map<std::string, int>> counts;
    ojson list = ojson::array();
    for (const auto& p : pairs) {
        const fs::path pd = dir / p.set / p.pair_id;
        fs::create_directories(pd);
        save_document(p.support, pd / "support.json");
        save_document(p.query, pd / "query.json");
        write_file(pd / "gt.json", truth_to_json(p.support, p.query, p.truth));
        styles[p.set].insert(p.template_id);
        ++counts[p.set][p.split];
        list.push_back({{"pair_id", p.pair_id}, {"set", p.set}, {"template", p.template_id}, {"split", p.split}});
    }
    manifest["styles"] = ojson::object();
    for (const auto& [set, ids] : styles) manifest["styles"][set] = std::vector<std::string>(ids.begin(), ids.end());
    manifest["counts"] = counts;
    manifest["pairs"] = std::move(list);
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<CorpusPair> load_corpus(const std::filesystem::path& dir, const std::string& set) {
    const auto mpath = dir / "manifest.json";
    if (!std::filesystem::exists(mpath)) {
        throw DocumentError(DocumentError::Kind::Io, "no manifest.json in " + dir.string());
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(mpath));
    } catch (const nlohmann::json::parse_error& e) {
        throw DocumentError(DocumentError::Kind::Parse, std::string("manifest: ") + e.what());
    }
    std::vector<CorpusPair> out;
    for (const auto& entry : manifest.at("pairs")) {
        CorpusPair p;
        p.set = entry.at("set").get<std::string>();
        if (!set.empty() && p.set != set) continue;
        p.pair_id = entry.at("pair_id").get<std::string>();
        p.template_id = entry.value("template", "");
        p.split = entry.value("split", "");
        const auto pd = dir / p.set / p.pair_id;
        p.support = load_document(pd / "support.json");
        p.query = load_document(pd / "query.json");
        p.truth = truth_from_json(read_file(pd / "gt.json"), p.support, p.query);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace kie
