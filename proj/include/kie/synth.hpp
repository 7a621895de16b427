// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kie/assignment.hpp"
#include "kie/doc_model.hpp"

namespace kie {

enum class TextKind { Digits, Amount, Date, Words };

struct LandmarkSlot {
    std::string id;
    std::string text;
    BBox box;
};

/// One labeled field of a layout. More than one box makes it a multi-region
/// field whose parts share the label.
struct FieldSlot {
    std::string label;
    TextKind kind = TextKind::Words;
    std::vector<BBox> boxes;
    int row = 0;
    int column = 0;
};

struct Template {
    std::string template_id;
    double width_px = 1000.0;
    double height_px = 1400.0;
    std::vector<LandmarkSlot> landmarks;
    std::vector<FieldSlot> slots;
    int n_rows = 0;
    double row_spacing = 0.0;
    double column_spacing = 0.0;
    std::uint64_t text_seed = 0;  // support field values
    /// Adjacent single-box slots whose widths or heights differ by >= 2x.
    std::vector<std::pair<int, int>> flip_candidates;
};

/// Procedural key/value layout, fully determined by (index, seed).
Template make_template(int index, std::uint64_t seed);

enum class DriftAxis { Vertical, Horizontal };

/// Shifts every field on rows >= start_row by magnitude (normalized units).
struct DriftSpec {
    DriftAxis axis = DriftAxis::Vertical;
    double magnitude = 0.0;
    int start_row = 0;
};

struct PerturbSpec {
    double jitter_std = 0.005;
    std::optional<DriftSpec> drift;
    int outlier_count = 0;
    /// Slot pair whose boxes trade top-left corners; each keeps its own size.
    std::optional<std::pair<int, int>> flip;
    int drop_landmarks = 0;
};

struct GeneratedPair {
    Document support;
    Document query;
    PartialAssignment truth;
    std::string split;  // clean, drifted, outliers, drifted+outliers, flipped
};

/// Support is the unperturbed template; the query gets jitter, then drift,
/// flip, outliers and landmark drops. A drift that leaves the nearest-landmark
/// labeling error-free is kept but tagged clean.
GeneratedPair generate_pair(const Template& t, const PerturbSpec& perturb, std::uint64_t seed);

/// Draws a perturbation realizing the requested split tag.
PerturbSpec sample_perturbation(const Template& t, const std::string& split, std::uint64_t seed);

/// Query rows whose label differs from the one assigned by transferring the
/// nearest landmark offset. Outlier rows are ignored.
int nearest_landmark_errors(const Document& support, const Document& query, const PartialAssignment& truth);

struct CorpusConfig {
    int templates = 15;
    int test_templates = 5;  // 0 puts every template in train
    int queries = 50;        // per template
    std::map<std::string, double> mix = {{"clean", 0.5}, {"drifted", 0.3}, {"outliers", 0.2}};
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument on an infeasible configuration.
    void validate() const;
};

/// Largest-remainder split of `total` by the mix ratios, keyed like mix.
std::map<std::string, int> split_counts(const std::map<std::string, double>& mix, int total);

struct CorpusPair {
    std::string pair_id;
    std::string set;  // train or test
    std::string template_id;
    std::string split;
    Document support;
    Document query;
    PartialAssignment truth;
};

/// In-memory corpus, identical to what write_corpus puts on disk.
std::vector<CorpusPair> generate_corpus(const CorpusConfig& config);

/// Writes {train,test}/<pair_id>/{support,query,gt}.json and manifest.json.
void write_corpus(const std::vector<CorpusPair>& pairs, const CorpusConfig& config, const std::filesystem::path& dir);

/// Reads back the pairs of one set ("train", "test" or "" for both).
std::vector<CorpusPair> load_corpus(const std::filesystem::path& dir, const std::string& set = "");

/// Ground truth as a query field id -> support field id (or null) map.
std::string truth_to_json(const Document& support, const Document& query, const PartialAssignment& truth);
PartialAssignment truth_from_json(const std::string& text, const Document& support, const Document& query);

}  // namespace kie
