// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kie/affinity.hpp"
#include "kie/doc_model.hpp"
#include "kie/graph_builder.hpp"
#include "kie/solver.hpp"
#include "kie/text_embedder.hpp"

namespace kie {

struct TrainConfig {
    int batch_size = 8;
    double lr0 = 0.05;
    double lr_decay = 0.85;  // multiplied in after every epoch
    int epochs = 30;
    double lambda = 500.0;
    double ranking_weight = 1.0;
    double margin = 0.5;
    std::uint64_t seed = 0;
    FeatureSet features;
    SolverConfig solver;

    /// Throws std::invalid_argument on out-of-range values.
    void validate() const;
    /// Overlays the keys present in a JSON object; unknown keys are an error.
    void apply_json(const std::string& json_text);
    std::string to_json() const;
};

/// ADAM moments for every scorer; buffers mirror the parameter shapes.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;
    ModelGradients m, v;

    static AdamState for_model(const AffinityModel& model);
};

/// One bias-corrected ADAM update of every scorer.
void adam_step(AffinityModel& model, const ModelGradients& grads, AdamState& state, double lr);

struct HammingLoss {
    double loss = 0.0;
    Eigen::MatrixXd grad;  // dL/dP, (1 - 2 P*) / |Fq|
};

/// Disagreeing entries between the two binary matrices, divided by |Fq|.
HammingLoss hamming_loss(const PartialAssignment& predicted, const PartialAssignment& truth);

using SolveFn = std::function<PartialAssignment(const AffinityMatrix&)>;

struct BlackboxGrad {
    Eigen::MatrixXd vertex;  // same shape as the vertex block
    Eigen::MatrixXd edge;    // same shape as the edge block
    PartialAssignment perturbed;
};

/// Gradient of a loss on the solver output with respect to the affinities,
/// from one extra solve on vertex - lambda * dL/dP.
BlackboxGrad blackbox_grad(const AffinityMatrix& a, const PartialAssignment& predicted, const Eigen::MatrixXd& dl_dp,
                           double lambda, const SolveFn& solve_fn);

/// A (support, query) pair ready for training or evaluation: labels are
/// suffixed, landmarks aligned and both field graphs built.
struct PreparedPair {
    std::string pair_id;
    std::string split;  // empty when untagged
    std::string template_id;
    Document support;
    Document query;
    LabelMap labels;
    FieldGraph support_graph;
    FieldGraph query_graph;
    PartialAssignment truth;
    /// Base label each query row should receive; nullopt for outliers.
    std::vector<std::optional<std::string>> truth_labels;
};

/// Builds the ground truth from `truth` when given, otherwise by matching
/// suffixed query labels to suffixed support labels.
PreparedPair prepare_pair(const Document& support, const Document& query, const TextEmbedder& embedder,
                          const std::optional<PartialAssignment>& truth = std::nullopt);

struct EpochMetrics {
    int epoch = 0;  // 1-based
    double lr = 0.0;
    double loss = 0.0;
    double hamming = 0.0;
    double ranking = 0.0;
    double accuracy = 0.0;  // field accuracy of the solver outputs seen during the epoch
    std::map<std::string, double> split_accuracy;  // same, per split tag plus "all"
};

/// One pass over `pairs` in a seeded shuffled order with one ADAM step per
/// batch. Uses lr0 * decay^(epoch-1) and does not touch the schedule itself.
EpochMetrics train_epoch(AffinityModel& model, const std::vector<PreparedPair>& pairs, const TrainConfig& config,
                         AdamState& state, int epoch);

/// Per-pair loss and gradient, accumulated into grads. Exposed for testing.
struct PairStep {
    double hamming = 0.0;
    double ranking = 0.0;
    int correct = 0;
    int fields = 0;
};
PairStep accumulate_pair_gradient(const AffinityModel& model, const PreparedPair& pair, const TrainConfig& config,
                                  ModelGradients& grads);

/// Fields counted correct in a prediction, with outliers correct iff unmatched.
int count_correct(const PreparedPair& pair, const std::vector<int>& col_of_row);

struct SplitStats {
    int pairs = 0;
    int fields = 0;
    int correct = 0;
    int greedy_correct = 0;
    double accuracy() const { return fields ? static_cast<double>(correct) / fields : 0.0; }
    double greedy_accuracy() const { return fields ? static_cast<double>(greedy_correct) / fields : 0.0; }
};

struct PairResult {
    std::string pair_id;
    std::string split;
    std::string template_id;
    std::vector<int> assignment;
    std::vector<int> greedy;
    int fields = 0;
    int correct = 0;
    int greedy_correct = 0;
    double objective = 0.0;
    bool exact = false;
    double solve_time_s = 0.0;
};

struct EvalReport {
    std::map<std::string, SplitStats> splits;  // includes "all"
    std::map<std::string, SplitStats> templates;
    int outliers = 0;
    int outliers_rejected = 0;
    int outliers_mismatched = 0;
    double exact_fraction = 0.0;
    double mean_solve_time_s = 0.0;
    std::vector<PairResult> pairs;

    double outlier_rejection() const { return outliers ? static_cast<double>(outliers_rejected) / outliers : 1.0; }
    /// Canonical JSON; timings are left out when include_timing is false.
    std::string to_json(bool include_timing) const;
    /// Text table with one row per split plus the greedy baseline column.
    std::string table() const;
};

EvalReport evaluate(const AffinityModel& model, const std::vector<PreparedPair>& pairs, const SolverConfig& solver);

/// Runs config.epochs epochs, calling on_epoch after each.
void fit(AffinityModel& model, const std::vector<PreparedPair>& pairs, const TrainConfig& config,
         const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace kie
