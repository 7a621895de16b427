// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "kie/affinity_matrix.hpp"
#include "kie/assignment.hpp"
#include "kie/graph_builder.hpp"
#include "kie/mlp.hpp"

namespace kie {

/// Which affinity terms are active.
struct FeatureSet {
    bool spatial = true;
    bool aspect = true;
    bool text = true;
    bool edge = true;

    static FeatureSet all() { return {}; }
    static FeatureSet none() { return {false, false, false, false}; }
    /// Parses a csv such as "spatial,aspect,edge". Throws std::invalid_argument.
    static FeatureSet parse(const std::string& csv);
    std::string to_string() const;
    int n_vertex() const { return int(spatial) + int(aspect) + int(text); }

    bool operator==(const FeatureSet&) const = default;
};

/// The five independent scorers, in a fixed order.
enum class Scorer : int { Spatial = 0, Aspect, Text, EdgeDirection, EdgeAspect };
inline constexpr int kScorerCount = 5;
const char* scorer_name(Scorer s);

using ModelGradients = std::array<MlpParams, kScorerCount>;

/// Forward result for one (query, support) pair: the affinity blocks plus the
/// activations backward() needs. Holds no reference to the model.
struct AffinityForward {
    AffinityMatrix affinity;
    std::array<std::optional<MlpCache>, kScorerCount> caches;
    int n_landmarks = 0;
    double vertex_weight = 0.0;  // 1 / number of enabled vertex features
    bool computed = false;

    bool valid() const { return computed; }
};

class AffinityModel {
public:
    AffinityModel() = default;

    /// Separate default-architecture MLPs per scorer, seeded.
    static AffinityModel create(FeatureSet features, std::uint64_t seed);

    const FeatureSet& features() const { return features_; }
    void set_features(FeatureSet f) { features_ = f; }

    Mlp& mlp(Scorer s) { return mlps_[static_cast<int>(s)]; }
    const Mlp& mlp(Scorer s) const { return mlps_[static_cast<int>(s)]; }

    /// Landmark-averaged spatial score matrix |Fq| x |Fs| (query features first).
    Eigen::MatrixXd spatial_affinity(const FieldGraph& query, const FieldGraph& support) const;
    Eigen::MatrixXd aspect_affinity(const FieldGraph& query, const FieldGraph& support) const;
    Eigen::MatrixXd text_affinity(const FieldGraph& query, const FieldGraph& support) const;
    /// Mean of the enabled vertex terms. Throws if none enabled.
    Eigen::MatrixXd vertex_affinity(const FieldGraph& query, const FieldGraph& support) const;
    /// Half the sum of direction and aspect edge scores; 0x0 when either
    /// graph has no edges.
    Eigen::MatrixXd edge_affinity(const FieldGraph& query, const FieldGraph& support) const;

    /// Full forward pass. With edges disabled the edge block and edge lists are empty.
    AffinityForward forward(const FieldGraph& query, const FieldGraph& support) const;

    /// Accumulates parameter gradients given dL/dvertex and dL/dedge.
    /// d_edge may be empty when the forward produced no edge block.
    void backward(const AffinityForward& fwd, const Eigen::MatrixXd& d_vertex, const Eigen::MatrixXd& d_edge,
                  ModelGradients& grads) const;

    ModelGradients zero_gradients() const;

private:
    FeatureSet features_;
    std::array<Mlp, kScorerCount> mlps_;
};

struct RankingLossResult {
    double loss = 0.0;
    Eigen::MatrixXd grad;  // dloss / dvertex
};

/// Margin hinge pushing each ground-truth entry above its row and column
/// competitors, averaged over the matched ground-truth pairs.
RankingLossResult ranking_loss(const Eigen::MatrixXd& vertex, const PartialAssignment& gt, double margin);

inline constexpr const char* kCheckpointFormat = "kie-checkpoint/1";

/// Everything needed to rebuild a trained labeler.
struct Checkpoint {
    AffinityModel model;
    std::string embedder_mode = "hashed_trigram";
    std::uint64_t embedder_seed = 0;
    std::string embedder_table;
    std::map<std::string, double> hyperparameters;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kie
