// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kie/doc_model.hpp"
#include "kie/edge.hpp"
#include "kie/text_embedder.hpp"

namespace kie {

inline constexpr int kVisibilityRays = 36;

struct Point {
    double x = 0.0, y = 0.0;
};

struct VisibilityGraph {
    std::vector<Point> centers;
    std::vector<std::vector<int>> adjacency;  // sorted, symmetric, no self loops

    int size() const { return static_cast<int>(centers.size()); }
    double distance(int i, int j) const;
    bool adjacent(int i, int j) const;
};

/// Field graph with everything the affinity model consumes.
///
/// Row layout: vertex_spatial row i*L + k is landmark_k.center - field_i.center.
/// Edge rows follow `edges`; both directions of every tree edge are present.
struct FieldGraph {
    int n_fields = 0;
    int n_landmarks = 0;
    std::vector<Edge> edges;
    Eigen::MatrixXd vertex_spatial;  // (n_fields * n_landmarks) x 2
    Eigen::MatrixXd vertex_aspect;   // n_fields x 2
    Eigen::MatrixXd vertex_text;     // n_fields x 300
    Eigen::MatrixXd edge_direction;  // |edges| x 2
    Eigen::MatrixXd edge_aspect;     // |edges| x 4
};

/// Casts 36 rays (10 degree steps from +x) from each field center, up to the
/// page diagonal. The first field box a ray enters is a neighbor; nearest hit
/// wins and equal distances go to the lower index. The result is symmetrized.
VisibilityGraph build_visibility_graph(const Document& doc);

/// Distance of the first intersection of a ray with a box, or a negative
/// value when the ray misses within max_length.
double ray_box_entry(Point origin, double dx, double dy, const BBox& box, double max_length);

/// Minimum spanning tree of the visibility graph under center distance. A
/// disconnected graph gets one tree per component, then components are joined
/// by the globally shortest cross pair until connected. Both directions of
/// every tree edge are returned, (u, v) then (v, u).
std::vector<Edge> prim_mst(const VisibilityGraph& vg);

double tree_weight(const VisibilityGraph& vg, const std::vector<Edge>& directed_edges);

FieldGraph extract_features(const Document& doc, const std::vector<Edge>& skeleton,
                            const TextEmbedder& embedder);

/// build_visibility_graph -> prim_mst -> extract_features.
FieldGraph build_field_graph(const Document& doc, const TextEmbedder& embedder);

/// Edge list dump for external visualization.
std::string mst_to_json(const Document& doc, const FieldGraph& graph);

}  // namespace kie
