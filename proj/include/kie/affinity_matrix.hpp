// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include <Eigen/Dense>

#include "kie/edge.hpp"

namespace kie {

/// The two meaningful blocks of the (|Fq||Fs|)^2 graph matching affinity.
///
/// vertex(i, a) scores query field i against support field a. edge(e, f)
/// scores query edge query_edges[e] = (i, j) against support edge
/// support_edges[f] = (a, b); it counts iff i->a and j->b.
struct AffinityMatrix {
    Eigen::MatrixXd vertex;
    Eigen::MatrixXd edge;
    std::vector<Edge> query_edges;
    std::vector<Edge> support_edges;

    int rows() const { return static_cast<int>(vertex.rows()); }
    int cols() const { return static_cast<int>(vertex.cols()); }
    bool has_edges() const { return edge.size() > 0; }
};

}  // namespace kie
