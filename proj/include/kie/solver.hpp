// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "kie/affinity_matrix.hpp"
#include "kie/assignment.hpp"

namespace kie {

struct SolverConfig {
    int exact_threshold = 12;          // max |Fq| handled by branch and bound
    std::int64_t max_nodes = 2'000'000;  // B&B node budget; exceeding it drops the certificate
    std::uint64_t seed = 0;            // local search row shuffles
};

struct SolveReport {
    PartialAssignment assignment;
    double objective = 0.0;
    bool exact = false;
    std::string method;  // "bruteforce", "lap", "branch_and_bound", "local_search"
    std::int64_t nodes_explored = 0;
    std::int64_t iterations = 0;
    double wall_time_s = 0.0;
};

/// Raised when an instance is too large for the requested solver.
class SolverLimitError : public std::length_error {
public:
    using std::length_error::length_error;
};

inline constexpr int kBruteforceMaxSide = 7;

/// Vertex terms of matched rows plus every edge pair whose two endpoints are
/// matched consistently. Throws std::invalid_argument on shape mismatch.
double objective_value(const PartialAssignment& p, const AffinityMatrix& a);

/// Enumerates every partial injection. Ties go to the lexicographically
/// smallest assignment vector, with "unmatched" ordered before any column.
SolveReport solve_bruteforce(const AffinityMatrix& a);

/// Maximum-weight rectangular assignment on the vertex block with a
/// zero-score null option per row.
PartialAssignment solve_vertex_lap(const Eigen::MatrixXd& vertex);

/// Certified optimum by depth-first branch and bound over row decisions,
/// seeded with the local search incumbent. Vertex-only instances are solved
/// exactly by the assignment LP. Throws SolverLimitError above the threshold.
SolveReport solve_exact(const AffinityMatrix& a, const SolverConfig& config = {});

/// Admissible bound used at the B&B root: an upper bound on the optimum.
double root_upper_bound(const AffinityMatrix& a);

/// LAP seed followed by first-improvement local search over
/// reassign / unassign / swap moves. With edges, the incumbent is then
/// perturbed and re-descended a fixed number of times, keeping the best.
SolveReport solve_heuristic(const AffinityMatrix& a, std::uint64_t seed);

/// Exact when |Fq| <= exact_threshold, otherwise heuristic.
SolveReport solve(const AffinityMatrix& a, const SolverConfig& config = {});

/// Row-wise argmax of the vertex block with no constraints; columns may
/// repeat and no row is left unmatched. Baseline for comparisons.
std::vector<int> greedy_row_argmax(const Eigen::MatrixXd& vertex);

/// Random instance with vertex and edge scores uniform in [-1, 1]. With
/// edges, each side gets a random tree stored in both directions.
AffinityMatrix random_instance(int n_query, int n_support, bool with_edges, std::uint64_t seed);

/// Optional JSON dump of an instance (blocks, index maps, ground truth).
std::string instance_to_json(const AffinityMatrix& a, const PartialAssignment* ground_truth = nullptr);
AffinityMatrix instance_from_json(const std::string& text, PartialAssignment* ground_truth = nullptr);

}  // namespace kie
