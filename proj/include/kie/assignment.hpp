// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include <Eigen/Dense>

namespace kie {

inline constexpr int kUnmatched = -1;

/// Binary |Fq| x |Fs| matrix with row and column sums <= 1, stored as the
/// column chosen by each query row (kUnmatched for none).
class PartialAssignment {
public:
    PartialAssignment() = default;
    PartialAssignment(int n_rows, int n_cols) : n_cols_(n_cols), col_of_row_(n_rows, kUnmatched) {}
    PartialAssignment(int n_cols, std::vector<int> col_of_row) : n_cols_(n_cols), col_of_row_(std::move(col_of_row)) {}

    static PartialAssignment from_dense(const Eigen::MatrixXd& p);

    int rows() const { return static_cast<int>(col_of_row_.size()); }
    int cols() const { return n_cols_; }
    int col(int row) const { return col_of_row_[row]; }
    bool matched(int row) const { return col_of_row_[row] != kUnmatched; }
    void set(int row, int col) { col_of_row_[row] = col; }
    const std::vector<int>& col_of_row() const { return col_of_row_; }
    int n_matched() const;

    bool at(int row, int col) const { return col_of_row_[row] == col; }

    /// Row and column sums <= 1 with in-range indices.
    bool is_feasible() const;

    Eigen::MatrixXd dense() const;

    bool operator==(const PartialAssignment&) const = default;

private:
    int n_cols_ = 0;
    std::vector<int> col_of_row_;
};

}  // namespace kie
