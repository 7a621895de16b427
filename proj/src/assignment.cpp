// SPDX-License-Identifier: Apache-2.0
#include "kie/assignment.hpp"

#include <stdexcept>

namespace kie {

PartialAssignment PartialAssignment::from_dense(const Eigen::MatrixXd& p) {
    PartialAssignment out(static_cast<int>(p.rows()), static_cast<int>(p.cols()));
    for (int i = 0; i < p.rows(); ++i) {
        for (int a = 0; a < p.cols(); ++a) {
            if (p(i, a) == 0.0) continue;
            if (p(i, a) != 1.0 || out.matched(i)) throw std::invalid_argument("not a partial assignment matrix");
            out.set(i, a);
        }
    }
    if (!out.is_feasible()) throw std::invalid_argument("column used twice");
    return out;
}

int PartialAssignment::n_matched() const {
    int n = 0;
    for (int c : col_of_row_) n += c != kUnmatched;
    return n;
}

bool PartialAssignment::is_feasible() const {
    std::vector<bool> used(static_cast<std::size_t>(n_cols_), false);
    for (int c : col_of_row_) {
        if (c == kUnmatched) continue;
        if (c < 0 || c >= n_cols_ || used[c]) return false;
        used[c] = true;
    }
    return true;
}

Eigen::MatrixXd PartialAssignment::dense() const {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(rows(), n_cols_);
    for (int i = 0; i < rows(); ++i) {
        if (matched(i)) p(i, col_of_row_[i]) = 1.0;
    }
    return p;
}

}  // namespace kie
