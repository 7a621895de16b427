// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include <Eigen/Dense>

#include "kie/rng.hpp"

namespace kie {

/// Weights and biases of a dense stack; also used for gradients and the
/// ADAM moment buffers, which mirror the parameter shapes.
struct MlpParams {
    std::vector<Eigen::MatrixXd> weights;  // layer l: out_l x in_l
    std::vector<Eigen::VectorXd> biases;

    MlpParams zeros_like() const;
    void set_zero();
    MlpParams& operator+=(const MlpParams& other);
    MlpParams& operator*=(double s);
    bool all_finite() const;
    Eigen::Index size() const;
};

/// Activations kept from a forward pass for the matching backward pass.
struct MlpCache {
    Eigen::MatrixXd input;                    // N x in, plain inputs only
    Eigen::MatrixXd left, right;              // paired inputs only
    std::vector<int> left_index, right_index;
    bool paired = false;
    std::vector<Eigen::MatrixXd> pre;         // per layer, N x out_l
    std::vector<Eigen::MatrixXd> post;        // hidden layers only
    std::vector<Eigen::MatrixXd> slope;       // activation derivative at pre, hidden layers only
    Eigen::VectorXd output;                   // N

    bool empty() const { return pre.empty(); }
};

/// Dense network with softplus hidden units and a linear scalar output.
class Mlp {
public:
    Mlp() = default;

    /// Layer sizes {input_dim, hidden..., 1}, uniform(-s, s) Glorot init.
    static Mlp glorot(const std::vector<int>& sizes, Rng& rng);
    static Mlp with_default_hidden(int input_dim, Rng& rng) { return glorot({input_dim, 64, 64, 1}, rng); }

    /// Single linear layer f(v) = coeff . v + bias; used as a test stub.
    static Mlp linear(int input_dim, double coeff, double bias);

    int input_dim() const;
    const MlpParams& params() const { return params_; }
    MlpParams& params() { return params_; }

    /// Runs rows of X through the network.
    MlpCache forward(const Eigen::MatrixXd& x) const;
    Eigen::VectorXd evaluate(const Eigen::MatrixXd& x) const { return forward(x).output; }

    /// Row r sees the concatenation left.row(left_index[r]) ++ right.row(right_index[r])
    /// without materializing it; the first layer is split across the two halves.
    MlpCache forward_paired(const Eigen::MatrixXd& left, const Eigen::MatrixXd& right,
                            std::vector<int> left_index, std::vector<int> right_index) const;

    /// Accumulates dL/dtheta into grad given dL/doutput per row.
    void backward(const MlpCache& cache, const Eigen::VectorXd& d_output, MlpParams& grad) const;

private:
    void run_from_first_layer(MlpCache& cache) const;

    MlpParams params_;
};

}  // namespace kie
