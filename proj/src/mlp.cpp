// SPDX-License-Identifier: Apache-2.0
#include "kie/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace kie {

namespace {

/// Softplus of every entry, and its derivative (the logistic sigmoid) from the same exp.
void softplus(const Eigen::MatrixXd& z, Eigen::MatrixXd& value, Eigen::MatrixXd& slope) {
    const Eigen::ArrayXXd e = (-z.array().abs()).exp();
    const Eigen::ArrayXXd denom = 1.0 + e;
    value = (z.array().max(0.0) + denom.log()).matrix();
    slope = (z.array() >= 0.0).select(denom.inverse(), e / denom).matrix();
}

}  // namespace

MlpParams MlpParams::zeros_like() const {
    MlpParams z;
    for (const auto& w : weights) z.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : biases) z.biases.push_back(Eigen::VectorXd::Zero(b.size()));
    return z;
}

void MlpParams::set_zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
}

MlpParams& MlpParams::operator+=(const MlpParams& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] += other.weights[l];
        biases[l] += other.biases[l];
    }
    return *this;
}

MlpParams& MlpParams::operator*=(double s) {
    for (auto& w : weights) w *= s;
    for (auto& b : biases) b *= s;
    return *this;
}

bool MlpParams::all_finite() const {
    for (const auto& w : weights) {
        if (!w.allFinite()) return false;
    }
    for (const auto& b : biases) {
        if (!b.allFinite()) return false;
    }
    return true;
}

Eigen::Index MlpParams::size() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

Mlp Mlp::glorot(const std::vector<int>& sizes, Rng& rng) {
    if (sizes.size() < 2 || sizes.back() != 1) throw std::invalid_argument("mlp needs sizes {in, ..., 1}");
    Mlp m;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int fan_in = sizes[l];
        const int fan_out = sizes[l + 1];
        const double s = std::sqrt(6.0 / (fan_in + fan_out));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r) {
            for (int c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-s, s);
        }
        m.params_.weights.push_back(std::move(w));
        m.params_.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return m;
}

Mlp Mlp::linear(int input_dim, double coeff, double bias) {
    Mlp m;
    m.params_.weights.push_back(Eigen::MatrixXd::Constant(1, input_dim, coeff));
    m.params_.biases.push_back(Eigen::VectorXd::Constant(1, bias));
    return m;
}

int Mlp::input_dim() const {
    return params_.weights.empty() ? 0 : static_cast<int>(params_.weights.front().cols());
}

void Mlp::run_from_first_layer(MlpCache& cache) const {
    const std::size_t n_layers = params_.weights.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        if (l > 0) {
            Eigen::MatrixXd z = cache.post.back() * params_.weights[l].transpose();
            z.rowwise() += params_.biases[l].transpose();
            cache.pre.push_back(std::move(z));
        }
        if (l + 1 < n_layers) {
            cache.post.emplace_back();
            cache.slope.emplace_back();
            softplus(cache.pre.back(), cache.post.back(), cache.slope.back());
        }
    }
    cache.output = cache.pre.back().col(0);
}

MlpCache Mlp::forward(const Eigen::MatrixXd& x) const {
    if (x.cols() != input_dim()) throw std::invalid_argument("mlp input has wrong width");
    MlpCache cache;
    cache.input = x;
    Eigen::MatrixXd z = x * params_.weights[0].transpose();
    z.rowwise() += params_.biases[0].transpose();
    cache.pre.push_back(std::move(z));
    run_from_first_layer(cache);
    return cache;
}

MlpCache Mlp::forward_paired(const Eigen::MatrixXd& left, const Eigen::MatrixXd& right,
                             std::vector<int> left_index, std::vector<int> right_index) const {
    if (left.cols() + right.cols() != input_dim()) throw std::invalid_argument("mlp paired input has wrong width");
    if (left_index.size() != right_index.size()) throw std::invalid_argument("paired index lists differ in length");
    MlpCache cache;
    cache.paired = true;
    cache.left = left;
    cache.right = right;
    cache.left_index = std::move(left_index);
    cache.right_index = std::move(right_index);

    const auto& w = params_.weights[0];
    const Eigen::MatrixXd proj_left = left * w.leftCols(left.cols()).transpose();
    const Eigen::MatrixXd proj_right = right * w.rightCols(right.cols()).transpose();
    const auto n = static_cast<Eigen::Index>(cache.left_index.size());
    Eigen::MatrixXd z(n, w.rows());
    for (Eigen::Index r = 0; r < n; ++r) {
        z.row(r) = proj_left.row(cache.left_index[r]) + proj_right.row(cache.right_index[r]) +
                   params_.biases[0].transpose();
    }
    cache.pre.push_back(std::move(z));
    run_from_first_layer(cache);
    return cache;
}

void Mlp::backward(const MlpCache& cache, const Eigen::VectorXd& d_output, MlpParams& grad) const {
    if (cache.empty()) throw std::logic_error("mlp backward called before forward");
    if (d_output.size() != cache.output.size()) throw std::invalid_argument("upstream gradient has wrong length");
    const std::size_t n_layers = params_.weights.size();
    Eigen::MatrixXd delta = d_output;  // N x 1
    for (std::size_t l = n_layers; l-- > 0;) {
        grad.biases[l] += delta.colwise().sum().transpose();
        if (l == 0) {
            if (cache.paired) {
                Eigen::MatrixXd d_left = Eigen::MatrixXd::Zero(cache.left.rows(), delta.cols());
                Eigen::MatrixXd d_right = Eigen::MatrixXd::Zero(cache.right.rows(), delta.cols());
                for (Eigen::Index r = 0; r < delta.rows(); ++r) {
                    d_left.row(cache.left_index[r]) += delta.row(r);
                    d_right.row(cache.right_index[r]) += delta.row(r);
                }
                grad.weights[0].leftCols(cache.left.cols()).noalias() += d_left.transpose() * cache.left;
                grad.weights[0].rightCols(cache.right.cols()).noalias() += d_right.transpose() * cache.right;
            } else {
                grad.weights[0].noalias() += delta.transpose() * cache.input;
            }
            break;
        }
        grad.weights[l].noalias() += delta.transpose() * cache.post[l - 1];
        Eigen::MatrixXd d_in = delta * params_.weights[l];
        delta = d_in.cwiseProduct(cache.slope[l - 1]);
    }
}

}  // namespace kie
