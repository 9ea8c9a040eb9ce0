#pragma once

#include <Eigen/Core>
#include <vector>

namespace gsflow {

/// Flat parameter storage with an explicit gradient slot. 2-d tensors are
/// interpreted as [out x in] weight matrices (column-major flat layout),
/// 1-d tensors as bias vectors.
struct ParamTensor {
    std::vector<int> shape;
    Eigen::VectorXd values;
    Eigen::VectorXd grad;

    static ParamTensor zeros(std::vector<int> shape);

    int size() const { return static_cast<int>(values.size()); }
    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const { return shape.size() > 1 ? shape[1] : 1; }

    Eigen::Map<Eigen::MatrixXd> matrix() {
        return {values.data(), rows(), cols()};
    }
    Eigen::Map<const Eigen::MatrixXd> matrix() const {
        return {values.data(), rows(), cols()};
    }
    Eigen::Map<Eigen::MatrixXd> grad_matrix() {
        return {grad.data(), rows(), cols()};
    }

    void zero_grad() { grad.setZero(); }
};

/// Standard Adam state tracking one ParamTensor.
struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long step = 0;
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_params(const ParamTensor& p, double lr = 3e-4);
};

/// Bias-corrected Adam update; zeroes the gradient afterwards.
void adam_step(AdamState& state, ParamTensor& params);

}  // namespace gsflow
