#include "gsflow/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace gsflow {

ParamTensor ParamTensor::zeros(std::vector<int> shape) {
    long n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("ParamTensor: non-positive dimension");
        n *= d;
    }
    ParamTensor p;
    p.shape = std::move(shape);
    p.values = Eigen::VectorXd::Zero(n);
    p.grad = Eigen::VectorXd::Zero(n);
    return p;
}

AdamState AdamState::for_params(const ParamTensor& p, double lr) {
    AdamState s;
    s.m = Eigen::VectorXd::Zero(p.size());
    s.v = Eigen::VectorXd::Zero(p.size());
    s.lr = lr;
    return s;
}

void adam_step(AdamState& state, ParamTensor& params) {
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: state size does not match parameter count");
    ++state.step;
    const auto& g = params.grad;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g;
    state.v = state.beta2 * state.v.array().matrix() + (1.0 - state.beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    params.values.array() -=
        state.lr * (state.m.array() / bc1) /
        ((state.v.array() / bc2).sqrt() + state.eps);
    params.zero_grad();
}

}  // namespace gsflow
