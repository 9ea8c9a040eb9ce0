#pragma once

#include <Eigen/Core>
#include <vector>

#include "gsflow/rng.hpp"
#include "gsflow/tensor.hpp"

namespace gsflow {

enum class Activation { relu, gelu };

/// Dense network: hidden layers use `hidden_activation`, the output layer is
/// identity. Consecutive layer dimensions must chain.
struct Mlp {
    std::vector<ParamTensor> weights;  // [out x in]
    std::vector<ParamTensor> biases;   // [out]
    Activation hidden_activation = Activation::relu;

    /// dims = {in, h1, ..., out}; weights/biases init U(+-sqrt(1/fan_in)).
    static Mlp make(const std::vector<int>& dims, Activation act, RandomStream& rng);

    int num_layers() const { return static_cast<int>(weights.size()); }
    int in_dim() const { return weights.front().cols(); }
    int out_dim() const { return weights.back().rows(); }

    /// Parameter tensors in checkpoint/optimizer order: w0, b0, w1, b1, ...
    std::vector<ParamTensor*> params();
    std::vector<const ParamTensor*> params() const;
    void zero_grad();
};

/// Forward intermediates needed by the backward pass. One cache per in-flight
/// forward; caches are independent so several forwards may coexist.
struct MlpCache {
    std::vector<Eigen::MatrixXd> inputs;   // input to each layer
    std::vector<Eigen::MatrixXd> preacts;  // pre-activation of hidden layers
    bool live = false;
};

/// Batched forward; columns are samples. Pass a cache to enable backward.
Eigen::MatrixXd mlp_forward(const Mlp& net, const Eigen::MatrixXd& input, MlpCache* cache = nullptr);
Eigen::VectorXd mlp_forward(const Mlp& net, const Eigen::VectorXd& input, MlpCache* cache = nullptr);

/// Reverse pass: accumulates parameter gradients (unless disabled) and
/// returns the gradient w.r.t. the forward input for chained graphs.
/// Throws std::logic_error when the cache is not live.
Eigen::MatrixXd mlp_backward(Mlp& net, const MlpCache& cache, const Eigen::MatrixXd& upstream_grad,
                             bool accumulate_params = true);

/// Input gradient only; parameter gradients untouched.
Eigen::MatrixXd mlp_backward_input_only(const Mlp& net, const MlpCache& cache,
                                        const Eigen::MatrixXd& upstream_grad);

/// Immutable float32 snapshot of an Mlp for gradient-free batched inference
/// on hot paths (Euler rollouts, candidate screening).
struct FloatNet {
    std::vector<Eigen::MatrixXf> w;
    std::vector<Eigen::VectorXf> b;
    Activation act = Activation::relu;

    static FloatNet snapshot(const Mlp& net);
    Eigen::MatrixXf forward(const Eigen::MatrixXf& input) const;
};

}  // namespace gsflow
