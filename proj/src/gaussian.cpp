#include "gsflow/gaussian.hpp"

#include <stdexcept>

namespace gsflow {

Eigen::VectorXd gaussian_sample(const DiagGaussian& dist, const Eigen::VectorXd& eps) {
    if (eps.size() != dist.mean.size())
        throw std::invalid_argument("gaussian_sample: eps dim mismatch");
    return dist.mean.array() + dist.log_std.array().exp() * eps.array();
}

double gaussian_log_prob(const DiagGaussian& dist, const Eigen::VectorXd& x) {
    if (x.size() != dist.mean.size())
        throw std::invalid_argument("gaussian_log_prob: dim mismatch");
    const auto sigma = dist.log_std.array().exp();
    const auto z = (x.array() - dist.mean.array()) / sigma;
    return (-0.5 * z.square() - dist.log_std.array() - 0.5 * kLogTwoPi).sum();
}

double gaussian_kl_to_standard(const DiagGaussian& dist) {
    const auto var = (2.0 * dist.log_std.array()).exp();
    return (0.5 * (dist.mean.array().square() + var - 1.0 - 2.0 * dist.log_std.array())).sum();
}

Eigen::RowVectorXd gaussian_log_prob_cols(const Eigen::MatrixXd& mean,
                                          const Eigen::MatrixXd& log_std,
                                          const Eigen::MatrixXd& x) {
    const auto sigma = log_std.array().exp();
    const auto z = (x.array() - mean.array()) / sigma;
    return (-0.5 * z.square() - log_std.array() - 0.5 * kLogTwoPi).colwise().sum();
}

Eigen::RowVectorXd gaussian_kl_to_standard_cols(const Eigen::MatrixXd& mean,
                                                const Eigen::MatrixXd& log_std) {
    const auto var = (2.0 * log_std.array()).exp();
    return (0.5 * (mean.array().square() + var - 1.0 - 2.0 * log_std.array())).colwise().sum();
}

}  // namespace gsflow
