#pragma once

#include <Eigen/Core>

namespace gsflow {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kLogTwoPi = 1.8378770664093454836;

/// Diagonal Gaussian over R^d. Producers clamp log_std to
/// [kLogStdMin, kLogStdMax] before constructing one.
struct DiagGaussian {
    Eigen::VectorXd mean;
    Eigen::VectorXd log_std;

    Eigen::VectorXd std() const { return log_std.array().exp(); }
};

/// mean + exp(log_std) .* eps
Eigen::VectorXd gaussian_sample(const DiagGaussian& dist, const Eigen::VectorXd& eps);

/// Sum over dims of -0.5*((x-mu)/sigma)^2 - log sigma - 0.5*log(2*pi).
/// Squash corrections, when any, are the caller's responsibility.
double gaussian_log_prob(const DiagGaussian& dist, const Eigen::VectorXd& x);

/// KL(N(mu, sigma^2) || N(0, I)) = sum 0.5*(mu^2 + sigma^2 - 1 - 2*log sigma).
double gaussian_kl_to_standard(const DiagGaussian& dist);

/// Column-batched forms: mean/log_std/x hold one sample per column; results
/// are per-column row vectors.
Eigen::RowVectorXd gaussian_log_prob_cols(const Eigen::MatrixXd& mean,
                                          const Eigen::MatrixXd& log_std,
                                          const Eigen::MatrixXd& x);
Eigen::RowVectorXd gaussian_kl_to_standard_cols(const Eigen::MatrixXd& mean,
                                                const Eigen::MatrixXd& log_std);

}  // namespace gsflow
