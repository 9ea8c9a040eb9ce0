#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "gsflow/mlp.hpp"
#include "gsflow/rng.hpp"

namespace gsflow {

/// The scalar time enters the velocity net as Fourier features
/// [t, sin(2^j 2pi t), cos(2^j 2pi t)] for j = 0..3; a raw scalar leaves the
/// field too smooth to fit the thin crescent modes.
inline constexpr int kTimeFeatureDim = 9;
inline constexpr int kSpaceFeaturesPerDim = 5;
void fill_time_features(double t, double* out);
void fill_space_features(const double* x, int dim, double* out);

/// Flow-matching behavioral-cloning teacher: a conditional velocity field
/// v(x_t, s, t) with a K-step Euler sampler. Sampled actions are clipped to
/// the action box after the final step.
struct FlowTeacher {
    Mlp velocity_net;  // input: concat(x_t, s, time_features(t))
    int euler_steps = 10;
    int action_dim = 2;
    int state_dim = 2;
    Eigen::VectorXd action_low, action_high;

    static FlowTeacher make(int state_dim, int action_dim, const std::vector<int>& hidden,
                            int euler_steps, const Eigen::VectorXd& action_low,
                            const Eigen::VectorXd& action_high, RandomStream& rng);
};

/// CFM regression loss with captured draws: x_t = (1-t)*x0 + t*a, target
/// velocity a - x0; mean of per-sample squared norms. Accumulates gradients
/// into the velocity net. Columns of S/A/X0 are samples, T holds one time
/// per sample.
double cfm_loss(FlowTeacher& teacher, const Eigen::MatrixXd& S, const Eigen::MatrixXd& A,
                const Eigen::MatrixXd& X0, const Eigen::VectorXd& T);

/// Convenience wrapper drawing x0 ~ N(0,I) and t ~ U(0,1) from `rng`
/// (x0 column-major first, then the t vector). Throws on an empty batch.
double cfm_loss(FlowTeacher& teacher, const Eigen::MatrixXd& S, const Eigen::MatrixXd& A,
                RandomStream& rng);

/// Deterministic K-step Euler integration of the velocity field from x0.
Eigen::VectorXd euler_sample(const FlowTeacher& teacher, const Eigen::VectorXd& s,
                             const Eigen::VectorXd& x0);

/// Batched double-precision integration; columns are independent samples.
Eigen::MatrixXd euler_sample_batch(const FlowTeacher& teacher, const Eigen::MatrixXd& S,
                                   const Eigen::MatrixXd& X0);

/// Gradient-free float32 rollout through a velocity-net snapshot; used on hot
/// paths (candidate screening, distillation targets, analysis sweeps).
Eigen::MatrixXd euler_rollout_fast(const FloatNet& velocity, int euler_steps,
                                   const Eigen::MatrixXd& S, const Eigen::MatrixXd& X0,
                                   const Eigen::VectorXd& action_low,
                                   const Eigen::VectorXd& action_high);

/// n i.i.d. noise draws and their teacher actions on one state, integrated
/// jointly (one velocity forward per Euler step for all candidates).
std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> sample_candidates(
    const FlowTeacher& teacher, const Eigen::VectorXd& s, int n, RandomStream& rng);

}  // namespace gsflow
