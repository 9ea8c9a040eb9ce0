#pragma once

#include <Eigen/Core>
#include <vector>

#include "gsflow/mlp.hpp"
#include "gsflow/rng.hpp"

namespace gsflow {

/// Twin Q-networks with Polyak-averaged targets. Targets are hard-synced at
/// construction.
struct TwinCritic {
    Mlp q1, q2, q1_target, q2_target;
    double tau = 0.005;
    double gamma = 0.99;

    static TwinCritic make(int state_dim, int action_dim, const std::vector<int>& hidden,
                           double tau, double gamma, RandomStream& rng);
    void hard_sync();
};

/// Per-column min(Q1, Q2) over (s, a) pairs; `use_target` switches to the
/// target networks.
Eigen::VectorXd q_min(const TwinCritic& critic, const Eigen::MatrixXd& S,
                      const Eigen::MatrixXd& A, bool use_target = false);

/// Entropy-augmented TD target, with the bootstrap zeroed on terminal
/// transitions: y = r + gamma*(1-done)*(min Q' - alpha2*logpi(a'|s')).
/// No gradients flow anywhere.
Eigen::VectorXd td_target(const TwinCritic& critic, const Eigen::VectorXd& rewards,
                          const Eigen::VectorXd& done, const Eigen::MatrixXd& S_next,
                          const Eigen::MatrixXd& A_next, const Eigen::VectorXd& logp_next,
                          double alpha2);

/// Mean over the batch of (Q1 - y)^2 + (Q2 - y)^2; gradients into q1 and q2.
double critic_loss(TwinCritic& critic, const Eigen::MatrixXd& S, const Eigen::MatrixXd& A,
                   const Eigen::VectorXd& y);

/// theta' <- tau*theta + (1-tau)*theta' for both critics.
void polyak_update(TwinCritic& critic);

}  // namespace gsflow
