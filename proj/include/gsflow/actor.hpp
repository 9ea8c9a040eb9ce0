#pragma once

#include <Eigen/Core>
#include <vector>

#include "gsflow/critic.hpp"
#include "gsflow/mlp.hpp"
#include "gsflow/rng.hpp"
#include "gsflow/tensor.hpp"

namespace gsflow {

inline constexpr double kSquashEps = 1e-6;

enum class ActMode { sample, mean };

/// One-step student policy: trunk features (relu applied by the actor) feed
/// a mean head and a log-std head; actions are tanh-squashed into the action
/// box. The same network doubles as the deterministic student of the FQL and
/// BC baselines by using the mean path only.
struct StochasticActor {
    Mlp trunk;         // concat(s, x_hat) -> features
    Mlp mean_head;     // features -> action_dim
    Mlp log_std_head;  // features -> action_dim
    bool squash = true;
    Eigen::VectorXd action_low, action_high;

    static StochasticActor make(int state_dim, int noise_dim, int action_dim,
                                const std::vector<int>& hidden, const Eigen::VectorXd& action_low,
                                const Eigen::VectorXd& action_high, RandomStream& rng);
    int action_dim() const { return mean_head.out_dim(); }
};

struct ActResult {
    Eigen::VectorXd action;
    double log_prob = 0.0;
};

/// mode=sample draws eps from rng; mode=mean squashes the mean and reports
/// the log-density at that point. Log-probs include the tanh squash
/// correction -sum log(1 - tanh(u)^2 + eps) plus the box-scale term.
ActResult act(const StochasticActor& actor, const Eigen::VectorXd& s,
              const Eigen::VectorXd& x_hat, ActMode mode, RandomStream* rng);

/// Replay form with explicit reparameterization noise.
ActResult act_with_eps(const StochasticActor& actor, const Eigen::VectorXd& s,
                       const Eigen::VectorXd& x_hat, const Eigen::VectorXd& eps);

/// Gradient-free batched policy evaluation for TD targets and rollouts.
struct ActorEval {
    Eigen::MatrixXd mean_action;     // squash(mu)
    Eigen::MatrixXd sampled_action;  // squash(mu + sigma.*eps); empty without Eps
    Eigen::RowVectorXd logp_sampled;
};
ActorEval actor_eval(const StochasticActor& actor, const Eigen::MatrixXd& S,
                     const Eigen::MatrixXd& Xhat, const Eigen::MatrixXd* Eps);

struct ActorLossParts {
    double total = 0.0;
    double distill = 0.0;
    double q_term = 0.0;
    double entropy = 0.0;
};

/// Composite distillation loss alpha1*distill + q_term - alpha2*entropy.
/// The distill term compares the squashed mean head against the teacher
/// action produced on the same x_hat; the Q term uses a reparameterized
/// sample through min(Q1,Q2) with gradients into the actor only; entropy is
/// the single-sample estimator -log pi(a). Columns are batch samples.
ActorLossParts actor_loss(StochasticActor& actor, const Eigen::MatrixXd& A_teacher,
                          const TwinCritic& critic, const Eigen::MatrixXd& S,
                          const Eigen::MatrixXd& Xhat, double alpha1, double alpha2,
                          const Eigen::MatrixXd& Eps);

/// Deterministic variant (mean action everywhere, no entropy): used by the
/// ours-without-controllable-entropy ablation.
ActorLossParts actor_loss_deterministic(StochasticActor& actor, const Eigen::MatrixXd& A_teacher,
                                        const TwinCritic& critic, const Eigen::MatrixXd& S,
                                        const Eigen::MatrixXd& Xhat, double alpha1);

/// FQL baseline loss on uninformed Gaussian noise:
/// -minQ(s, pi_det(s,x0)) + alpha*||a_teacher(x0) - pi_det(s,x0)||^2.
ActorLossParts fql_actor_loss(StochasticActor& det_actor, const Eigen::MatrixXd& A_teacher,
                              const TwinCritic& critic, const Eigen::MatrixXd& S,
                              const Eigen::MatrixXd& X0, double alpha);

/// Plain behavioral cloning: mean ||pi_det(s, 0) - a||^2.
double bc_loss(StochasticActor& det_actor, const Eigen::MatrixXd& S, const Eigen::MatrixXd& A);

/// Learned entropy temperature alpha2 = exp(log_alpha2) tracking a target
/// entropy; owns its Adam state.
struct EntropyTemp {
    ParamTensor log_alpha2;
    double target_entropy = -1.0;
    AdamState opt;

    static EntropyTemp make(double alpha2_init, double target_entropy, double lr);
    double alpha2() const { return std::exp(log_alpha2.values[0]); }
    void step() { adam_step(opt, log_alpha2); }
};

/// L = alpha2 * (H - H_target) with H detached; gradient accumulates into
/// log_alpha2 so that minimizing raises alpha2 when entropy is low.
double temp_loss(EntropyTemp& temp, double measured_entropy);

}  // namespace gsflow
