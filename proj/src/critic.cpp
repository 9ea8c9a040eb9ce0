#include "gsflow/critic.hpp"

#include <stdexcept>

namespace gsflow {

namespace {

Eigen::MatrixXd sa_input(const Eigen::MatrixXd& S, const Eigen::MatrixXd& A) {
    Eigen::MatrixXd in(S.rows() + A.rows(), S.cols());
    in.topRows(S.rows()) = S;
    in.bottomRows(A.rows()) = A;
    return in;
}

}  // namespace

TwinCritic TwinCritic::make(int state_dim, int action_dim, const std::vector<int>& hidden,
                            double tau, double gamma, RandomStream& rng) {
    std::vector<int> dims;
    dims.push_back(state_dim + action_dim);
    for (int h : hidden) dims.push_back(h);
    dims.push_back(1);
    TwinCritic c;
    c.q1 = Mlp::make(dims, Activation::relu, rng);
    c.q2 = Mlp::make(dims, Activation::relu, rng);
    c.q1_target = c.q1;
    c.q2_target = c.q2;
    c.tau = tau;
    c.gamma = gamma;
    return c;
}

void TwinCritic::hard_sync() {
    q1_target = q1;
    q2_target = q2;
    q1_target.zero_grad();
    q2_target.zero_grad();
}

Eigen::VectorXd q_min(const TwinCritic& critic, const Eigen::MatrixXd& S,
                      const Eigen::MatrixXd& A, bool use_target) {
    const Eigen::MatrixXd in = sa_input(S, A);
    const Mlp& n1 = use_target ? critic.q1_target : critic.q1;
    const Mlp& n2 = use_target ? critic.q2_target : critic.q2;
    const Eigen::MatrixXd v1 = mlp_forward(n1, in);
    const Eigen::MatrixXd v2 = mlp_forward(n2, in);
    return v1.row(0).cwiseMin(v2.row(0)).transpose();
}

Eigen::VectorXd td_target(const TwinCritic& critic, const Eigen::VectorXd& rewards,
                          const Eigen::VectorXd& done, const Eigen::MatrixXd& S_next,
                          const Eigen::MatrixXd& A_next, const Eigen::VectorXd& logp_next,
                          double alpha2) {
    const Eigen::VectorXd min_q = q_min(critic, S_next, A_next, /*use_target=*/true);
    return rewards.array() +
           critic.gamma * (1.0 - done.array()) * (min_q.array() - alpha2 * logp_next.array());
}

double critic_loss(TwinCritic& critic, const Eigen::MatrixXd& S, const Eigen::MatrixXd& A,
                   const Eigen::VectorXd& y) {
    const int B = static_cast<int>(S.cols());
    if (B == 0) throw std::domain_error("critic_loss: empty batch");
    const Eigen::MatrixXd in = sa_input(S, A);
    thread_local MlpCache c1, c2;
    const Eigen::VectorXd v1 = mlp_forward(critic.q1, in, &c1).row(0).transpose();
    const Eigen::VectorXd v2 = mlp_forward(critic.q2, in, &c2).row(0).transpose();
    const Eigen::VectorXd r1 = v1 - y;
    const Eigen::VectorXd r2 = v2 - y;
    const double loss = (r1.squaredNorm() + r2.squaredNorm()) / B;
    mlp_backward(critic.q1, c1, (2.0 / B) * r1.transpose());
    mlp_backward(critic.q2, c2, (2.0 / B) * r2.transpose());
    return loss;
}

void polyak_update(TwinCritic& critic) {
    auto blend = [&](Mlp& target, const Mlp& online) {
        for (int l = 0; l < online.num_layers(); ++l) {
            target.weights[l].values =
                critic.tau * online.weights[l].values + (1.0 - critic.tau) * target.weights[l].values;
            target.biases[l].values =
                critic.tau * online.biases[l].values + (1.0 - critic.tau) * target.biases[l].values;
        }
    };
    blend(critic.q1_target, critic.q1);
    blend(critic.q2_target, critic.q2);
}

}  // namespace gsflow
