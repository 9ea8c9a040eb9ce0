#include "gsflow/actor.hpp"

#include <cmath>
#include <stdexcept>

#include "gsflow/gaussian.hpp"

namespace gsflow {

StochasticActor StochasticActor::make(int state_dim, int noise_dim, int action_dim,
                                      const std::vector<int>& hidden,
                                      const Eigen::VectorXd& action_low,
                                      const Eigen::VectorXd& action_high, RandomStream& rng) {
    if (hidden.empty()) throw std::invalid_argument("StochasticActor: need hidden layers");
    std::vector<int> trunk_dims;
    trunk_dims.push_back(state_dim + noise_dim);
    for (int h : hidden) trunk_dims.push_back(h);
    StochasticActor a;
    a.trunk = Mlp::make(trunk_dims, Activation::relu, rng);
    a.mean_head = Mlp::make({hidden.back(), action_dim}, Activation::relu, rng);
    a.log_std_head = Mlp::make({hidden.back(), action_dim}, Activation::relu, rng);
    a.action_low = action_low;
    a.action_high = action_high;
    return a;
}

namespace {

struct SquashScale {
    Eigen::ArrayXd c;  // (hi - lo) / 2
    Eigen::ArrayXd m;  // (hi + lo) / 2
};

SquashScale squash_scale(const StochasticActor& actor) {
    return {(actor.action_high - actor.action_low).array() / 2.0,
            (actor.action_high + actor.action_low).array() / 2.0};
}

/// Forward through trunk (+ explicit feature relu) and both heads.
struct PolicyForward {
    MlpCache trunk_cache, mean_cache, log_std_cache;
    Eigen::MatrixXd feat_raw, feat;  // before/after the feature relu
    Eigen::MatrixXd mu, log_std_raw, log_std, sigma;
};

PolicyForward policy_forward(const StochasticActor& actor, const Eigen::MatrixXd& S,
                             const Eigen::MatrixXd& Xhat, bool want_log_std) {
    if (S.cols() != Xhat.cols()) throw std::invalid_argument("actor: batch size mismatch");
    if (Xhat.rows() + S.rows() != actor.trunk.in_dim())
        throw std::invalid_argument("actor: x_hat dim mismatch");
    Eigen::MatrixXd in(S.rows() + Xhat.rows(), S.cols());
    in.topRows(S.rows()) = S;
    in.bottomRows(Xhat.rows()) = Xhat;
    PolicyForward f;
    f.feat_raw = mlp_forward(actor.trunk, in, &f.trunk_cache);
    f.feat = f.feat_raw.cwiseMax(0.0);
    f.mu = mlp_forward(actor.mean_head, f.feat, &f.mean_cache);
    if (want_log_std) {
        f.log_std_raw = mlp_forward(actor.log_std_head, f.feat, &f.log_std_cache);
        f.log_std = f.log_std_raw.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
        f.sigma = f.log_std.array().exp();
    }
    return f;
}

/// Backward from head gradients into trunk parameters.
void policy_backward(StochasticActor& actor, PolicyForward& f, const Eigen::MatrixXd& dmu,
                     const Eigen::MatrixXd* dlog_std_raw) {
    Eigen::MatrixXd dfeat = mlp_backward(actor.mean_head, f.mean_cache, dmu);
    if (dlog_std_raw)
        dfeat += mlp_backward(actor.log_std_head, f.log_std_cache, *dlog_std_raw);
    const Eigen::MatrixXd dfeat_raw =
        dfeat.cwiseProduct((f.feat_raw.array() > 0.0).cast<double>().matrix());
    mlp_backward(actor.trunk, f.trunk_cache, dfeat_raw);
}

Eigen::MatrixXd squash(const SquashScale& sc, const Eigen::MatrixXd& u) {
    Eigen::MatrixXd a(u.rows(), u.cols());
    for (int c = 0; c < u.cols(); ++c)
        a.col(c) = (sc.m + sc.c * u.col(c).array().tanh()).matrix();
    return a;
}

/// log pi(a) for u per column: Gaussian log-density minus the squash
/// log-det correction sum(log c + log(1 - tanh(u)^2 + eps)).
Eigen::RowVectorXd squashed_log_prob(const SquashScale& sc, const Eigen::MatrixXd& mu,
                                     const Eigen::MatrixXd& log_std, const Eigen::MatrixXd& u) {
    Eigen::RowVectorXd base = gaussian_log_prob_cols(mu, log_std, u);
    const double log_c_sum = sc.c.log().sum();
    const auto th = u.array().tanh();
    const Eigen::RowVectorXd corr = (1.0 - th.square() + kSquashEps).log().colwise().sum();
    return base.array() - corr.array() - log_c_sum;
}

}  // namespace

ActResult act_with_eps(const StochasticActor& actor, const Eigen::VectorXd& s,
                       const Eigen::VectorXd& x_hat, const Eigen::VectorXd& eps) {
    PolicyForward f = policy_forward(actor, s, x_hat, /*want_log_std=*/true);
    const SquashScale sc = squash_scale(actor);
    const Eigen::MatrixXd u = f.mu + f.sigma.cwiseProduct(eps);
    ActResult r;
    r.action = squash(sc, u).col(0);
    r.log_prob = squashed_log_prob(sc, f.mu, f.log_std, u)[0];
    return r;
}

ActResult act(const StochasticActor& actor, const Eigen::VectorXd& s,
              const Eigen::VectorXd& x_hat, ActMode mode, RandomStream* rng) {
    if (mode == ActMode::sample) {
        if (!rng) throw std::invalid_argument("act: sample mode needs an eps stream");
        return act_with_eps(actor, s, x_hat, rng->normal_vec(actor.action_dim()));
    }
    PolicyForward f = policy_forward(actor, s, x_hat, /*want_log_std=*/true);
    const SquashScale sc = squash_scale(actor);
    ActResult r;
    r.action = squash(sc, f.mu).col(0);
    r.log_prob = squashed_log_prob(sc, f.mu, f.log_std, f.mu)[0];
    return r;
}

ActorEval actor_eval(const StochasticActor& actor, const Eigen::MatrixXd& S,
                     const Eigen::MatrixXd& Xhat, const Eigen::MatrixXd* Eps) {
    PolicyForward f = policy_forward(actor, S, Xhat, /*want_log_std=*/true);
    const SquashScale sc = squash_scale(actor);
    ActorEval e;
    e.mean_action = squash(sc, f.mu);
    if (Eps) {
        const Eigen::MatrixXd u = f.mu + f.sigma.cwiseProduct(*Eps);
        e.sampled_action = squash(sc, u);
        e.logp_sampled = squashed_log_prob(sc, f.mu, f.log_std, u);
    }
    return e;
}

namespace {

/// Per-column input-gradient of min(Q1,Q2) w.r.t. the action, computed in
/// one batched pass per critic; gradient follows the active min branch.
Eigen::MatrixXd min_q_action_grad(const TwinCritic& critic, const Eigen::MatrixXd& S,
                                  const Eigen::MatrixXd& A, Eigen::VectorXd* q_out) {
    Eigen::MatrixXd in(S.rows() + A.rows(), S.cols());
    in.topRows(S.rows()) = S;
    in.bottomRows(A.rows()) = A;
    thread_local MlpCache c1, c2;
    const Eigen::RowVectorXd q1 = mlp_forward(critic.q1, in, &c1).row(0);
    const Eigen::RowVectorXd q2 = mlp_forward(critic.q2, in, &c2).row(0);
    const Eigen::RowVectorXd pick1 = (q1.array() <= q2.array()).cast<double>();
    if (q_out) *q_out = q1.cwiseMin(q2).transpose();
    const Eigen::MatrixXd g1 = mlp_backward_input_only(critic.q1, c1, pick1);
    const Eigen::MatrixXd g2 =
        mlp_backward_input_only(critic.q2, c2, (1.0 - pick1.array()).matrix());
    return (g1 + g2).bottomRows(A.rows());
}

}  // namespace

ActorLossParts actor_loss(StochasticActor& actor, const Eigen::MatrixXd& A_teacher,
                          const TwinCritic& critic, const Eigen::MatrixXd& S,
                          const Eigen::MatrixXd& Xhat, double alpha1, double alpha2,
                          const Eigen::MatrixXd& Eps) {
    const int B = static_cast<int>(S.cols());
    if (B == 0) throw std::domain_error("actor_loss: empty batch");
    PolicyForward f = policy_forward(actor, S, Xhat, /*want_log_std=*/true);
    const SquashScale sc = squash_scale(actor);

    // distill: squashed mean head only
    const Eigen::MatrixXd tanh_mu = f.mu.array().tanh().matrix();
    Eigen::MatrixXd a_mean(f.mu.rows(), B);
    for (int c = 0; c < B; ++c) a_mean.col(c) = (sc.m + sc.c * tanh_mu.col(c).array()).matrix();
    const Eigen::MatrixXd distill_resid = a_mean - A_teacher;

    // reparameterized sample through the critic
    const Eigen::MatrixXd u = f.mu + f.sigma.cwiseProduct(Eps);
    const Eigen::MatrixXd tanh_u = u.array().tanh().matrix();
    Eigen::MatrixXd a_samp(u.rows(), B);
    for (int c = 0; c < B; ++c) a_samp.col(c) = (sc.m + sc.c * tanh_u.col(c).array()).matrix();
    Eigen::VectorXd q;
    const Eigen::MatrixXd dq_da = min_q_action_grad(critic, S, a_samp, &q);

    const Eigen::RowVectorXd logp = squashed_log_prob(sc, f.mu, f.log_std, u);

    ActorLossParts parts;
    parts.distill = distill_resid.colwise().squaredNorm().mean();
    parts.q_term = -q.mean();
    parts.entropy = -logp.mean();
    parts.total = alpha1 * parts.distill + parts.q_term - alpha2 * parts.entropy;

    // --- backward ---
    Eigen::MatrixXd dmu(f.mu.rows(), B);
    Eigen::MatrixXd dlog_std(f.mu.rows(), B);

    // distill path (mean head only)
    for (int c = 0; c < B; ++c)
        dmu.col(c) = (alpha1 * (2.0 / B) * distill_resid.col(c).array() * sc.c *
                      (1.0 - tanh_mu.col(c).array().square()))
                         .matrix();

    // q path: d(-q_mean)/da = -(1/B)*dq/da, through the squash and reparam
    const Eigen::ArrayXXd dsquash_u =
        (1.0 - tanh_u.array().square()).colwise() * sc.c;  // da/du per column
    const Eigen::MatrixXd du_q = (-(1.0 / B) * dq_da.array() * dsquash_u).matrix();
    dmu += du_q;
    dlog_std = du_q.cwiseProduct(f.sigma).cwiseProduct(Eps);

    // entropy path: loss += alpha2 * mean(logp)
    // d logp/dmu = -G'(u); d logp/dlog_std = -1 - G'(u)*sigma*eps
    const Eigen::ArrayXXd gp = (-2.0 * tanh_u.array() * (1.0 - tanh_u.array().square())) /
                               (1.0 - tanh_u.array().square() + kSquashEps);
    dmu += (alpha2 / B) * (-gp).matrix();
    dlog_std +=
        (alpha2 / B) * ((-1.0 - gp * f.sigma.array() * Eps.array()).matrix());

    // clamp subgradient on the raw log-std
    const auto keep = (f.log_std_raw.array() >= kLogStdMin && f.log_std_raw.array() <= kLogStdMax)
                          .cast<double>();
    const Eigen::MatrixXd dlog_std_raw = dlog_std.cwiseProduct(keep.matrix());

    policy_backward(actor, f, dmu, &dlog_std_raw);
    return parts;
}

ActorLossParts actor_loss_deterministic(StochasticActor& actor, const Eigen::MatrixXd& A_teacher,
                                        const TwinCritic& critic, const Eigen::MatrixXd& S,
                                        const Eigen::MatrixXd& Xhat, double alpha1) {
    const int B = static_cast<int>(S.cols());
    if (B == 0) throw std::domain_error("actor_loss: empty batch");
    PolicyForward f = policy_forward(actor, S, Xhat, /*want_log_std=*/false);
    const SquashScale sc = squash_scale(actor);

    const Eigen::MatrixXd tanh_mu = f.mu.array().tanh().matrix();
    Eigen::MatrixXd a_mean(f.mu.rows(), B);
    for (int c = 0; c < B; ++c) a_mean.col(c) = (sc.m + sc.c * tanh_mu.col(c).array()).matrix();
    const Eigen::MatrixXd distill_resid = a_mean - A_teacher;

    Eigen::VectorXd q;
    const Eigen::MatrixXd dq_da = min_q_action_grad(critic, S, a_mean, &q);

    ActorLossParts parts;
    parts.distill = distill_resid.colwise().squaredNorm().mean();
    parts.q_term = -q.mean();
    parts.total = alpha1 * parts.distill + parts.q_term;

    const Eigen::ArrayXXd dsquash = (1.0 - tanh_mu.array().square()).colwise() * sc.c;
    const Eigen::MatrixXd dmu =
        ((alpha1 * (2.0 / B) * distill_resid.array() - (1.0 / B) * dq_da.array()) * dsquash)
            .matrix();
    policy_backward(actor, f, dmu, nullptr);
    return parts;
}

ActorLossParts fql_actor_loss(StochasticActor& det_actor, const Eigen::MatrixXd& A_teacher,
                              const TwinCritic& critic, const Eigen::MatrixXd& S,
                              const Eigen::MatrixXd& X0, double alpha) {
    // Same composite as the deterministic path with the BC weight applied to
    // the teacher residual; kept separate because the noise is an uninformed
    // Gaussian rather than a decoded prior.
    return actor_loss_deterministic(det_actor, A_teacher, critic, S, X0, alpha);
}

double bc_loss(StochasticActor& det_actor, const Eigen::MatrixXd& S, const Eigen::MatrixXd& A) {
    const int B = static_cast<int>(S.cols());
    if (B == 0) throw std::domain_error("bc_loss: empty batch");
    const Eigen::MatrixXd zero_noise =
        Eigen::MatrixXd::Zero(det_actor.trunk.in_dim() - S.rows(), B);
    PolicyForward f = policy_forward(det_actor, S, zero_noise, /*want_log_std=*/false);
    const SquashScale sc = squash_scale(det_actor);
    const Eigen::MatrixXd tanh_mu = f.mu.array().tanh().matrix();
    Eigen::MatrixXd a_mean(f.mu.rows(), B);
    for (int c = 0; c < B; ++c) a_mean.col(c) = (sc.m + sc.c * tanh_mu.col(c).array()).matrix();
    const Eigen::MatrixXd resid = a_mean - A;
    const double loss = resid.colwise().squaredNorm().mean();
    const Eigen::ArrayXXd dsquash = (1.0 - tanh_mu.array().square()).colwise() * sc.c;
    const Eigen::MatrixXd dmu = ((2.0 / B) * resid.array() * dsquash).matrix();
    policy_backward(det_actor, f, dmu, nullptr);
    return loss;
}

EntropyTemp EntropyTemp::make(double alpha2_init, double target_entropy, double lr) {
    if (alpha2_init <= 0.0) throw std::invalid_argument("EntropyTemp: alpha2_init must be > 0");
    EntropyTemp t;
    t.log_alpha2 = ParamTensor::zeros({1});
    t.log_alpha2.values[0] = std::log(alpha2_init);
    t.target_entropy = target_entropy;
    t.opt = AdamState::for_params(t.log_alpha2, lr);
    return t;
}

double temp_loss(EntropyTemp& temp, double measured_entropy) {
    const double a2 = temp.alpha2();
    const double loss = a2 * (measured_entropy - temp.target_entropy);
    temp.log_alpha2.grad[0] += a2 * (measured_entropy - temp.target_entropy);
    return loss;
}

}  // namespace gsflow
