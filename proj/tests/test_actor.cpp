#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "gsflow/actor.hpp"
#include "gsflow/gaussian.hpp"

using namespace gsflow;

TEST_SUITE_BEGIN("student_actor");

namespace {

StochasticActor make_actor(uint64_t seed, int hidden = 16) {
    RandomStream rng(seed);
    return StochasticActor::make(2, 2, 2, {hidden, hidden}, Eigen::Vector2d(-1, -1),
                                 Eigen::Vector2d(1, 1), rng);
}

TwinCritic make_critic(uint64_t seed) {
    RandomStream rng(seed);
    return TwinCritic::make(2, 2, {16, 16}, 0.005, 0.99, rng);
}

}  // namespace

TEST_CASE("act: mean mode is deterministic") {
    StochasticActor a = make_actor(1);
    RandomStream rng(2);
    const Eigen::VectorXd s = rng.normal_vec(2), x = rng.normal_vec(2);
    const ActResult r1 = act(a, s, x, ActMode::mean, nullptr);
    const ActResult r2 = act(a, s, x, ActMode::mean, nullptr);
    CHECK((r1.action - r2.action).norm() == 0.0);
    CHECK(r1.log_prob == r2.log_prob);
}

TEST_CASE("act: squashed actions stay strictly inside the box") {
    StochasticActor a = make_actor(3);
    RandomStream rng(4);
    for (int i = 0; i < 200; ++i) {
        const ActResult r = act(a, rng.normal_vec(2), rng.normal_vec(2), ActMode::sample, &rng);
        CHECK(r.action[0] > -1.0);
        CHECK(r.action[0] < 1.0);
        CHECK(r.action[1] > -1.0);
        CHECK(r.action[1] < 1.0);
    }
}

TEST_CASE("act: clamped-to-minimum std makes samples track the mean") {
    StochasticActor a = make_actor(5);
    for (auto* p : a.log_std_head.params()) p->values.setZero();
    a.log_std_head.biases.back().values.setConstant(-20.0);  // clamps to kLogStdMin
    RandomStream rng(6);
    const Eigen::VectorXd s = rng.normal_vec(2), x = rng.normal_vec(2);
    Eigen::VectorXd eps(2);
    eps << 0.1, -0.1;
    const ActResult sampled = act_with_eps(a, s, x, eps);
    const ActResult mean = act(a, s, x, ActMode::mean, nullptr);
    CHECK((sampled.action - mean.action).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("act: empirical pre-squash std matches the head within 5%") {
    StochasticActor a = make_actor(7);
    RandomStream rng(8);
    const Eigen::VectorXd s = rng.normal_vec(2) * 0.3, x = rng.normal_vec(2) * 0.3;
    // read the head's sigma via two deterministic probes
    const ActResult m = act(a, s, x, ActMode::mean, nullptr);
    const Eigen::VectorXd mu = (m.action.array().atanh()).matrix();
    const int N = 10000;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(2), acc2 = Eigen::VectorXd::Zero(2);
    for (int i = 0; i < N; ++i) {
        const ActResult r = act(a, s, x, ActMode::sample, &rng);
        const Eigen::VectorXd u = r.action.array().atanh().matrix();
        acc += u;
        acc2 += u.cwiseProduct(u);
    }
    acc /= N;
    acc2 /= N;
    // sigma from perturbing with known eps
    Eigen::VectorXd e1(2);
    e1 << 1.0, 1.0;
    const Eigen::VectorXd u1 = act_with_eps(a, s, x, e1).action.array().atanh().matrix();
    const Eigen::VectorXd sigma = u1 - mu;
    for (int k = 0; k < 2; ++k) {
        const double emp = std::sqrt(std::max(0.0, acc2[k] - acc[k] * acc[k]));
        CHECK(std::abs(emp - sigma[k]) / sigma[k] < 0.05);
    }
}

TEST_CASE("act: log prob matches the squash-corrected closed form") {
    StochasticActor a = make_actor(9);
    RandomStream rng(10);
    const Eigen::VectorXd s = rng.normal_vec(2), x = rng.normal_vec(2);
    const Eigen::VectorXd eps = rng.normal_vec(2);
    const ActResult r = act_with_eps(a, s, x, eps);
    // recompute independently
    Eigen::MatrixXd in(4, 1);
    in << Eigen::MatrixXd(s), Eigen::MatrixXd(x);
    const Eigen::MatrixXd feat = mlp_forward(a.trunk, in).cwiseMax(0.0);
    const Eigen::VectorXd mu = mlp_forward(a.mean_head, feat).col(0);
    const Eigen::VectorXd log_std =
        mlp_forward(a.log_std_head, feat).col(0).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
    const Eigen::VectorXd u = mu.array() + log_std.array().exp() * eps.array();
    double expect = gaussian_log_prob({mu, log_std}, u);
    for (int k = 0; k < 2; ++k)
        expect -= std::log(1.0 - std::tanh(u[k]) * std::tanh(u[k]) + kSquashEps);
    CHECK(r.log_prob == doctest::Approx(expect).epsilon(1e-12));
    CHECK((r.action.array() - u.array().tanh()).matrix().norm() < 1e-15);
}

TEST_CASE("actor_loss: alpha1 = alpha2 = 0 leaves exactly the q term") {
    StochasticActor a = make_actor(11);
    TwinCritic c = make_critic(12);
    RandomStream rng(13);
    const int B = 4;
    const ActorLossParts parts =
        actor_loss(a, rng.normal_mat(2, B) * 0.5, c, rng.normal_mat(2, B), rng.normal_mat(2, B),
                   0.0, 0.0, rng.normal_mat(2, B));
    CHECK(parts.total == parts.q_term);
}

TEST_CASE("actor_loss: perfect imitation zeroes the distill term") {
    StochasticActor a = make_actor(14);
    TwinCritic c = make_critic(15);
    RandomStream rng(16);
    const int B = 3;
    const Eigen::MatrixXd S = rng.normal_mat(2, B), X = rng.normal_mat(2, B);
    const ActorEval ev = actor_eval(a, S, X, nullptr);
    a.trunk.zero_grad();
    const ActorLossParts parts =
        actor_loss(a, ev.mean_action, c, S, X, 100.0, 0.1, rng.normal_mat(2, B));
    CHECK(parts.distill == 0.0);
}

TEST_CASE("actor_loss: matches an independent recomputation from captured eps") {
    StochasticActor a = make_actor(17);
    TwinCritic c = make_critic(18);
    RandomStream rng(19);
    const int B = 5;
    const Eigen::MatrixXd S = rng.normal_mat(2, B) * 0.4, X = rng.normal_mat(2, B);
    const Eigen::MatrixXd A_t = rng.normal_mat(2, B) * 0.5;
    const Eigen::MatrixXd eps = rng.normal_mat(2, B);
    const double alpha1 = 7.0, alpha2 = 0.3;
    const ActorLossParts parts = actor_loss(a, A_t, c, S, X, alpha1, alpha2, eps);

    Eigen::MatrixXd in(4, B);
    in << S, X;
    const Eigen::MatrixXd feat = mlp_forward(a.trunk, in).cwiseMax(0.0);
    const Eigen::MatrixXd mu = mlp_forward(a.mean_head, feat);
    const Eigen::MatrixXd log_std =
        mlp_forward(a.log_std_head, feat).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
    const Eigen::MatrixXd u = mu + log_std.array().exp().matrix().cwiseProduct(eps);
    double distill = 0.0, q_term = 0.0, entropy = 0.0;
    for (int i = 0; i < B; ++i) {
        distill += (mu.col(i).array().tanh().matrix() - A_t.col(i)).squaredNorm();
        const Eigen::VectorXd a_s = u.col(i).array().tanh().matrix();
        q_term -= q_min(c, Eigen::MatrixXd(S.col(i)), Eigen::MatrixXd(a_s))[0];
        double lp = gaussian_log_prob({mu.col(i), log_std.col(i)}, u.col(i));
        for (int k = 0; k < 2; ++k)
            lp -= std::log(1.0 - std::pow(std::tanh(u(k, i)), 2) + kSquashEps);
        entropy -= lp;
    }
    distill /= B;
    q_term /= B;
    entropy /= B;
    CHECK(parts.distill == doctest::Approx(distill).epsilon(1e-12));
    CHECK(parts.q_term == doctest::Approx(q_term).epsilon(1e-12));
    CHECK(parts.entropy == doctest::Approx(entropy).epsilon(1e-12));
    CHECK(parts.total ==
          doctest::Approx(alpha1 * distill + q_term - alpha2 * entropy).epsilon(1e-12));
}

TEST_CASE("actor_loss: gradient check across all actor parameters") {
    StochasticActor a = make_actor(20, 8);
    TwinCritic c = make_critic(21);
    RandomStream rng(22);
    const int B = 4;
    const Eigen::MatrixXd S = rng.normal_mat(2, B) * 0.4, X = rng.normal_mat(2, B);
    const Eigen::MatrixXd A_t = rng.normal_mat(2, B) * 0.5;
    const Eigen::MatrixXd eps = rng.normal_mat(2, B);
    std::vector<ParamTensor*> params = a.trunk.params();
    for (auto* p : a.mean_head.params()) params.push_back(p);
    for (auto* p : a.log_std_head.params()) params.push_back(p);
    auto loss = [&] { return actor_loss(a, A_t, c, S, X, 3.0, 0.2, eps).total; };
    CHECK(testing::finite_diff_check(params, loss, 150).max_rel_err < 1e-4);
}

TEST_CASE("actor_loss_deterministic: gradient check") {
    StochasticActor a = make_actor(23, 8);
    TwinCritic c = make_critic(24);
    RandomStream rng(25);
    const int B = 4;
    const Eigen::MatrixXd S = rng.normal_mat(2, B) * 0.4, X = rng.normal_mat(2, B);
    const Eigen::MatrixXd A_t = rng.normal_mat(2, B) * 0.5;
    std::vector<ParamTensor*> params = a.trunk.params();
    for (auto* p : a.mean_head.params()) params.push_back(p);
    auto loss = [&] { return actor_loss_deterministic(a, A_t, c, S, X, 5.0).total; };
    CHECK(testing::finite_diff_check(params, loss, 120).max_rel_err < 1e-4);
}

TEST_CASE("bc_loss: gradient check and hand values") {
    StochasticActor a = make_actor(26, 8);
    RandomStream rng(27);
    const int B = 4;
    const Eigen::MatrixXd S = rng.normal_mat(2, B) * 0.4;
    const Eigen::MatrixXd A = rng.normal_mat(2, B) * 0.5;
    std::vector<ParamTensor*> params = a.trunk.params();
    for (auto* p : a.mean_head.params()) params.push_back(p);
    auto loss = [&] { return bc_loss(a, S, A); };
    CHECK(testing::finite_diff_check(params, loss, 100).max_rel_err < 1e-4);

    // zero net outputs the origin: loss is the mean squared action norm
    StochasticActor z = make_actor(28, 8);
    for (auto* p : z.trunk.params()) p->values.setZero();
    for (auto* p : z.mean_head.params()) p->values.setZero();
    Eigen::MatrixXd one(2, 1);
    one << 1.0, 0.0;
    CHECK(bc_loss(z, Eigen::MatrixXd::Zero(2, 1), one) == doctest::Approx(1.0));
    CHECK(bc_loss(z, Eigen::MatrixXd::Zero(2, 1), Eigen::MatrixXd::Zero(2, 1)) == 0.0);
}

TEST_CASE("fql_actor_loss: alpha = 0 is pure Q maximization") {
    StochasticActor a = make_actor(29);
    TwinCritic c = make_critic(30);
    RandomStream rng(31);
    const int B = 4;
    const ActorLossParts parts = fql_actor_loss(a, rng.normal_mat(2, B) * 0.5, c,
                                                rng.normal_mat(2, B), rng.normal_mat(2, B), 0.0);
    CHECK(parts.total == parts.q_term);
}

TEST_CASE("fql_actor_loss: student equal to teacher leaves -Q(s, a_teacher)") {
    StochasticActor a = make_actor(32);
    TwinCritic c = make_critic(33);
    RandomStream rng(34);
    const Eigen::MatrixXd S = rng.normal_mat(2, 3), X0 = rng.normal_mat(2, 3);
    const ActorEval ev = actor_eval(a, S, X0, nullptr);
    a.trunk.zero_grad();
    const ActorLossParts parts = fql_actor_loss(a, ev.mean_action, c, S, X0, 100.0);
    double expect = 0.0;
    for (int i = 0; i < 3; ++i)
        expect -= q_min(c, Eigen::MatrixXd(S.col(i)), Eigen::MatrixXd(ev.mean_action.col(i)))[0];
    CHECK(parts.total == doctest::Approx(expect / 3.0).epsilon(1e-12));
}

TEST_CASE("gradient isolation: actor loss leaves critic gradients untouched") {
    StochasticActor a = make_actor(35);
    TwinCritic c = make_critic(36);
    RandomStream rng(37);
    const int B = 4;
    c.q1.zero_grad();
    c.q2.zero_grad();
    actor_loss(a, rng.normal_mat(2, B), c, rng.normal_mat(2, B), rng.normal_mat(2, B), 1.0, 0.1,
               rng.normal_mat(2, B));
    for (auto* p : c.q1.params()) CHECK(p->grad.norm() == 0.0);
    for (auto* p : c.q2.params()) CHECK(p->grad.norm() == 0.0);
}

TEST_CASE("mean-only distillation: log-std head perturbation leaves distill unchanged") {
    StochasticActor a = make_actor(38);
    TwinCritic c = make_critic(39);
    RandomStream rng(40);
    const int B = 4;
    const Eigen::MatrixXd S = rng.normal_mat(2, B), X = rng.normal_mat(2, B);
    const Eigen::MatrixXd A_t = rng.normal_mat(2, B) * 0.5;
    const Eigen::MatrixXd eps = rng.normal_mat(2, B);
    const double d0 = actor_loss(a, A_t, c, S, X, 1.0, 0.1, eps).distill;
    for (auto* p : a.log_std_head.params()) p->values.array() += 0.3;
    a.trunk.zero_grad();
    a.mean_head.zero_grad();
    a.log_std_head.zero_grad();
    const double d1 = actor_loss(a, A_t, c, S, X, 1.0, 0.1, eps).distill;
    CHECK(d0 == d1);
}

TEST_CASE("temp_loss: matched entropy gives zero loss and zero gradient") {
    EntropyTemp t = EntropyTemp::make(0.5, -1.0, 3e-4);
    const double loss = temp_loss(t, -1.0);
    CHECK(loss == 0.0);
    CHECK(t.log_alpha2.grad[0] == 0.0);
}

TEST_CASE("temp_loss: low entropy raises alpha2 through a gradient step") {
    EntropyTemp t = EntropyTemp::make(0.01, -1.0, 1e-2);
    const double before = t.alpha2();
    temp_loss(t, -2.0);  // H < H_target -> negative gradient on log_alpha2
    CHECK(t.log_alpha2.grad[0] < 0.0);
    t.step();
    CHECK(t.alpha2() > before);

    EntropyTemp u = EntropyTemp::make(0.01, -1.0, 1e-2);
    temp_loss(u, 0.5);  // H > H_target -> alpha2 decreases
    u.step();
    CHECK(u.alpha2() < 0.01);
}

TEST_CASE("temp: target entropy formula at the defaults") {
    // H_target = -mult * action_dim with mult = 0.5, dim = 2
    EntropyTemp t = EntropyTemp::make(0.01, -0.5 * 2, 3e-4);
    CHECK(t.target_entropy == -1.0);
    CHECK(t.alpha2() > 0.0);
}

TEST_SUITE_END();
