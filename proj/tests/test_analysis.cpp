#include <doctest.h>

#include <cmath>

#include "gsflow/analysis.hpp"

using namespace gsflow;

TEST_SUITE_BEGIN("analysis");

namespace {

FlowTeacher make_teacher(uint64_t seed) {
    RandomStream rng(seed);
    return FlowTeacher::make(2, 2, {16, 16}, 10, Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1),
                             rng);
}

TwinCritic make_critic(uint64_t seed) {
    RandomStream rng(seed);
    return TwinCritic::make(2, 2, {16, 16}, 0.005, 0.99, rng);
}

Cvae make_cvae(uint64_t seed) {
    RandomStream rng(seed);
    return Cvae::make(2, 2, 2, {16, 16}, 0.1, 1.0, rng);
}

void zero_net(Mlp& net) {
    for (auto* p : net.params()) p->values.setZero();
}

/// Critic rigged to Q(s, a) = c . a exactly (see test_prior.cpp).
TwinCritic make_linear_stub_critic(const Eigen::Vector2d& c) {
    TwinCritic crit = make_critic(0);
    for (Mlp* net : {&crit.q1, &crit.q2}) {
        for (auto* p : net->params()) p->values.setZero();
        net->weights[0].matrix()(0, 2) = c.x();
        net->weights[0].matrix()(0, 3) = c.y();
        net->biases[0].values[0] = 8.0;
        net->weights[1].matrix()(0, 0) = 1.0;
        net->weights[2].matrix()(0, 0) = 1.0;
        net->biases[2].values[0] = -8.0;
    }
    crit.hard_sync();
    return crit;
}

}  // namespace

TEST_CASE("estimate_bound: n_best = 1 gives zero selection gain") {
    FlowTeacher t = make_teacher(1);
    TwinCritic c = make_critic(2);
    Cvae v = make_cvae(3);
    RandomStream rng(4);
    const BoundReport rep = estimate_bound(t, c, v, Eigen::VectorXd::Zero(2), 500, 1, rng);
    CHECK(rep.delta_select == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("estimate_bound: shared-draw oracle groups make delta_select non-negative") {
    FlowTeacher t = make_teacher(5);
    TwinCritic c = make_critic(6);
    Cvae v = make_cvae(7);
    RandomStream rng(8);
    for (int n_best : {2, 5, 10}) {
        const BoundReport rep = estimate_bound(t, c, v, Eigen::VectorXd::Zero(2), 400, n_best, rng);
        CHECK(rep.delta_select >= 0.0);
        CHECK(rep.j_oracle == doctest::Approx(rep.j_base + rep.delta_select).epsilon(1e-12));
    }
}

TEST_CASE("estimate_bound: constant value landscape collapses every term") {
    FlowTeacher t = make_teacher(9);
    TwinCritic c = make_critic(10);
    for (Mlp* net : {&c.q1, &c.q2}) zero_net(*net);  // Q == 0 everywhere
    c.hard_sync();
    Cvae v = make_cvae(11);
    RandomStream rng(12);
    const BoundReport rep = estimate_bound(t, c, v, Eigen::VectorXd::Zero(2), 300, 5, rng);
    CHECK(rep.j_base == 0.0);
    CHECK(rep.j_oracle == 0.0);
    CHECK(rep.j_amortized == 0.0);
    CHECK(rep.lipschitz_hat == 0.0);
    CHECK(rep.slack == doctest::Approx(bound_gap_term(rep.lipschitz_hat, rep.eps_vae)));
    CHECK(rep.slack >= 0.0);
}

TEST_CASE("estimate_bound: linear landscape bounds the empirical Lipschitz estimate") {
    const Eigen::Vector2d slope(1.3, -0.7);
    FlowTeacher t = make_teacher(13);
    zero_net(t.velocity_net);  // teacher becomes clip(x0): 1-Lipschitz in the noise
    TwinCritic stub = make_linear_stub_critic(slope);
    Cvae v = make_cvae(14);
    RandomStream rng(15);
    const BoundReport rep = estimate_bound(t, stub, v, Eigen::VectorXd::Zero(2), 2000, 10, rng);
    CHECK(rep.lipschitz_hat <= slope.norm() + 1e-9);

    // brute-force Monte-Carlo oracle for E[max of 10 draws of slope . clip(x)]
    RandomStream mc(16);
    const int n_groups = 100000;
    double acc = 0.0;
    for (int g = 0; g < n_groups; ++g) {
        double best = -1e300;
        for (int j = 0; j < 10; ++j) {
            const Eigen::Vector2d x(mc.normal(), mc.normal());
            const Eigen::Vector2d cl = x.cwiseMax(-1.0).cwiseMin(1.0);
            best = std::max(best, slope.dot(cl));
        }
        acc += best;
    }
    const double oracle = acc / n_groups;
    CHECK(std::abs(rep.j_oracle - oracle) < 5.0 * rep.se_oracle + 0.01);
}

TEST_CASE("bound gap term is monotone in the measured reconstruction error") {
    const double L = 3.7;
    double prev = -1.0;
    for (double eps : {0.0, 0.01, 0.1, 0.5, 2.0, 10.0}) {
        const double gap = bound_gap_term(L, eps);
        CHECK(gap > prev);
        prev = gap;
    }
}

TEST_CASE("estimate_bound: n_best > n_mc is a domain error") {
    FlowTeacher t = make_teacher(17);
    TwinCritic c = make_critic(18);
    Cvae v = make_cvae(19);
    RandomStream rng(20);
    CHECK_THROWS_AS(estimate_bound(t, c, v, Eigen::VectorXd::Zero(2), 5, 10, rng),
                    std::domain_error);
}

TEST_CASE("q_bias: zero critic on zero-reward actions reports zero bias") {
    const CrescentWorld world = CrescentWorld::make_default();
    TwinCritic c = make_critic(21);
    for (Mlp* net : {&c.q1, &c.q2}) zero_net(*net);
    const BiasReport rep = q_bias(c, [] { return Eigen::Vector2d(0.0, 0.0); }, world, 50);
    CHECK(rep.mean_bias == 0.0);
    CHECK(rep.mean_abs_bias == 0.0);
}

TEST_CASE("q_bias: constant-plus-one critic reports unit bias") {
    const CrescentWorld world = CrescentWorld::make_default();
    TwinCritic c = make_critic(22);
    for (Mlp* net : {&c.q1, &c.q2}) {
        zero_net(*net);
        net->biases.back().values[0] = 1.0;  // Q == reward + 1 on zero-reward actions
    }
    const BiasReport rep = q_bias(c, [] { return Eigen::Vector2d(0.0, 0.0); }, world, 50);
    CHECK(rep.mean_bias == doctest::Approx(1.0));
    CHECK(rep.mean_abs_bias == doctest::Approx(1.0));
    CHECK(rep.mean_abs_bias >= std::abs(rep.mean_bias));
}

TEST_CASE("best_of_n: n = 1 is plain teacher evaluation") {
    FlowTeacher t = make_teacher(23);
    TwinCritic c = make_critic(24);
    const CrescentWorld world = CrescentWorld::make_default();
    RandomStream rng(25);
    RandomStream replay = rng;
    const BestOfNResult res = best_of_n_eval(t, c, world, 1, 40, rng);
    double acc = 0.0;
    const FloatNet vel = FloatNet::snapshot(t.velocity_net);
    for (int e = 0; e < 40; ++e) {
        const Eigen::MatrixXd x0 = replay.normal_mat(2, 1);
        const Eigen::MatrixXd a = euler_rollout_fast(vel, t.euler_steps,
                                                     Eigen::MatrixXd::Zero(2, 1), x0,
                                                     t.action_low, t.action_high);
        acc += world.reward(a.col(0));
    }
    CHECK(res.return_mean == doctest::Approx(acc / 40).epsilon(1e-12));
}

TEST_CASE("best_of_n: argmax equals a brute-force re-scan of the capture") {
    FlowTeacher t = make_teacher(26);
    TwinCritic c = make_critic(27);
    const CrescentWorld world = CrescentWorld::make_default();
    RandomStream rng(28);
    BestOfNCapture cap;
    best_of_n_eval(t, c, world, 8, 30, rng, &cap);
    REQUIRE(cap.actions.size() == 30);
    for (int e = 0; e < 30; ++e) {
        int best = 0;
        double best_q = -1e300;
        for (int j = 0; j < 8; ++j) {
            const double q = q_min(c, Eigen::MatrixXd(world.fixed_state()),
                                   Eigen::MatrixXd(cap.actions[e].col(j)))[0];
            if (q > best_q) {
                best_q = q;
                best = j;
            }
        }
        CHECK(cap.chosen[e] == best);
    }
}

TEST_CASE("kde: a repeated point peaks at its own cell") {
    std::vector<Eigen::Vector2d> pts(10, Eigen::Vector2d(0.31, -0.42));
    const KdeGrid grid = kde_grid(pts, 100, 0.0);
    int iy_max = 0, ix_max = 0;
    grid.density.maxCoeff(&iy_max, &ix_max);
    const double x = grid.x_min + (ix_max + 0.5) * (grid.x_max - grid.x_min) / grid.resolution;
    const double y = grid.y_min + (iy_max + 0.5) * (grid.y_max - grid.y_min) / grid.resolution;
    CHECK(std::abs(x - 0.31) < 0.03);
    CHECK(std::abs(y - (-0.42)) < 0.03);
}

TEST_CASE("kde: grid integral is within 2% of one") {
    RandomStream rng(29);
    std::vector<Eigen::Vector2d> pts;
    for (int i = 0; i < 400; ++i) pts.emplace_back(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    const KdeGrid grid = kde_grid(pts, 200, 0.0);
    CHECK(std::abs(grid.integral() - 1.0) < 0.02);
}

TEST_CASE("kde: symmetric points give a symmetric density") {
    std::vector<Eigen::Vector2d> pts = {{0.4, 0.0}, {-0.4, 0.0}, {0.0, 0.4}, {0.0, -0.4}};
    const KdeGrid grid = kde_grid(pts, 120, 0.1);
    for (int iy = 0; iy < 120; ++iy)
        for (int ix = 0; ix < 120; ++ix)
            CHECK(std::abs(grid.density(iy, ix) - grid.density(119 - iy, 119 - ix)) < 1e-9);
}

TEST_CASE("kde: fewer than two points is a domain error") {
    CHECK_THROWS_AS(kde_grid({Eigen::Vector2d(0, 0)}, 50, 0.1), std::domain_error);
}

TEST_CASE("report emitters produce parseable files") {
    BoundReport rep;
    rep.j_base = 1.0;
    rep.slack = 0.25;
    const std::string j = bound_report_json(rep);
    CHECK(j.find("\"slack\"") != std::string::npos);
    BiasReport b;
    b.mean_bias = -0.5;
    CHECK(bias_report_json(b).find("mean_bias") != std::string::npos);
}

TEST_SUITE_END();
