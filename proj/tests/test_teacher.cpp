#include <doctest.h>

#include "gradcheck.hpp"
#include "gsflow/env.hpp"
#include "gsflow/teacher.hpp"

using namespace gsflow;

TEST_SUITE_BEGIN("flow_teacher");

namespace {

FlowTeacher make_teacher(int hidden, int K, uint64_t seed) {
    RandomStream rng(seed);
    return FlowTeacher::make(2, 2, {hidden, hidden}, K, Eigen::Vector2d(-1, -1),
                             Eigen::Vector2d(1, 1), rng);
}

void zero_net(Mlp& net) {
    for (auto* p : net.params()) p->values.setZero();
}

}  // namespace

TEST_CASE("cfm: zero net with a == x0 has exact-zero target and loss") {
    FlowTeacher t = make_teacher(8, 10, 1);
    zero_net(t.velocity_net);
    RandomStream rng(2);
    const Eigen::MatrixXd X0 = rng.normal_mat(2, 5);
    const Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2, 5);
    Eigen::VectorXd T(5);
    for (int i = 0; i < 5; ++i) T[i] = rng.uniform();
    CHECK(cfm_loss(t, S, X0, X0, T) == 0.0);  // target a - x0 = 0, v = 0
}

TEST_CASE("cfm: t = 0 keeps the target a - x0") {
    FlowTeacher t = make_teacher(8, 10, 3);
    zero_net(t.velocity_net);
    RandomStream rng(4);
    const Eigen::MatrixXd X0 = rng.normal_mat(2, 4);
    const Eigen::MatrixXd A = rng.normal_mat(2, 4) * 0.5;
    const Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2, 4);
    const Eigen::VectorXd T = Eigen::VectorXd::Zero(4);
    const double loss = cfm_loss(t, S, A, X0, T);
    CHECK(loss == doctest::Approx((A - X0).colwise().squaredNorm().mean()).epsilon(1e-12));
}

TEST_CASE("cfm: rng wrapper matches an independent recomputation of the draws") {
    FlowTeacher t = make_teacher(8, 10, 5);
    RandomStream rng(6);
    const Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2, 7);
    const Eigen::MatrixXd A = RandomStream(7).normal_mat(2, 7) * 0.4;

    RandomStream replay = rng;  // capture the stream state
    const double loss = cfm_loss(t, S, A, rng);

    const Eigen::MatrixXd X0 = replay.normal_mat(2, 7);
    Eigen::VectorXd T(7);
    for (int i = 0; i < 7; ++i) T[i] = replay.uniform();
    Eigen::MatrixXd in(4 + kTimeFeatureDim, 7);
    for (int i = 0; i < 7; ++i) {
        in.col(i).head(2) = (1.0 - T[i]) * X0.col(i) + T[i] * A.col(i);
        in.col(i).segment(2, 2) = S.col(i);
        fill_time_features(T[i], in.col(i).data() + 4);
    }
    const Eigen::MatrixXd v = mlp_forward(t.velocity_net, in);
    const double expect = (v - (A - X0)).colwise().squaredNorm().mean();
    CHECK(loss == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("cfm: empty batch is a domain error") {
    FlowTeacher t = make_teacher(4, 5, 8);
    RandomStream rng(9);
    const Eigen::MatrixXd empty(2, 0);
    CHECK_THROWS_AS(cfm_loss(t, empty, empty, rng), std::domain_error);
}

TEST_CASE("cfm: analytic gradient matches finite differences") {
    FlowTeacher t = make_teacher(8, 10, 10);
    RandomStream rng(11);
    const Eigen::MatrixXd S = rng.normal_mat(2, 6) * 0.3;
    const Eigen::MatrixXd A = rng.normal_mat(2, 6) * 0.5;
    const Eigen::MatrixXd X0 = rng.normal_mat(2, 6);
    Eigen::VectorXd T(6);
    for (int i = 0; i < 6; ++i) T[i] = rng.uniform();
    auto loss = [&] { return cfm_loss(t, S, A, X0, T); };
    const auto res = testing::finite_diff_check(t.velocity_net.params(), loss, 120);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("euler: constant velocity field accumulates to one full step") {
    FlowTeacher t = make_teacher(8, 10, 12);
    zero_net(t.velocity_net);
    t.velocity_net.biases.back().values << 0.3, -0.2;  // v == c everywhere
    const Eigen::VectorXd s = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd x0(2);
    x0 << 0.1, 0.4;
    const Eigen::VectorXd a = euler_sample(t, s, x0);
    CHECK(a[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(a[1] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("euler: zero velocity field is the clipped identity") {
    FlowTeacher t = make_teacher(8, 10, 13);
    zero_net(t.velocity_net);
    Eigen::VectorXd x0(2);
    x0 << 1.7, -0.3;
    const Eigen::VectorXd a = euler_sample(t, Eigen::VectorXd::Zero(2), x0);
    CHECK(a[0] == doctest::Approx(1.0));  // clipped to the box
    CHECK(a[1] == doctest::Approx(-0.3));
}

TEST_CASE("euler: K = 1 is a single step") {
    FlowTeacher t = make_teacher(8, 1, 14);
    RandomStream rng(15);
    const Eigen::VectorXd s = rng.normal_vec(2) * 0.2;
    const Eigen::VectorXd x0 = rng.normal_vec(2) * 0.3;
    Eigen::VectorXd in(4 + kTimeFeatureDim);
    in.head(2) = x0;
    in.segment(2, 2) = s;
    fill_time_features(0.0, in.data() + 4);
    const Eigen::VectorXd v = mlp_forward(t.velocity_net, in);
    const Eigen::VectorXd expect =
        (x0 + v).cwiseMax(Eigen::Vector2d(-1, -1)).cwiseMin(Eigen::Vector2d(1, 1));
    CHECK((euler_sample(t, s, x0) - expect).norm() < 1e-15);
}

TEST_CASE("euler: pure function of (parameters, s, x0)") {
    FlowTeacher t = make_teacher(16, 10, 16);
    RandomStream rng(17);
    const Eigen::VectorXd s = rng.normal_vec(2);
    const Eigen::VectorXd x0 = rng.normal_vec(2);
    CHECK((euler_sample(t, s, x0) - euler_sample(t, s, x0)).norm() == 0.0);
}

TEST_CASE("euler: batched integration equals per-sample integration") {
    FlowTeacher t = make_teacher(16, 10, 18);
    RandomStream rng(19);
    const Eigen::MatrixXd S = rng.normal_mat(2, 9) * 0.2;
    const Eigen::MatrixXd X0 = rng.normal_mat(2, 9);
    const Eigen::MatrixXd batch = euler_sample_batch(t, S, X0);
    for (int i = 0; i < 9; ++i) {
        const Eigen::VectorXd one = euler_sample(t, S.col(i), X0.col(i));
        // batched and single-column GEMM kernels may differ at machine eps
        CHECK((batch.col(i) - one).norm() < 1e-12);
    }
}

TEST_CASE("euler: float fast path tracks the double path") {
    FlowTeacher t = make_teacher(32, 10, 20);
    RandomStream rng(21);
    const Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2, 64);
    const Eigen::MatrixXd X0 = rng.normal_mat(2, 64);
    const Eigen::MatrixXd fast = euler_rollout_fast(FloatNet::snapshot(t.velocity_net),
                                                    t.euler_steps, S, X0, t.action_low,
                                                    t.action_high);
    const Eigen::MatrixXd slow = euler_sample_batch(t, S, X0);
    CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("sample_candidates: singleton returns the sole candidate, reproducibly") {
    FlowTeacher t = make_teacher(16, 10, 22);
    RandomStream rng(23);
    RandomStream replay = rng;
    const Eigen::VectorXd s = Eigen::VectorXd::Zero(2);
    const auto pairs = sample_candidates(t, s, 1, rng);
    REQUIRE(pairs.size() == 1);
    const Eigen::VectorXd x0 = replay.normal_mat(2, 1).col(0);
    CHECK((pairs[0].first - x0).norm() == 0.0);
    CHECK((pairs[0].second - euler_sample(t, s, x0)).norm() == 0.0);
}

TEST_CASE("sample_candidates: n >= 1 required") {
    FlowTeacher t = make_teacher(8, 5, 24);
    RandomStream rng(25);
    CHECK_THROWS(sample_candidates(t, Eigen::VectorXd::Zero(2), 0, rng));
}

TEST_SUITE_END();
