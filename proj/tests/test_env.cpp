#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gsflow/env.hpp"

using namespace gsflow;

TEST_SUITE_BEGIN("crescent_env");

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("world: default construction passes geometry checks") {
    const CrescentWorld w = CrescentWorld::make_default();
    CHECK(w.crescents().size() == 6);
    CHECK(w.excluded_pair()[0] == 0);
    CHECK(w.excluded_pair()[1] == 5);
    CHECK(w.crescents()[0].level == RewardLevel::max);
    CHECK(w.crescents()[5].level == RewardLevel::max);
}

TEST_CASE("reward: mid-radius point on the opening axis earns each crescent's level") {
    const CrescentWorld w = CrescentWorld::make_default();
    for (const auto& c : w.crescents()) {
        const Eigen::Vector2d a =
            c.center + 0.5 * (c.r_inner + c.r_outer) * c.opening_dir;
        CHECK(w.reward(a) == doctest::Approx(c.reward_value));
    }
}

TEST_CASE("reward: origin and crescent centers are zero-reward") {
    const CrescentWorld w = CrescentWorld::make_default();
    CHECK(w.reward({0.0, 0.0}) == 0.0);
    for (const auto& c : w.crescents()) CHECK(w.reward(c.center) == 0.0);  // inside inner disc
}

TEST_CASE("reward: out-of-bounds action is a domain error") {
    const CrescentWorld w = CrescentWorld::make_default();
    CHECK_THROWS_AS(w.reward({1.5, 0.0}), std::domain_error);
}

TEST_CASE("step: horizon-1 episodes") {
    const CrescentWorld w = CrescentWorld::make_default();
    const auto& mid = w.crescents()[2];
    const Eigen::Vector2d inside = mid.center + 0.17 * mid.opening_dir;
    const StepResult hit = w.step(inside);
    CHECK(hit.done);
    CHECK(hit.reward == doctest::Approx(7.0));
    CHECK((hit.next_state - w.fixed_state()).norm() == 0.0);
    const StepResult miss = w.step({0.0, 0.0});
    CHECK(miss.done);
    CHECK(miss.reward == 0.0);
}

TEST_CASE("reward partition: positive reward iff inside exactly one crescent") {
    const CrescentWorld w = CrescentWorld::make_default();
    RandomStream rng(99);
    for (int i = 0; i < 100000; ++i) {
        const Eigen::Vector2d a{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        int inside = 0;
        for (const auto& c : w.crescents()) inside += c.contains(a) ? 1 : 0;
        CHECK(inside <= 1);
        CHECK((w.reward(a) > 0.0) == (inside == 1));
    }
}

TEST_CASE("dataset: empty when counts are zero") {
    const CrescentWorld w = CrescentWorld::make_default();
    CHECK(generate_dataset(w, 0, 0, 0).empty());
}

TEST_CASE("dataset: default sizes, exclusion, and reward consistency") {
    const CrescentWorld w = CrescentWorld::make_default();
    const auto data = generate_dataset(w, 2500, 2000, 7);
    CHECK(data.size() == 12000);
    for (const auto& t : data) {
        const int idx = w.crescent_index(t.action);
        CHECK_FALSE(w.is_excluded(idx));  // is_excluded(-1) is false
        CHECK(t.reward == w.reward(t.action));
        CHECK(t.done);
        CHECK((t.state - w.fixed_state()).norm() == 0.0);
    }
    // background samples carry zero reward by construction
    int zero_reward = 0;
    for (const auto& t : data)
        if (t.reward == 0.0) ++zero_reward;
    CHECK(zero_reward == 2000);
}

TEST_CASE("dataset: byte-identical under the same seed, loader round-trips exactly") {
    namespace fs = std::filesystem;
    const CrescentWorld w = CrescentWorld::make_default();
    const auto data = generate_dataset(w, 40, 30, 3);
    const auto tmp = fs::temp_directory_path();
    save_dataset((tmp / "gs_ds_a.txt").string(), data);
    save_dataset((tmp / "gs_ds_b.txt").string(), generate_dataset(w, 40, 30, 3));
    CHECK(slurp((tmp / "gs_ds_a.txt").string()) == slurp((tmp / "gs_ds_b.txt").string()));

    const auto loaded = load_dataset((tmp / "gs_ds_a.txt").string());
    REQUIRE(loaded.size() == data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        CHECK(loaded[i].action == data[i].action);
        CHECK(loaded[i].reward == data[i].reward);
        CHECK(loaded[i].state == data[i].state);
        CHECK(loaded[i].done == data[i].done);
    }
}

TEST_CASE("dataset: different seed changes the bytes") {
    const CrescentWorld w = CrescentWorld::make_default();
    const auto a = generate_dataset(w, 10, 0, 1);
    const auto b = generate_dataset(w, 10, 0, 2);
    CHECK_FALSE(a[0].action == b[0].action);
}

TEST_CASE("replay buffer: ring overwrite beyond capacity") {
    ReplayBuffer buf(3);
    for (int i = 0; i < 5; ++i) {
        Transition t;
        t.state = Eigen::VectorXd::Zero(2);
        t.next_state = Eigen::VectorXd::Zero(2);
        t.action = {static_cast<double>(i), 0.0};
        buf.insert(t);
    }
    CHECK(buf.size() == 3);
    // slots now hold 3, 4, 2 (oldest overwritten first)
    std::vector<double> firsts;
    for (size_t i = 0; i < buf.size(); ++i) firsts.push_back(buf.at(i).action.x());
    std::sort(firsts.begin(), firsts.end());
    CHECK(firsts == std::vector<double>{2.0, 3.0, 4.0});
}

TEST_CASE("sample_batch: balanced falls back to the non-empty buffer") {
    ReplayBuffer off(8), on(8);
    for (int i = 0; i < 4; ++i) {
        Transition t;
        t.state = Eigen::VectorXd::Zero(2);
        t.next_state = Eigen::VectorXd::Zero(2);
        t.action = {1.0, 0.0};
        off.insert(t);
    }
    RandomStream rng(5);
    const auto batch = sample_batch(off, on, 6, true, rng);
    CHECK(batch.size() == 6);
    for (const auto& t : batch) CHECK(t.action.x() == 1.0);
}

TEST_CASE("sample_batch: balanced splits ceil/floor between buffers") {
    ReplayBuffer off(8), on(8);
    auto mk = [](double tag) {
        Transition t;
        t.state = Eigen::VectorXd::Zero(2);
        t.next_state = Eigen::VectorXd::Zero(2);
        t.action = {tag, 0.0};
        return t;
    };
    for (int i = 0; i < 4; ++i) off.insert(mk(0.0));
    for (int i = 0; i < 4; ++i) on.insert(mk(1.0));
    RandomStream rng(6);
    const auto batch = sample_batch(off, on, 256, true, rng);
    int n_on = 0;
    for (const auto& t : batch) n_on += t.action.x() == 1.0 ? 1 : 0;
    CHECK(batch.size() == 256);
    CHECK(n_on == 128);
}

TEST_CASE("sample_batch: unbalanced draws uniformly over the concatenation") {
    ReplayBuffer off(4), on(4);
    auto mk = [](double tag) {
        Transition t;
        t.state = Eigen::VectorXd::Zero(2);
        t.next_state = Eigen::VectorXd::Zero(2);
        t.action = {tag, 0.0};
        return t;
    };
    for (int i = 0; i < 3; ++i) off.insert(mk(i));
    for (int i = 0; i < 2; ++i) on.insert(mk(10 + i));
    RandomStream rng(7);
    std::map<double, int> counts;
    const int draws = 10000;
    for (const auto& t : sample_batch(off, on, draws, false, rng)) counts[t.action.x()]++;
    CHECK(counts.size() == 5);
    const double expect = draws / 5.0;
    const double sigma = std::sqrt(draws * 0.2 * 0.8);
    for (const auto& [tag, n] : counts) CHECK(std::abs(n - expect) < 4.0 * sigma);
}

TEST_CASE("sample_batch: both buffers empty is a state error") {
    ReplayBuffer off(2), on(2);
    RandomStream rng(8);
    CHECK_THROWS_AS(sample_batch(off, on, 4, true, rng), std::logic_error);
}

TEST_SUITE_END();
