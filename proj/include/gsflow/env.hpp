#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

#include "gsflow/rng.hpp"

namespace gsflow {

enum class RewardLevel { moderate, mid, max };

/// One crescent-shaped reward region: an annulus sector around `center`
/// opening towards `opening_dir` with angular half-width `half_angle`.
struct Crescent {
    Eigen::Vector2d center;
    double r_inner = 0.12;
    double r_outer = 0.22;
    Eigen::Vector2d opening_dir;  // unit
    double half_angle = 0.0;      // radians, in (0, pi)
    RewardLevel level = RewardLevel::moderate;
    double reward_value = 0.0;

    bool contains(const Eigen::Vector2d& a) const;
};

struct Transition {
    Eigen::VectorXd state;
    Eigen::Vector2d action;
    double reward = 0.0;
    Eigen::VectorXd next_state;
    bool done = true;
};

struct StepResult {
    double reward;
    Eigen::VectorXd next_state;
    bool done;
};

struct WorldConfig {
    double reward_moderate = 4.0;
    double reward_mid = 7.0;
    double reward_max = 10.0;
};

/// The six-crescent horizon-1 environment. Immutable after construction;
/// the constructor verifies disjointness by rejection sampling and the
/// two-per-level reward layout.
class CrescentWorld {
public:
    CrescentWorld(std::vector<Crescent> crescents, Eigen::Vector2d action_low,
                  Eigen::Vector2d action_high, Eigen::VectorXd fixed_state,
                  std::array<int, 2> excluded_pair);

    /// Default geometry: action box [-1,1]^2; max pair top-left/bottom-right
    /// (excluded from the dataset), mid pair middle-left/middle-right,
    /// moderate pair top-right/bottom-left; tips face the origin.
    static CrescentWorld make_default(const WorldConfig& cfg = {});

    /// Reward of the unique crescent containing `a`, else 0.
    /// Throws std::domain_error when `a` is outside the action box.
    double reward(const Eigen::Vector2d& a) const;

    /// One-step episode: (reward(a), fixed_state, done=true).
    StepResult step(const Eigen::Vector2d& a) const;

    /// Index of the containing crescent or -1.
    int crescent_index(const Eigen::Vector2d& a) const;

    bool in_bounds(const Eigen::Vector2d& a) const;

    const std::vector<Crescent>& crescents() const { return crescents_; }
    const Eigen::Vector2d& action_low() const { return action_low_; }
    const Eigen::Vector2d& action_high() const { return action_high_; }
    const Eigen::VectorXd& fixed_state() const { return fixed_state_; }
    const std::array<int, 2>& excluded_pair() const { return excluded_pair_; }
    bool is_excluded(int crescent_idx) const {
        return crescent_idx == excluded_pair_[0] || crescent_idx == excluded_pair_[1];
    }
    int state_dim() const { return static_cast<int>(fixed_state_.size()); }
    static constexpr int action_dim() { return 2; }

private:
    std::vector<Crescent> crescents_;
    Eigen::Vector2d action_low_, action_high_;
    Eigen::VectorXd fixed_state_;
    std::array<int, 2> excluded_pair_;
    double background_reward_ = 0.0;
};

/// Fixed-capacity ring buffer of transitions.
class ReplayBuffer {
public:
    explicit ReplayBuffer(size_t capacity);

    void insert(Transition t);
    const Transition& at(size_t i) const { return storage_[i]; }
    size_t size() const { return size_; }
    size_t capacity() const { return capacity_; }
    size_t head() const { return head_; }
    bool empty() const { return size_ == 0; }

    /// Raw ring access for checkpointing.
    const std::vector<Transition>& storage() const { return storage_; }
    void restore(std::vector<Transition> storage, size_t head, size_t size);

private:
    size_t capacity_;
    std::vector<Transition> storage_;
    size_t head_ = 0;  // next write slot
    size_t size_ = 0;
};

/// Offline dataset: uniform rejection samples inside each non-excluded
/// crescent plus `background` zero-reward samples outside all crescents,
/// wrapped as horizon-1 transitions.
std::vector<Transition> generate_dataset(const CrescentWorld& world, int per_crescent,
                                         int background, uint64_t seed);

/// `gsflow-dataset v1` text format; 17-significant-digit round trip.
void save_dataset(const std::string& path, const std::vector<Transition>& transitions);
std::vector<Transition> load_dataset(const std::string& path);

/// balanced=true: ceil(batch/2) offline + floor(batch/2) online, falling back
/// to the non-empty buffer; balanced=false: uniform over the concatenation.
/// Throws std::logic_error when both buffers are empty.
std::vector<Transition> sample_batch(const ReplayBuffer& offline, const ReplayBuffer& online,
                                     int batch, bool balanced, RandomStream& rng);

}  // namespace gsflow
