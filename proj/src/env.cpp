#include "gsflow/env.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace gsflow {

bool Crescent::contains(const Eigen::Vector2d& a) const {
    const Eigen::Vector2d d = a - center;
    const double r = d.norm();
    if (r < r_inner || r > r_outer) return false;
    // angle between (a - center) and opening_dir
    const double cosang = d.dot(opening_dir) / r;
    return std::acos(std::min(1.0, std::max(-1.0, cosang))) <= half_angle;
}

CrescentWorld::CrescentWorld(std::vector<Crescent> crescents, Eigen::Vector2d action_low,
                             Eigen::Vector2d action_high, Eigen::VectorXd fixed_state,
                             std::array<int, 2> excluded_pair)
    : crescents_(std::move(crescents)),
      action_low_(std::move(action_low)),
      action_high_(std::move(action_high)),
      fixed_state_(std::move(fixed_state)),
      excluded_pair_(excluded_pair) {
    if (crescents_.size() != 6) throw std::invalid_argument("CrescentWorld: need exactly 6 crescents");
    int per_level[3] = {0, 0, 0};
    for (const auto& c : crescents_) {
        if (c.r_inner >= c.r_outer) throw std::invalid_argument("CrescentWorld: r_inner >= r_outer");
        if (std::abs(c.opening_dir.norm() - 1.0) > 1e-9)
            throw std::invalid_argument("CrescentWorld: opening_dir not unit length");
        if (c.half_angle <= 0.0 || c.half_angle >= std::numbers::pi)
            throw std::invalid_argument("CrescentWorld: half_angle out of (0, pi)");
        per_level[static_cast<int>(c.level)]++;
    }
    if (per_level[0] != 2 || per_level[1] != 2 || per_level[2] != 2)
        throw std::invalid_argument("CrescentWorld: each reward level must appear exactly twice");
    for (int idx : excluded_pair_) {
        if (idx < 0 || idx >= 6) throw std::invalid_argument("CrescentWorld: bad excluded index");
        if (crescents_[idx].level != RewardLevel::max)
            throw std::invalid_argument("CrescentWorld: excluded pair must carry the max level");
    }
    if (excluded_pair_[0] == excluded_pair_[1])
        throw std::invalid_argument("CrescentWorld: excluded pair must be two distinct crescents");

    // Disjointness check: 1e5 uniform points, none may fall in two crescents.
    RandomStream probe(0x9d15c0de);
    for (int i = 0; i < 100000; ++i) {
        Eigen::Vector2d p(probe.uniform(action_low_.x(), action_high_.x()),
                          probe.uniform(action_low_.y(), action_high_.y()));
        int hits = 0;
        for (const auto& c : crescents_) hits += c.contains(p) ? 1 : 0;
        if (hits > 1) throw std::invalid_argument("CrescentWorld: crescents overlap");
    }
}

CrescentWorld CrescentWorld::make_default(const WorldConfig& cfg) {
    struct Spot {
        Eigen::Vector2d center;
        RewardLevel level;
        double value;
    };
    // index: 0 top-left, 1 top-right, 2 mid-left, 3 mid-right, 4 bottom-left, 5 bottom-right
    const std::vector<Spot> spots = {
        {{-0.52, 0.60}, RewardLevel::max, cfg.reward_max},
        {{0.52, 0.60}, RewardLevel::moderate, cfg.reward_moderate},
        {{-0.60, 0.00}, RewardLevel::mid, cfg.reward_mid},
        {{0.60, 0.00}, RewardLevel::mid, cfg.reward_mid},
        {{-0.52, -0.60}, RewardLevel::moderate, cfg.reward_moderate},
        {{0.52, -0.60}, RewardLevel::max, cfg.reward_max},
    };
    std::vector<Crescent> crescents;
    const double half_angle = 90.0 * std::numbers::pi / 180.0;
    for (const auto& s : spots) {
        Crescent c;
        c.center = s.center;
        c.r_inner = 0.16;
        c.r_outer = 0.29;
        c.opening_dir = (-s.center).normalized();  // tips face the origin
        c.half_angle = half_angle;
        c.level = s.level;
        c.reward_value = s.value;
        crescents.push_back(c);
    }
    return CrescentWorld(std::move(crescents), Eigen::Vector2d(-1.0, -1.0),
                         Eigen::Vector2d(1.0, 1.0), Eigen::VectorXd::Zero(2), {0, 5});
}

bool CrescentWorld::in_bounds(const Eigen::Vector2d& a) const {
    return a.x() >= action_low_.x() && a.x() <= action_high_.x() && a.y() >= action_low_.y() &&
           a.y() <= action_high_.y();
}

int CrescentWorld::crescent_index(const Eigen::Vector2d& a) const {
    for (size_t i = 0; i < crescents_.size(); ++i)
        if (crescents_[i].contains(a)) return static_cast<int>(i);
    return -1;
}

double CrescentWorld::reward(const Eigen::Vector2d& a) const {
    if (!in_bounds(a)) throw std::domain_error("CrescentWorld::reward: action out of bounds");
    const int idx = crescent_index(a);
    return idx < 0 ? background_reward_ : crescents_[idx].reward_value;
}

StepResult CrescentWorld::step(const Eigen::Vector2d& a) const {
    return {reward(a), fixed_state_, true};
}

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    storage_.reserve(std::min<size_t>(capacity, 1 << 20));
}

void ReplayBuffer::insert(Transition t) {
    if (size_ < capacity_) {
        storage_.push_back(std::move(t));
        ++size_;
        head_ = size_ % capacity_;
    } else {
        storage_[head_] = std::move(t);
        head_ = (head_ + 1) % capacity_;
    }
}

void ReplayBuffer::restore(std::vector<Transition> storage, size_t head, size_t size) {
    if (storage.size() > capacity_ || size != storage.size() || head >= std::max<size_t>(capacity_, 1))
        throw std::invalid_argument("ReplayBuffer::restore: inconsistent ring");
    storage_ = std::move(storage);
    head_ = head;
    size_ = size;
}

std::vector<Transition> generate_dataset(const CrescentWorld& world, int per_crescent,
                                         int background, uint64_t seed) {
    if (per_crescent < 0 || background < 0)
        throw std::invalid_argument("generate_dataset: negative counts");
    RandomStream rng = RandomStream::for_stream(seed, "dataset");
    std::vector<Transition> out;
    out.reserve(static_cast<size_t>(per_crescent) * 4 + background);

    auto wrap = [&](const Eigen::Vector2d& a) {
        Transition t;
        t.state = world.fixed_state();
        t.action = a;
        t.reward = world.reward(a);
        t.next_state = world.fixed_state();
        t.done = true;
        return t;
    };

    for (size_t i = 0; i < world.crescents().size(); ++i) {
        if (world.is_excluded(static_cast<int>(i))) continue;
        const Crescent& c = world.crescents()[i];
        const double lo_x = c.center.x() - c.r_outer, hi_x = c.center.x() + c.r_outer;
        const double lo_y = c.center.y() - c.r_outer, hi_y = c.center.y() + c.r_outer;
        for (int k = 0; k < per_crescent; ++k) {
            Eigen::Vector2d a;
            do {
                a = {rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)};
            } while (!c.contains(a));
            out.push_back(wrap(a));
        }
    }
    for (int k = 0; k < background; ++k) {
        Eigen::Vector2d a;
        do {
            a = {rng.uniform(world.action_low().x(), world.action_high().x()),
                 rng.uniform(world.action_low().y(), world.action_high().y())};
        } while (world.crescent_index(a) >= 0);
        out.push_back(wrap(a));
    }
    return out;
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void save_dataset(const std::string& path, const std::vector<Transition>& transitions) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_dataset: cannot open " + path);
    os << "gsflow-dataset v1\n";
    for (const auto& t : transitions) {
        for (int i = 0; i < t.state.size(); ++i) os << fmt17(t.state[i]) << ",";
        os << fmt17(t.action.x()) << "," << fmt17(t.action.y()) << "," << fmt17(t.reward);
        for (int i = 0; i < t.next_state.size(); ++i) os << "," << fmt17(t.next_state[i]);
        os << "," << (t.done ? 1 : 0) << "\n";
    }
    if (!os) throw std::runtime_error("save_dataset: write failed for " + path);
}

std::vector<Transition> load_dataset(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_dataset: cannot open " + path);
    std::string header;
    std::getline(is, header);
    if (header != "gsflow-dataset v1")
        throw std::runtime_error("load_dataset: bad header in " + path);
    std::vector<Transition> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> fields;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) fields.push_back(std::stod(tok));
        // s(d), a(2), r, s'(d), done -> total = 2d + 4
        if (fields.size() < 6 || (fields.size() - 4) % 2 != 0)
            throw std::runtime_error("load_dataset: malformed record in " + path);
        const int d = static_cast<int>((fields.size() - 4) / 2);
        Transition t;
        t.state = Eigen::Map<Eigen::VectorXd>(fields.data(), d);
        t.action = {fields[d], fields[d + 1]};
        t.reward = fields[d + 2];
        t.next_state = Eigen::Map<Eigen::VectorXd>(fields.data() + d + 3, d);
        t.done = fields[2 * d + 3] != 0.0;
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<Transition> sample_batch(const ReplayBuffer& offline, const ReplayBuffer& online,
                                     int batch, bool balanced, RandomStream& rng) {
    if (offline.empty() && online.empty())
        throw std::logic_error("sample_batch: both buffers empty");
    std::vector<Transition> out;
    out.reserve(batch);
    if (balanced && !offline.empty() && !online.empty()) {
        const int n_off = (batch + 1) / 2;
        for (int i = 0; i < n_off; ++i) out.push_back(offline.at(rng.integer(offline.size())));
        for (int i = 0; i < batch - n_off; ++i) out.push_back(online.at(rng.integer(online.size())));
        return out;
    }
    if (balanced) {
        const ReplayBuffer& src = offline.empty() ? online : offline;
        for (int i = 0; i < batch; ++i) out.push_back(src.at(rng.integer(src.size())));
        return out;
    }
    const size_t total = offline.size() + online.size();
    for (int i = 0; i < batch; ++i) {
        const size_t idx = rng.integer(total);
        out.push_back(idx < offline.size() ? offline.at(idx) : online.at(idx - offline.size()));
    }
    return out;
}

}  // namespace gsflow
