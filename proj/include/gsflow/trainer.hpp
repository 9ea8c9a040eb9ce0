#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gsflow/actor.hpp"
#include "gsflow/config.hpp"
#include "gsflow/critic.hpp"
#include "gsflow/env.hpp"
#include "gsflow/metrics.hpp"
#include "gsflow/prior.hpp"
#include "gsflow/teacher.hpp"

namespace gsflow {

enum class Phase { offline, online };

/// Stage notifications fired inside train_step, in execution order.
enum class StepStage { after_critic, after_prior, after_teacher, after_student, after_temperature };

/// Per-net Adam optimizer over a parameter list.
struct AdamOpt {
    std::vector<AdamState> states;
    static AdamOpt for_params(const std::vector<ParamTensor*>& params, double lr);
    void step(const std::vector<ParamTensor*>& params);
};

struct EvalReport {
    double return_mean = 0.0;
    double return_std = 0.0;
    double mode_coverage = 0.0;  // fraction of the 6 crescents with >= 2% of actions
    std::array<double, 6> crescent_frac{};
    int excluded_hits = 0;  // excluded crescents with >= 2% of actions
    std::optional<double> q_bias;
};

/// Deterministic-policy evaluation harness shared by the trainer and tests:
/// `policy(episode)` produces the action for each episode.
EvalReport evaluate_policy(const CrescentWorld& world, int episodes,
                           const std::function<Eigen::Vector2d(int)>& policy);

/// Owns the full training state and runs Algorithm-1 steps in the fixed
/// order critic -> prior -> teacher -> student -> temperature, with variant
/// gating. Single-writer; parallelism only across independent Trainer
/// instances.
class Trainer {
public:
    explicit Trainer(TrainConfig cfg);
    Trainer(const Trainer&) = delete;
    Trainer& operator=(const Trainer&) = delete;

    void load_offline_dataset_file(const std::string& path);
    void set_offline_dataset(const std::vector<Transition>& transitions);

    void train_step(const std::vector<Transition>& batch);

    /// Runs the remaining steps of the respective phase, emitting a metrics
    /// row every eval_interval steps and at the phase end.
    void run_offline(MetricsWriter* metrics);
    void run_online(MetricsWriter* metrics);

    EvalReport evaluate(int episodes);

    double current_alpha1() const;
    double current_alpha2() const;

    // training state (checkpoint code reads/writes these directly)
    TrainConfig cfg;
    CrescentWorld world;
    ReplayBuffer offline_buf;
    ReplayBuffer online_buf;
    FlowTeacher teacher;
    TwinCritic critic;
    Cvae cvae;
    StochasticActor actor;
    EntropyTemp temp;
    AdamOpt opt_teacher, opt_q1, opt_q2, opt_encoder, opt_decoder, opt_actor;
    RandomStream rng_batch, rng_teacher, rng_candidate, rng_cvae, rng_actor, rng_env, rng_eval;
    long offline_done = 0;
    long online_done = 0;
    Phase phase = Phase::offline;

    std::function<void(StepStage)> debug_observer;

    std::vector<ParamTensor*> actor_params();

    /// Prior noise for the acting/student path: decoded advantage prior when
    /// the prior module is enabled, N(0,I) when disabled, zeros for BC.
    Eigen::VectorXd draw_prior_noise(RandomStream& rng);

    /// Deterministic (mean) inference action; `explore` switches the full
    /// method to distribution sampling.
    Eigen::Vector2d policy_action(RandomStream& rng, bool explore);

private:
    struct Accum {
        double sum = 0.0;
        long n = 0;
        void add(double v) {
            sum += v;
            ++n;
        }
        std::optional<double> take() {
            if (n == 0) return std::nullopt;
            const double m = sum / n;
            sum = 0.0;
            n = 0;
            return m;
        }
    };
    Accum acc_critic_, acc_cfm_, acc_recon_, acc_kl_, acc_actor_, acc_distill_, acc_q_, acc_entropy_;

    bool uses_critic() const;
    bool uses_prior() const;
    bool uses_student() const;
    void emit_row(MetricsWriter* metrics);
    void notify(StepStage s) {
        if (debug_observer) debug_observer(s);
    }
};

}  // namespace gsflow
