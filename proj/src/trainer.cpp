#include "gsflow/trainer.hpp"

#include <cmath>
#include <stdexcept>

namespace gsflow {

AdamOpt AdamOpt::for_params(const std::vector<ParamTensor*>& params, double lr) {
    AdamOpt o;
    for (const auto* p : params) o.states.push_back(AdamState::for_params(*p, lr));
    return o;
}

void AdamOpt::step(const std::vector<ParamTensor*>& params) {
    if (params.size() != states.size()) throw std::logic_error("AdamOpt: parameter list changed");
    for (size_t i = 0; i < params.size(); ++i) adam_step(states[i], *params[i]);
}

EvalReport evaluate_policy(const CrescentWorld& world, int episodes,
                           const std::function<Eigen::Vector2d(int)>& policy) {
    if (episodes < 1) throw std::invalid_argument("evaluate_policy: episodes must be >= 1");
    EvalReport rep;
    std::array<int, 6> hits{};
    double sum = 0.0, sum_sq = 0.0;
    for (int e = 0; e < episodes; ++e) {
        const Eigen::Vector2d a = policy(e);
        const StepResult res = world.step(a);
        sum += res.reward;
        sum_sq += res.reward * res.reward;
        const int idx = world.crescent_index(a);
        if (idx >= 0) hits[idx]++;
    }
    rep.return_mean = sum / episodes;
    rep.return_std = std::sqrt(std::max(0.0, sum_sq / episodes - rep.return_mean * rep.return_mean));
    int covered = 0;
    for (int i = 0; i < 6; ++i) {
        rep.crescent_frac[i] = static_cast<double>(hits[i]) / episodes;
        if (rep.crescent_frac[i] >= 0.02) {
            ++covered;
            if (world.is_excluded(i)) rep.excluded_hits++;
        }
    }
    rep.mode_coverage = covered / 6.0;
    return rep;
}

namespace {

CrescentWorld world_from_config(const TrainConfig& cfg) {
    WorldConfig wc;
    wc.reward_moderate = cfg.reward_moderate;
    wc.reward_mid = cfg.reward_mid;
    wc.reward_max = cfg.reward_max;
    return CrescentWorld::make_default(wc);
}

}  // namespace

Trainer::Trainer(TrainConfig cfg_in)
    : cfg(std::move(cfg_in)),
      world(world_from_config(cfg)),
      offline_buf(1),
      online_buf(static_cast<size_t>(std::max<long>(1, cfg.online_buffer_capacity))),
      teacher(),
      critic(),
      cvae(),
      actor(),
      temp() {
    const int sd = world.state_dim();
    const int ad = CrescentWorld::action_dim();
    RandomStream init = RandomStream::for_stream(cfg.seed, "init");
    teacher = FlowTeacher::make(sd, ad, cfg.hidden(), cfg.euler_steps, world.action_low(),
                                world.action_high(), init);
    critic = TwinCritic::make(sd, ad, cfg.hidden(), cfg.tau, cfg.gamma, init);
    cvae = Cvae::make(sd, ad, cfg.latent_dim, cfg.hidden(), cfg.kl_weight, cfg.recon_weight, init);
    actor = StochasticActor::make(sd, ad, ad, cfg.hidden(), world.action_low(),
                                  world.action_high(), init);
    temp = EntropyTemp::make(cfg.alpha2_init, cfg.target_entropy(ad), cfg.alpha_lr);

    opt_teacher = AdamOpt::for_params(teacher.velocity_net.params(), cfg.teacher_lr);
    opt_q1 = AdamOpt::for_params(critic.q1.params(), cfg.critic_lr);
    opt_q2 = AdamOpt::for_params(critic.q2.params(), cfg.critic_lr);
    opt_encoder = AdamOpt::for_params(cvae.encoder.params(), cfg.cvae_lr);
    opt_decoder = AdamOpt::for_params(cvae.decoder.params(), cfg.cvae_lr);
    opt_actor = AdamOpt::for_params(actor_params(), cfg.actor_lr);

    rng_batch = RandomStream::for_stream(cfg.seed, "batch");
    rng_teacher = RandomStream::for_stream(cfg.seed, "teacher");
    rng_candidate = RandomStream::for_stream(cfg.seed, "candidate");
    rng_cvae = RandomStream::for_stream(cfg.seed, "cvae");
    rng_actor = RandomStream::for_stream(cfg.seed, "actor");
    rng_env = RandomStream::for_stream(cfg.seed, "env");
    rng_eval = RandomStream::for_stream(cfg.seed, "eval");
}

std::vector<ParamTensor*> Trainer::actor_params() {
    std::vector<ParamTensor*> out = actor.trunk.params();
    for (auto* p : actor.mean_head.params()) out.push_back(p);
    for (auto* p : actor.log_std_head.params()) out.push_back(p);
    return out;
}

void Trainer::load_offline_dataset_file(const std::string& path) {
    set_offline_dataset(load_dataset(path));
}

void Trainer::set_offline_dataset(const std::vector<Transition>& transitions) {
    offline_buf = ReplayBuffer(std::max<size_t>(1, transitions.size()));
    for (const auto& t : transitions) offline_buf.insert(t);
}

bool Trainer::uses_critic() const {
    return cfg.variant == Variant::ours || cfg.variant == Variant::ours_wo_ce ||
           cfg.variant == Variant::fql;
}

bool Trainer::uses_prior() const {
    return (cfg.variant == Variant::ours || cfg.variant == Variant::ours_wo_ce) && cfg.n_cand > 0;
}

bool Trainer::uses_student() const { return cfg.variant != Variant::fql_wo_q; }

double Trainer::current_alpha1() const {
    return phase == Phase::offline ? cfg.alpha1_offline : cfg.alpha1_online;
}

double Trainer::current_alpha2() const {
    return (phase == Phase::online && cfg.variant == Variant::ours) ? temp.alpha2() : 0.0;
}

Eigen::VectorXd Trainer::draw_prior_noise(RandomStream& rng) {
    const int ad = CrescentWorld::action_dim();
    switch (cfg.variant) {
        case Variant::ours:
        case Variant::ours_wo_ce:
            if (cfg.n_cand > 0) return sample_prior(cvae, world.fixed_state(), rng);
            return rng.normal_vec(ad);
        case Variant::fql:
        case Variant::fql_wo_q:
            return rng.normal_vec(ad);
        case Variant::bc:
            return Eigen::VectorXd::Zero(ad);
    }
    throw std::logic_error("draw_prior_noise: bad variant");
}

Eigen::Vector2d Trainer::policy_action(RandomStream& rng, bool explore) {
    const Eigen::VectorXd s = world.fixed_state();
    if (cfg.variant == Variant::fql_wo_q) {
        const Eigen::VectorXd x0 = rng.normal_vec(CrescentWorld::action_dim());
        const Eigen::MatrixXd a = euler_rollout_fast(FloatNet::snapshot(teacher.velocity_net),
                                                     teacher.euler_steps, s, x0,
                                                     teacher.action_low, teacher.action_high);
        return a.col(0);
    }
    const Eigen::VectorXd x_hat = draw_prior_noise(rng);
    const bool sample = explore && cfg.variant == Variant::ours;
    const ActResult r = act(actor, s, x_hat, sample ? ActMode::sample : ActMode::mean, &rng);
    return r.action;
}

void Trainer::train_step(const std::vector<Transition>& batch) {
    const int B = static_cast<int>(batch.size());
    if (B == 0) throw std::domain_error("train_step: empty batch");
    const int sd = world.state_dim();
    const int ad = CrescentWorld::action_dim();

    Eigen::MatrixXd S(sd, B), A(ad, B), S_next(sd, B);
    Eigen::VectorXd R(B), done(B);
    for (int i = 0; i < B; ++i) {
        S.col(i) = batch[i].state;
        A.col(i) = batch[i].action;
        S_next.col(i) = batch[i].next_state;
        R[i] = batch[i].reward;
        done[i] = batch[i].done ? 1.0 : 0.0;
    }

    // --- 1. critic ---
    if (uses_critic()) {
        Eigen::MatrixXd x_hat_next(ad, B);
        if (uses_prior()) {
            x_hat_next = sample_prior_batch(cvae, S_next, rng_cvae);
        } else {
            x_hat_next = rng_cvae.normal_mat(ad, B);
        }
        Eigen::MatrixXd a_next;
        Eigen::VectorXd logp_next = Eigen::VectorXd::Zero(B);
        if (cfg.variant == Variant::ours) {
            const Eigen::MatrixXd eps = rng_actor.normal_mat(ad, B);
            const ActorEval ev = actor_eval(actor, S_next, x_hat_next, &eps);
            a_next = ev.sampled_action;
            logp_next = ev.logp_sampled.transpose();
        } else {
            const ActorEval ev = actor_eval(actor, S_next, x_hat_next, nullptr);
            a_next = ev.mean_action;
        }
        const Eigen::VectorXd y =
            td_target(critic, R, done, S_next, a_next, logp_next, current_alpha2());
        acc_critic_.add(critic_loss(critic, S, A, y));
        opt_q1.step(critic.q1.params());
        opt_q2.step(critic.q2.params());
        polyak_update(critic);
        notify(StepStage::after_critic);
    }

    // --- 2. prior learning ---
    if (uses_prior()) {
        const SelectionBatch sel = select_advantage_noise_batch(
            FloatNet::snapshot(teacher.velocity_net), teacher.euler_steps, critic, S, cfg.n_cand,
            teacher.action_low, teacher.action_high, rng_candidate);
        const Eigen::MatrixXd eps = rng_cvae.normal_mat(cfg.latent_dim, B);
        const CvaeLossParts parts = cvae_loss(cvae, sel.x_adv, S, eps);
        acc_recon_.add(parts.recon);
        acc_kl_.add(parts.kl);
        opt_encoder.step(cvae.encoder.params());
        opt_decoder.step(cvae.decoder.params());
        notify(StepStage::after_prior);
    }

    // --- 3. teacher flow matching ---
    if (cfg.variant != Variant::bc) {
        acc_cfm_.add(cfm_loss(teacher, S, A, rng_teacher));
        opt_teacher.step(teacher.velocity_net.params());
        notify(StepStage::after_teacher);
    }

    // --- 4. student ---
    if (uses_student()) {
        if (cfg.variant == Variant::bc) {
            const double loss = bc_loss(actor, S, A);
            acc_actor_.add(loss);
            acc_distill_.add(loss);
            opt_actor.step(actor_params());
        } else {
            Eigen::MatrixXd x_hat(ad, B);
            if (uses_prior()) {
                x_hat = sample_prior_batch(cvae, S, rng_cvae);
            } else {
                x_hat = rng_cvae.normal_mat(ad, B);
            }
            const Eigen::MatrixXd a_teacher =
                euler_rollout_fast(FloatNet::snapshot(teacher.velocity_net), teacher.euler_steps,
                                   S, x_hat, teacher.action_low, teacher.action_high);
            ActorLossParts parts;
            if (cfg.variant == Variant::ours) {
                const Eigen::MatrixXd eps = rng_actor.normal_mat(ad, B);
                parts = actor_loss(actor, a_teacher, critic, S, x_hat, current_alpha1(),
                                   current_alpha2(), eps);
                acc_entropy_.add(parts.entropy);
            } else if (cfg.variant == Variant::ours_wo_ce) {
                parts = actor_loss_deterministic(actor, a_teacher, critic, S, x_hat,
                                                 current_alpha1());
            } else {  // fql
                parts = fql_actor_loss(actor, a_teacher, critic, S, x_hat, current_alpha1());
            }
            acc_actor_.add(parts.total);
            acc_distill_.add(parts.distill);
            acc_q_.add(parts.q_term);
            opt_actor.step(actor_params());

            // --- 5. temperature ---
            if (phase == Phase::online && cfg.variant == Variant::ours) {
                temp_loss(temp, parts.entropy);
                temp.step();
                notify(StepStage::after_temperature);
            }
        }
        notify(StepStage::after_student);
    }
}

void Trainer::emit_row(MetricsWriter* metrics) {
    if (!metrics) {
        // drain accumulators so intervals stay aligned
        acc_critic_.take();
        acc_cfm_.take();
        acc_recon_.take();
        acc_kl_.take();
        acc_actor_.take();
        acc_distill_.take();
        acc_q_.take();
        acc_entropy_.take();
        return;
    }
    MetricsRow row;
    row.step = offline_done + online_done;
    row.phase = phase == Phase::offline ? "offline" : "online";
    row.critic_loss = acc_critic_.take();
    row.cfm_loss = acc_cfm_.take();
    row.vae_recon = acc_recon_.take();
    row.vae_kl = acc_kl_.take();
    row.actor_total = acc_actor_.take();
    row.distill = acc_distill_.take();
    row.q_term = acc_q_.take();
    row.entropy = acc_entropy_.take();
    if (cfg.variant == Variant::ours) row.alpha2 = current_alpha2();
    if (cfg.eval_episodes > 0) {
        const EvalReport rep = evaluate(cfg.eval_episodes);
        row.eval_return_mean = rep.return_mean;
        row.eval_return_std = rep.return_std;
        row.mode_coverage = rep.mode_coverage;
        row.q_bias = rep.q_bias;
    }
    metrics->write(row);
    metrics->flush();
}

void Trainer::run_offline(MetricsWriter* metrics) {
    if (offline_buf.empty()) throw std::runtime_error("run_offline: offline dataset not loaded");
    phase = Phase::offline;
    while (offline_done < cfg.offline_steps) {
        const auto batch =
            sample_batch(offline_buf, online_buf, cfg.batch_size, /*balanced=*/false, rng_batch);
        train_step(batch);
        ++offline_done;
        if (offline_done % cfg.eval_interval == 0 || offline_done == cfg.offline_steps)
            emit_row(metrics);
    }
}

void Trainer::run_online(MetricsWriter* metrics) {
    if (offline_buf.empty()) throw std::runtime_error("run_online: offline dataset not loaded");
    phase = Phase::online;
    while (online_done < cfg.online_steps) {
        const Eigen::Vector2d a = policy_action(rng_env, /*explore=*/true);
        const StepResult res = world.step(a);
        Transition t;
        t.state = world.fixed_state();
        t.action = a;
        t.reward = res.reward;
        t.next_state = res.next_state;
        t.done = res.done;
        online_buf.insert(std::move(t));

        const auto batch = sample_batch(offline_buf, online_buf, cfg.batch_size,
                                        cfg.balanced_sampling, rng_batch);
        train_step(batch);
        ++online_done;
        if (online_done % cfg.eval_interval == 0 || online_done == cfg.online_steps)
            emit_row(metrics);
    }
}

EvalReport Trainer::evaluate(int episodes) {
    EvalReport rep = evaluate_policy(world, episodes, [&](int) {
        return policy_action(rng_eval, /*explore=*/false);
    });
    if (uses_critic()) {
        // bias of the critic against the true one-step return on fresh
        // mean-mode actions
        double sum = 0.0;
        const int n = episodes;
        for (int i = 0; i < n; ++i) {
            const Eigen::Vector2d a = policy_action(rng_eval, false);
            const double q =
                q_min(critic, world.fixed_state(), Eigen::MatrixXd(a), false)[0];
            sum += q - world.reward(a);
        }
        rep.q_bias = sum / n;
    }
    return rep;
}

}  // namespace gsflow
