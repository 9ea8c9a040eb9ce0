#pragma once

#include <map>
#include <string>
#include <vector>

namespace gsflow {

enum class Variant { ours, ours_wo_ce, fql, fql_wo_q, bc };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

/// Flat training configuration. Defaults are the Multi-Crescent preset;
/// every key is settable from a config file or key=value overrides, and
/// unknown keys are rejected.
struct TrainConfig {
    long seed = 0;
    long offline_steps = 50000;
    long online_steps = 50000;
    int batch_size = 256;
    int n_cand = 10;  // 0 disables the prior module (Gaussian noise)
    int euler_steps = 16;
    int latent_dim = 2;
    double kl_weight = 0.1;
    double recon_weight = 1.0;
    double alpha1_offline = 100.0;
    double alpha1_online = 10.0;
    double entropy_mult = 0.5;  // H_target = -mult * action_dim
    double gamma = 0.99;
    double tau = 0.005;
    double teacher_lr = 1e-3;
    double critic_lr = 3e-4;
    double actor_lr = 3e-4;
    double cvae_lr = 3e-4;
    double alpha_lr = 3e-4;
    double alpha2_init = 0.01;
    bool balanced_sampling = true;
    Variant variant = Variant::ours;
    int eval_episodes = 50;
    long eval_interval = 1000;
    int hidden_dim = 64;  // two hidden layers of this width in every net
    long online_buffer_capacity = 100000;
    // dataset parameters
    int per_crescent = 2500;
    int background = 2000;
    std::string dataset_path = "dataset.txt";
    double reward_moderate = 4.0;
    double reward_mid = 7.0;
    double reward_max = 10.0;

    std::vector<int> hidden() const { return {hidden_dim, hidden_dim}; }
    double target_entropy(int action_dim) const { return -entropy_mult * action_dim; }

    /// Throws std::invalid_argument on unknown keys or unparsable values.
    void set(const std::string& key, const std::string& value);

    /// Canonical text form: fixed key order, %.17g doubles; reparses to an
    /// identical config.
    std::string to_text() const;

    static TrainConfig from_text(const std::string& text);
    static TrainConfig load(const std::string& path);
    void save(const std::string& path) const;

    /// Applies `key=value` override strings on top of this config.
    void apply_overrides(const std::vector<std::string>& overrides);

    bool operator==(const TrainConfig& o) const { return to_text() == o.to_text(); }
};

}  // namespace gsflow
