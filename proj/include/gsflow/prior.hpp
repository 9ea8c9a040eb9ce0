#pragma once

#include <Eigen/Core>
#include <vector>

#include "gsflow/critic.hpp"
#include "gsflow/mlp.hpp"
#include "gsflow/rng.hpp"
#include "gsflow/teacher.hpp"

namespace gsflow {

/// One advantage-noise pairing: the candidate noise whose teacher action
/// attained the highest critic value for this state.
struct AdvantagePair {
    Eigen::VectorXd s;
    Eigen::VectorXd x_adv;
    double q_of_best = 0.0;
};

/// State-conditional VAE over initial-noise vectors. Encoder emits
/// (mu, log_std) of the latent posterior; the decoder reconstructs a noise
/// vector from (z, s). Decoder outputs are intentionally not clipped.
struct Cvae {
    Mlp encoder;  // concat(x, s) -> 2*latent_dim
    Mlp decoder;  // concat(z, s) -> action_dim
    int latent_dim = 2;
    double kl_weight = 0.1;
    double recon_weight = 1.0;

    static Cvae make(int state_dim, int action_dim, int latent_dim,
                     const std::vector<int>& hidden, double kl_weight, double recon_weight,
                     RandomStream& rng);
};

/// Candidate set captured during a selection pass, for oracle re-scans.
struct CandidateCapture {
    std::vector<Eigen::MatrixXd> noises;   // per state: action_dim x n_cand
    std::vector<Eigen::MatrixXd> actions;  // per state: action_dim x n_cand
    std::vector<Eigen::VectorXd> q_values; // per state: n_cand
};

/// Argmax-Q candidate selection on one state; ties break to the lowest
/// candidate index. Uses min(Q1, Q2) in double precision.
AdvantagePair select_advantage_noise(const FlowTeacher& teacher, const TwinCritic& critic,
                                     const Eigen::VectorXd& s, int n_cand, RandomStream& rng,
                                     CandidateCapture* capture = nullptr);

/// Production path: selection for every column of S at once. Candidate
/// rollouts go through the float snapshot of the velocity net; Q evaluation
/// and the argmax stay in double. Noise draw order is state-major
/// (state 0's n_cand candidates first).
struct SelectionBatch {
    Eigen::MatrixXd x_adv;   // action_dim x B
    Eigen::VectorXd q_best;  // B
};
SelectionBatch select_advantage_noise_batch(const FloatNet& velocity, int euler_steps,
                                            const TwinCritic& critic, const Eigen::MatrixXd& S,
                                            int n_cand, const Eigen::VectorXd& action_low,
                                            const Eigen::VectorXd& action_high, RandomStream& rng,
                                            CandidateCapture* capture = nullptr);

struct CvaeLossParts {
    double total = 0.0;
    double recon = 0.0;
    double kl = 0.0;
};

/// ELBO-style loss with captured reparameterization draws (columns of Eps,
/// one latent draw per pair): recon_weight*recon + kl_weight*kl, gradients
/// into encoder and decoder. x_adv enters as a constant target.
CvaeLossParts cvae_loss(Cvae& vae, const Eigen::MatrixXd& X_adv, const Eigen::MatrixXd& S,
                        const Eigen::MatrixXd& Eps);

CvaeLossParts cvae_loss(Cvae& vae, const std::vector<AdvantagePair>& batch, RandomStream& rng);

/// Decode z ~ N(0, I_latent); identical at train and inference time.
Eigen::VectorXd sample_prior(const Cvae& vae, const Eigen::VectorXd& s, RandomStream& rng);
Eigen::MatrixXd sample_prior_batch(const Cvae& vae, const Eigen::MatrixXd& S, RandomStream& rng);

}  // namespace gsflow
