#include "gsflow/prior.hpp"

#include <stdexcept>

#include "gsflow/gaussian.hpp"

namespace gsflow {

Cvae Cvae::make(int state_dim, int action_dim, int latent_dim, const std::vector<int>& hidden,
                double kl_weight, double recon_weight, RandomStream& rng) {
    if (latent_dim < 1) throw std::invalid_argument("Cvae: latent_dim must be >= 1");
    std::vector<int> enc_dims, dec_dims;
    enc_dims.push_back(action_dim + state_dim);
    dec_dims.push_back(latent_dim + state_dim);
    for (int h : hidden) {
        enc_dims.push_back(h);
        dec_dims.push_back(h);
    }
    enc_dims.push_back(2 * latent_dim);
    dec_dims.push_back(action_dim);
    Cvae v;
    v.encoder = Mlp::make(enc_dims, Activation::relu, rng);
    v.decoder = Mlp::make(dec_dims, Activation::relu, rng);
    v.latent_dim = latent_dim;
    v.kl_weight = kl_weight;
    v.recon_weight = recon_weight;
    return v;
}

namespace {

int argmax_lowest_index(const Eigen::VectorXd& q) {
    int best = 0;
    for (int j = 1; j < q.size(); ++j)
        if (q[j] > q[best]) best = j;
    return best;
}

}  // namespace

AdvantagePair select_advantage_noise(const FlowTeacher& teacher, const TwinCritic& critic,
                                     const Eigen::VectorXd& s, int n_cand, RandomStream& rng,
                                     CandidateCapture* capture) {
    if (n_cand < 1) throw std::invalid_argument("select_advantage_noise: n_cand must be >= 1");
    const Eigen::MatrixXd X0 = rng.normal_mat(teacher.action_dim, n_cand);
    const Eigen::MatrixXd S = s.replicate(1, n_cand);
    const Eigen::MatrixXd actions = euler_sample_batch(teacher, S, X0);
    const Eigen::VectorXd q = q_min(critic, S, actions);
    const int best = argmax_lowest_index(q);
    if (capture) {
        capture->noises.push_back(X0);
        capture->actions.push_back(actions);
        capture->q_values.push_back(q);
    }
    return {s, X0.col(best), q[best]};
}

SelectionBatch select_advantage_noise_batch(const FloatNet& velocity, int euler_steps,
                                            const TwinCritic& critic, const Eigen::MatrixXd& S,
                                            int n_cand, const Eigen::VectorXd& action_low,
                                            const Eigen::VectorXd& action_high, RandomStream& rng,
                                            CandidateCapture* capture) {
    if (n_cand < 1) throw std::invalid_argument("select_advantage_noise_batch: n_cand must be >= 1");
    const int B = static_cast<int>(S.cols());
    const int ad = static_cast<int>(action_low.size());
    const Eigen::MatrixXd X0 = rng.normal_mat(ad, B * n_cand);
    Eigen::MatrixXd S_rep(S.rows(), B * n_cand);
    for (int b = 0; b < B; ++b)
        S_rep.middleCols(b * n_cand, n_cand) = S.col(b).replicate(1, n_cand);

    const Eigen::MatrixXd actions =
        euler_rollout_fast(velocity, euler_steps, S_rep, X0, action_low, action_high);
    const Eigen::VectorXd q = q_min(critic, S_rep, actions);

    SelectionBatch out;
    out.x_adv.resize(ad, B);
    out.q_best.resize(B);
    for (int b = 0; b < B; ++b) {
        const Eigen::VectorXd qb = q.segment(b * n_cand, n_cand);
        const int best = argmax_lowest_index(qb);
        out.x_adv.col(b) = X0.col(b * n_cand + best);
        out.q_best[b] = qb[best];
        if (capture) {
            capture->noises.push_back(X0.middleCols(b * n_cand, n_cand));
            capture->actions.push_back(actions.middleCols(b * n_cand, n_cand));
            capture->q_values.push_back(qb);
        }
    }
    return out;
}

CvaeLossParts cvae_loss(Cvae& vae, const Eigen::MatrixXd& X_adv, const Eigen::MatrixXd& S,
                        const Eigen::MatrixXd& Eps) {
    const int B = static_cast<int>(X_adv.cols());
    if (B == 0) throw std::domain_error("cvae_loss: empty batch");
    const int latent = vae.latent_dim;
    if (Eps.rows() != latent || Eps.cols() != B)
        throw std::invalid_argument("cvae_loss: eps shape mismatch");

    Eigen::MatrixXd enc_in(X_adv.rows() + S.rows(), B);
    enc_in.topRows(X_adv.rows()) = X_adv;
    enc_in.bottomRows(S.rows()) = S;
    thread_local MlpCache enc_cache;
    const Eigen::MatrixXd enc_out = mlp_forward(vae.encoder, enc_in, &enc_cache);

    const Eigen::MatrixXd mu = enc_out.topRows(latent);
    const Eigen::MatrixXd log_std_raw = enc_out.bottomRows(latent);
    const Eigen::MatrixXd log_std = log_std_raw.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
    const Eigen::MatrixXd sigma = log_std.array().exp();
    const Eigen::MatrixXd z = mu + sigma.cwiseProduct(Eps);

    Eigen::MatrixXd dec_in(latent + S.rows(), B);
    dec_in.topRows(latent) = z;
    dec_in.bottomRows(S.rows()) = S;
    thread_local MlpCache dec_cache;
    const Eigen::MatrixXd x_hat = mlp_forward(vae.decoder, dec_in, &dec_cache);

    const Eigen::MatrixXd resid = x_hat - X_adv;
    CvaeLossParts parts;
    parts.recon = resid.colwise().squaredNorm().mean();
    parts.kl = gaussian_kl_to_standard_cols(mu, log_std).mean();
    parts.total = vae.recon_weight * parts.recon + vae.kl_weight * parts.kl;

    // recon path: d/dx_hat -> decoder -> dz -> encoder heads
    const Eigen::MatrixXd dxhat = (2.0 * vae.recon_weight / B) * resid;
    const Eigen::MatrixXd dz = mlp_backward(vae.decoder, dec_cache, dxhat).topRows(latent);

    Eigen::MatrixXd dmu = dz;
    Eigen::MatrixXd dlog_std = dz.cwiseProduct(sigma).cwiseProduct(Eps);
    // kl path: d/dmu = mu, d/dlog_std = sigma^2 - 1 (per dim)
    dmu += (vae.kl_weight / B) * mu;
    dlog_std += (vae.kl_weight / B) * (sigma.array().square() - 1.0).matrix();

    // clamp subgradient: zero where the raw log-std was clipped
    const auto clamped =
        (log_std_raw.array() < kLogStdMin || log_std_raw.array() > kLogStdMax).cast<double>();
    dlog_std = dlog_std.cwiseProduct((1.0 - clamped).matrix());

    Eigen::MatrixXd denc(2 * latent, B);
    denc.topRows(latent) = dmu;
    denc.bottomRows(latent) = dlog_std;
    mlp_backward(vae.encoder, enc_cache, denc);
    return parts;
}

CvaeLossParts cvae_loss(Cvae& vae, const std::vector<AdvantagePair>& batch, RandomStream& rng) {
    if (batch.empty()) throw std::domain_error("cvae_loss: empty batch");
    const int B = static_cast<int>(batch.size());
    const int ad = static_cast<int>(batch[0].x_adv.size());
    const int sd = static_cast<int>(batch[0].s.size());
    Eigen::MatrixXd X(ad, B), S(sd, B);
    for (int i = 0; i < B; ++i) {
        X.col(i) = batch[i].x_adv;
        S.col(i) = batch[i].s;
    }
    const Eigen::MatrixXd Eps = rng.normal_mat(vae.latent_dim, B);
    return cvae_loss(vae, X, S, Eps);
}

Eigen::MatrixXd sample_prior_batch(const Cvae& vae, const Eigen::MatrixXd& S, RandomStream& rng) {
    const int B = static_cast<int>(S.cols());
    const Eigen::MatrixXd Z = rng.normal_mat(vae.latent_dim, B);
    Eigen::MatrixXd in(vae.latent_dim + S.rows(), B);
    in.topRows(vae.latent_dim) = Z;
    in.bottomRows(S.rows()) = S;
    return mlp_forward(vae.decoder, in);
}

Eigen::VectorXd sample_prior(const Cvae& vae, const Eigen::VectorXd& s, RandomStream& rng) {
    return sample_prior_batch(vae, Eigen::MatrixXd(s), rng).col(0);
}

}  // namespace gsflow
