#include "gsflow/teacher.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gsflow {

void fill_time_features(double t, double* out) {
    out[0] = t;
    double freq = 2.0 * std::numbers::pi;
    for (int j = 0; j < 4; ++j) {
        out[1 + 2 * j] = std::sin(freq * t);
        out[2 + 2 * j] = std::cos(freq * t);
        freq *= 2.0;
    }
}

void fill_space_features(const double* x, int dim, double* out) {
    // raw coordinate plus two sin/cos octaves per dimension
    int at = 0;
    for (int d = 0; d < dim; ++d) {
        out[at++] = x[d];
        double freq = std::numbers::pi;
        for (int j = 0; j < 2; ++j) {
            out[at++] = std::sin(freq * x[d]);
            out[at++] = std::cos(freq * x[d]);
            freq *= 2.0;
        }
    }
}

FlowTeacher FlowTeacher::make(int state_dim, int action_dim, const std::vector<int>& hidden,
                              int euler_steps, const Eigen::VectorXd& action_low,
                              const Eigen::VectorXd& action_high, RandomStream& rng) {
    if (euler_steps < 1) throw std::invalid_argument("FlowTeacher: euler_steps must be >= 1");
    std::vector<int> dims;
    dims.push_back(action_dim * kSpaceFeaturesPerDim + state_dim + kTimeFeatureDim);
    for (int h : hidden) dims.push_back(h);
    dims.push_back(action_dim);
    FlowTeacher t;
    t.velocity_net = Mlp::make(dims, Activation::relu, rng);
    t.euler_steps = euler_steps;
    t.action_dim = action_dim;
    t.state_dim = state_dim;
    t.action_low = action_low;
    t.action_high = action_high;
    return t;
}

namespace {

Eigen::MatrixXd velocity_input(const Eigen::MatrixXd& X, const Eigen::MatrixXd& S, double t) {
    const int sf = static_cast<int>(X.rows()) * kSpaceFeaturesPerDim;
    Eigen::MatrixXd in(sf + S.rows() + kTimeFeatureDim, X.cols());
    for (int c = 0; c < X.cols(); ++c)
        fill_space_features(X.col(c).data(), static_cast<int>(X.rows()), in.col(c).data());
    in.middleRows(sf, S.rows()) = S;
    double feats[kTimeFeatureDim];
    fill_time_features(t, feats);
    for (int k = 0; k < kTimeFeatureDim; ++k)
        in.row(sf + S.rows() + k).setConstant(feats[k]);
    return in;
}

}  // namespace

double cfm_loss(FlowTeacher& teacher, const Eigen::MatrixXd& S, const Eigen::MatrixXd& A,
                const Eigen::MatrixXd& X0, const Eigen::VectorXd& T) {
    const int B = static_cast<int>(S.cols());
    if (B == 0) throw std::domain_error("cfm_loss: empty batch");
    if (A.cols() != B || X0.cols() != B || T.size() != B)
        throw std::invalid_argument("cfm_loss: batch size mismatch");

    Eigen::MatrixXd Xt(X0.rows(), B);
    for (int i = 0; i < B; ++i) Xt.col(i) = (1.0 - T[i]) * X0.col(i) + T[i] * A.col(i);
    const int sf = static_cast<int>(Xt.rows()) * kSpaceFeaturesPerDim;
    Eigen::MatrixXd in(sf + S.rows() + kTimeFeatureDim, B);
    for (int i = 0; i < B; ++i) {
        fill_space_features(Xt.col(i).data(), static_cast<int>(Xt.rows()), in.col(i).data());
        in.col(i).segment(sf, S.rows()) = S.col(i);
        fill_time_features(T[i], in.col(i).data() + sf + S.rows());
    }

    thread_local MlpCache cache;
    const Eigen::MatrixXd v = mlp_forward(teacher.velocity_net, in, &cache);
    const Eigen::MatrixXd resid = v - (A - X0);
    const double loss = resid.colwise().squaredNorm().mean();
    mlp_backward(teacher.velocity_net, cache, (2.0 / B) * resid);
    return loss;
}

double cfm_loss(FlowTeacher& teacher, const Eigen::MatrixXd& S, const Eigen::MatrixXd& A,
                RandomStream& rng) {
    const int B = static_cast<int>(S.cols());
    if (B == 0) throw std::domain_error("cfm_loss: empty batch");
    const Eigen::MatrixXd X0 = rng.normal_mat(teacher.action_dim, B);
    Eigen::VectorXd T(B);
    for (int i = 0; i < B; ++i) T[i] = rng.uniform();
    return cfm_loss(teacher, S, A, X0, T);
}

Eigen::MatrixXd euler_sample_batch(const FlowTeacher& teacher, const Eigen::MatrixXd& S,
                                   const Eigen::MatrixXd& X0) {
    if (X0.rows() != teacher.action_dim)
        throw std::invalid_argument("euler_sample: x0 dim mismatch");
    const int K = teacher.euler_steps;
    Eigen::MatrixXd x = X0;
    for (int k = 0; k < K; ++k) {
        const double t = static_cast<double>(k) / K;
        x += (1.0 / K) * mlp_forward(teacher.velocity_net, velocity_input(x, S, t));
    }
    for (int c = 0; c < x.cols(); ++c)
        x.col(c) = x.col(c).cwiseMax(teacher.action_low).cwiseMin(teacher.action_high);
    return x;
}

Eigen::VectorXd euler_sample(const FlowTeacher& teacher, const Eigen::VectorXd& s,
                             const Eigen::VectorXd& x0) {
    return euler_sample_batch(teacher, Eigen::MatrixXd(s), Eigen::MatrixXd(x0)).col(0);
}

Eigen::MatrixXd euler_rollout_fast(const FloatNet& velocity, int euler_steps,
                                   const Eigen::MatrixXd& S, const Eigen::MatrixXd& X0,
                                   const Eigen::VectorXd& action_low,
                                   const Eigen::VectorXd& action_high) {
    const int B = static_cast<int>(X0.cols());
    const int ad = static_cast<int>(X0.rows());
    const int sd = static_cast<int>(S.rows());
    const int sf = ad * kSpaceFeaturesPerDim;
    Eigen::MatrixXf in(sf + sd + kTimeFeatureDim, B);
    in.middleRows(sf, sd) = S.cast<float>();
    Eigen::MatrixXf x = X0.cast<float>();
    double sbuf[16 * kSpaceFeaturesPerDim];
    double xbuf[16];
    for (int k = 0; k < euler_steps; ++k) {
        for (int c = 0; c < B; ++c) {
            for (int d = 0; d < ad; ++d) xbuf[d] = x(d, c);
            fill_space_features(xbuf, ad, sbuf);
            for (int f = 0; f < sf; ++f) in(f, c) = static_cast<float>(sbuf[f]);
        }
        double feats[kTimeFeatureDim];
        fill_time_features(static_cast<double>(k) / euler_steps, feats);
        for (int f = 0; f < kTimeFeatureDim; ++f)
            in.row(sf + sd + f).setConstant(static_cast<float>(feats[f]));
        x += (1.0f / euler_steps) * velocity.forward(in);
    }
    Eigen::MatrixXd out = x.cast<double>();
    for (int c = 0; c < B; ++c)
        out.col(c) = out.col(c).cwiseMax(action_low).cwiseMin(action_high);
    return out;
}

std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> sample_candidates(
    const FlowTeacher& teacher, const Eigen::VectorXd& s, int n, RandomStream& rng) {
    if (n < 1) throw std::invalid_argument("sample_candidates: n must be >= 1");
    const Eigen::MatrixXd X0 = rng.normal_mat(teacher.action_dim, n);
    const Eigen::MatrixXd S = s.replicate(1, n);
    const Eigen::MatrixXd actions = euler_sample_batch(teacher, S, X0);
    std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> out;
    out.reserve(n);
    for (int j = 0; j < n; ++j) out.emplace_back(X0.col(j), actions.col(j));
    return out;
}

}  // namespace gsflow
