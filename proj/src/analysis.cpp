#include "gsflow/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace gsflow {

namespace {

double sample_std(const Eigen::VectorXd& v) {
    if (v.size() < 2) return 0.0;
    const double m = v.mean();
    return std::sqrt((v.array() - m).square().sum() / (v.size() - 1));
}

/// V(x) = minQ(s, teacher(s, x)) for each noise column, via the production
/// inference path (float rollout, double Q).
Eigen::VectorXd value_of_noise(const FlowTeacher& teacher, const TwinCritic& critic,
                               const Eigen::VectorXd& s, const Eigen::MatrixXd& X) {
    const int n = static_cast<int>(X.cols());
    const Eigen::MatrixXd S = s.replicate(1, n);
    const Eigen::MatrixXd actions =
        euler_rollout_fast(FloatNet::snapshot(teacher.velocity_net), teacher.euler_steps, S, X,
                           teacher.action_low, teacher.action_high);
    return q_min(critic, S, actions);
}

}  // namespace

double bound_gap_term(double lipschitz_hat, double eps_vae) {
    return lipschitz_hat * std::sqrt(std::max(0.0, eps_vae));
}

BoundReport estimate_bound(const FlowTeacher& teacher, const TwinCritic& critic, const Cvae& vae,
                           const Eigen::VectorXd& s, int n_mc, int n_best, RandomStream& rng) {
    if (n_best < 1 || n_mc < n_best) throw std::domain_error("estimate_bound: need n_mc >= n_best >= 1");
    const int ad = teacher.action_dim;

    const Eigen::MatrixXd X = rng.normal_mat(ad, n_mc);
    const Eigen::VectorXd v = value_of_noise(teacher, critic, s, X);

    BoundReport rep;
    rep.n_mc = n_mc;
    rep.n_best = n_best;
    rep.j_base = v.mean();
    rep.se_base = sample_std(v) / std::sqrt(static_cast<double>(n_mc));

    const int groups = n_mc / n_best;
    Eigen::VectorXd group_max(groups);
    Eigen::MatrixXd winners(ad, groups);
    for (int g = 0; g < groups; ++g) {
        int best = g * n_best;
        for (int j = g * n_best + 1; j < (g + 1) * n_best; ++j)
            if (v[j] > v[best]) best = j;
        group_max[g] = v[best];
        winners.col(g) = X.col(best);
    }
    rep.j_oracle = group_max.mean();
    rep.se_oracle = sample_std(group_max) / std::sqrt(static_cast<double>(groups));
    rep.delta_select = rep.j_oracle - rep.j_base;

    // independent coupling: one fresh decoder sample per oracle group
    const Eigen::MatrixXd x_hat_groups =
        sample_prior_batch(vae, s.replicate(1, groups), rng);
    const Eigen::VectorXd sq_err = (winners - x_hat_groups).colwise().squaredNorm();
    rep.eps_vae = sq_err.mean();
    const double se_eps = sample_std(sq_err) / std::sqrt(static_cast<double>(groups));

    // empirical Lipschitz lower estimate over 1e4 random pairs
    const int n_pairs = 10000;
    const Eigen::MatrixXd Xa = rng.normal_mat(ad, n_pairs);
    const Eigen::MatrixXd Xb = rng.normal_mat(ad, n_pairs);
    const Eigen::VectorXd va = value_of_noise(teacher, critic, s, Xa);
    const Eigen::VectorXd vb = value_of_noise(teacher, critic, s, Xb);
    double lip = 0.0;
    for (int i = 0; i < n_pairs; ++i) {
        const double dist = (Xa.col(i) - Xb.col(i)).norm();
        if (dist > 1e-12) lip = std::max(lip, std::abs(va[i] - vb[i]) / dist);
    }
    rep.lipschitz_hat = lip;

    const Eigen::MatrixXd x_hat = sample_prior_batch(vae, s.replicate(1, n_mc), rng);
    const Eigen::VectorXd v_am = value_of_noise(teacher, critic, s, x_hat);
    rep.j_amortized = v_am.mean();
    rep.se_amortized = sample_std(v_am) / std::sqrt(static_cast<double>(n_mc));

    rep.slack = rep.j_amortized - (rep.j_base + rep.delta_select -
                                   bound_gap_term(rep.lipschitz_hat, rep.eps_vae));
    const double se_sqrt_eps = rep.eps_vae > 0.0 ? se_eps / (2.0 * std::sqrt(rep.eps_vae)) : 0.0;
    rep.se_slack = std::sqrt(rep.se_amortized * rep.se_amortized + rep.se_oracle * rep.se_oracle +
                             rep.lipschitz_hat * rep.lipschitz_hat * se_sqrt_eps * se_sqrt_eps);
    return rep;
}

BiasReport q_bias(const TwinCritic& critic, const std::function<Eigen::Vector2d()>& sampler,
                  const CrescentWorld& world, int n) {
    if (n < 1) throw std::domain_error("q_bias: n must be >= 1");
    BiasReport rep;
    rep.n = n;
    double sum = 0.0, sum_abs = 0.0;
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector2d a = sampler();
        const double q = q_min(critic, Eigen::MatrixXd(world.fixed_state()), Eigen::MatrixXd(a))[0];
        const double bias = q - world.reward(a);
        sum += bias;
        sum_abs += std::abs(bias);
    }
    rep.mean_bias = sum / n;
    rep.mean_abs_bias = sum_abs / n;
    return rep;
}

BestOfNResult best_of_n_eval(const FlowTeacher& teacher, const TwinCritic& critic,
                             const CrescentWorld& world, int n, int episodes, RandomStream& rng,
                             BestOfNCapture* capture) {
    if (n < 1) throw std::domain_error("best_of_n_eval: n must be >= 1");
    if (episodes < 1) throw std::domain_error("best_of_n_eval: episodes must be >= 1");
    const Eigen::VectorXd s = world.fixed_state();
    double sum = 0.0, sum_sq = 0.0;
    const FloatNet vel = FloatNet::snapshot(teacher.velocity_net);
    for (int e = 0; e < episodes; ++e) {
        const Eigen::MatrixXd X = rng.normal_mat(teacher.action_dim, n);
        const Eigen::MatrixXd S = s.replicate(1, n);
        const Eigen::MatrixXd actions = euler_rollout_fast(vel, teacher.euler_steps, S, X,
                                                           teacher.action_low, teacher.action_high);
        const Eigen::VectorXd q = q_min(critic, S, actions);
        int best = 0;
        for (int j = 1; j < n; ++j)
            if (q[j] > q[best]) best = j;
        if (capture) {
            capture->actions.push_back(actions);
            capture->q_values.push_back(q);
            capture->chosen.push_back(best);
        }
        const double r = world.step(actions.col(best)).reward;
        sum += r;
        sum_sq += r * r;
    }
    BestOfNResult res;
    res.return_mean = sum / episodes;
    res.return_std = std::sqrt(std::max(0.0, sum_sq / episodes - res.return_mean * res.return_mean));
    return res;
}

KdeGrid kde_grid(const std::vector<Eigen::Vector2d>& points, int resolution, double bandwidth,
                 double x_min, double x_max, double y_min, double y_max) {
    if (points.size() < 2) throw std::domain_error("kde_grid: need at least 2 points");
    if (resolution < 2) throw std::invalid_argument("kde_grid: resolution too small");
    const int n = static_cast<int>(points.size());

    double h = bandwidth;
    if (h <= 0.0) {
        // Silverman for d=2: h = sigma * n^(-1/6), isotropic sigma
        double mx = 0.0, my = 0.0;
        for (const auto& p : points) {
            mx += p.x();
            my += p.y();
        }
        mx /= n;
        my /= n;
        double vx = 0.0, vy = 0.0;
        for (const auto& p : points) {
            vx += (p.x() - mx) * (p.x() - mx);
            vy += (p.y() - my) * (p.y() - my);
        }
        const double sigma = std::sqrt((vx + vy) / (2.0 * std::max(1, n - 1)));
        h = sigma * std::pow(static_cast<double>(n), -1.0 / 6.0);
        const double span = std::max(x_max - x_min, y_max - y_min);
        h = std::max(h, 0.005 * span);  // floor keeps the peak resolvable on the grid
    }

    KdeGrid grid;
    grid.x_min = x_min;
    grid.x_max = x_max;
    grid.y_min = y_min;
    grid.y_max = y_max;
    grid.resolution = resolution;
    grid.bandwidth = h;
    grid.density = Eigen::MatrixXd::Zero(resolution, resolution);

    const double dx = (x_max - x_min) / resolution;
    const double dy = (y_max - y_min) / resolution;
    const double norm = 1.0 / (n * 2.0 * M_PI * h * h);
    const double inv2h2 = 1.0 / (2.0 * h * h);
    for (int iy = 0; iy < resolution; ++iy) {
        const double y = y_min + (iy + 0.5) * dy;
        for (int ix = 0; ix < resolution; ++ix) {
            const double x = x_min + (ix + 0.5) * dx;
            double acc = 0.0;
            for (const auto& p : points) {
                const double d2 = (x - p.x()) * (x - p.x()) + (y - p.y()) * (y - p.y());
                acc += std::exp(-d2 * inv2h2);
            }
            grid.density(iy, ix) = norm * acc;
        }
    }
    return grid;
}

std::string bound_report_json(const BoundReport& r) {
    nlohmann::json j;
    j["j_base"] = r.j_base;
    j["j_oracle"] = r.j_oracle;
    j["delta_select"] = r.delta_select;
    j["eps_vae"] = r.eps_vae;
    j["lipschitz_hat"] = r.lipschitz_hat;
    j["j_amortized"] = r.j_amortized;
    j["slack"] = r.slack;
    j["se_base"] = r.se_base;
    j["se_oracle"] = r.se_oracle;
    j["se_amortized"] = r.se_amortized;
    j["se_slack"] = r.se_slack;
    j["n_mc"] = r.n_mc;
    j["n_best"] = r.n_best;
    return j.dump(2);
}

std::string bias_report_json(const BiasReport& r) {
    nlohmann::json j;
    j["mean_bias"] = r.mean_bias;
    j["mean_abs_bias"] = r.mean_abs_bias;
    j["n"] = r.n;
    return j.dump(2);
}

void write_kde_csv(const std::string& path, const KdeGrid& grid) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_kde_csv: cannot open " + path);
    os << "x,y,density\n";
    const double dx = (grid.x_max - grid.x_min) / grid.resolution;
    const double dy = (grid.y_max - grid.y_min) / grid.resolution;
    char buf[128];
    for (int iy = 0; iy < grid.resolution; ++iy) {
        for (int ix = 0; ix < grid.resolution; ++ix) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", grid.x_min + (ix + 0.5) * dx,
                          grid.y_min + (iy + 0.5) * dy, grid.density(iy, ix));
            os << buf;
        }
    }
}

void write_advantage_pairs_csv(const std::string& path, const std::vector<AdvantagePair>& pairs) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_advantage_pairs_csv: cannot open " + path);
    os << "s...,x0,x1,q_best\n";
    char buf[64];
    for (const auto& p : pairs) {
        for (int i = 0; i < p.s.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g,", p.s[i]);
            os << buf;
        }
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.x_adv[0], p.x_adv[1], p.q_of_best);
        os << buf;
    }
}

}  // namespace gsflow
