// gsflow command-line driver: dataset generation, the two training phases,
// evaluation, ablation presets, and analysis reports.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "gsflow/analysis.hpp"
#include "gsflow/checkpoint.hpp"
#include "gsflow/config.hpp"
#include "gsflow/trainer.hpp"

namespace fs = std::filesystem;
using namespace gsflow;

namespace {

std::string runs_root() {
    const char* env = std::getenv("GSFLOW_RUNS_DIR");
    return env ? env : "runs";
}

std::vector<long> parse_seeds(const std::string& csv, long fallback) {
    if (csv.empty()) return {fallback};
    std::vector<long> seeds;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) seeds.push_back(std::stol(tok));
    if (seeds.empty()) seeds.push_back(fallback);
    return seeds;
}

TrainConfig effective_config(const std::string& config_path,
                             const std::vector<std::string>& overrides) {
    TrainConfig cfg = config_path.empty() ? TrainConfig{} : TrainConfig::load(config_path);
    cfg.apply_overrides(overrides);
    return cfg;
}

fs::path seed_dir(const std::string& run_name, long seed) {
    return fs::path(runs_root()) / run_name / ("seed" + std::to_string(seed));
}

/// One training cell: offline and/or online phase into a run directory.
void run_cell(TrainConfig cfg, const fs::path& dir, const std::string& resume_ckpt, bool offline,
              bool online) {
    fs::create_directories(dir);
    cfg.save((dir / "config.txt").string());
    std::unique_ptr<Trainer> trainer;
    if (!resume_ckpt.empty()) {
        trainer = std::make_unique<Trainer>(cfg);
        restore_checkpoint_state(resume_ckpt, *trainer);
        trainer->load_offline_dataset_file(cfg.dataset_path);
    } else {
        trainer = std::make_unique<Trainer>(cfg);
        trainer->load_offline_dataset_file(cfg.dataset_path);
    }
    MetricsWriter metrics((dir / "metrics.csv").string());
    if (offline) trainer->run_offline(&metrics);
    if (online) trainer->run_online(&metrics);
    save_checkpoint((dir / "checkpoint.bin").string(), *trainer);
}

void run_cells_parallel(const std::vector<std::function<void()>>& cells) {
    const unsigned workers =
        std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                        static_cast<unsigned>(cells.size())));
    std::mutex mu;
    size_t next = 0;
    std::exception_ptr first_error;
    auto worker = [&] {
        while (true) {
            size_t idx;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= cells.size() || first_error) return;
                idx = next++;
            }
            try {
                cells[idx]();
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

void emit_analysis(Trainer& trainer, const fs::path& out_dir, int n_mc, int n_best) {
    fs::create_directories(out_dir);
    RandomStream rng = RandomStream::for_stream(trainer.cfg.seed, "analysis");

    const BoundReport bound = estimate_bound(trainer.teacher, trainer.critic, trainer.cvae,
                                             trainer.world.fixed_state(), n_mc, n_best, rng);
    std::ofstream(out_dir / "bound.json") << bound_report_json(bound) << "\n";

    const BiasReport bias =
        q_bias(trainer.critic, [&] { return trainer.policy_action(rng, false); }, trainer.world,
               1000);
    std::ofstream(out_dir / "bias.json") << bias_report_json(bias) << "\n";

    // decoded prior samples and their KDE over the noise plane
    std::vector<Eigen::Vector2d> prior_points;
    for (int i = 0; i < 1000; ++i) {
        const Eigen::VectorXd x = sample_prior(trainer.cvae, trainer.world.fixed_state(), rng);
        prior_points.emplace_back(x[0], x[1]);
    }
    write_kde_csv((out_dir / "kde.csv").string(),
                  kde_grid(prior_points, 200, 0.0));

    // one fresh advantage-selection pass as a diagnostic dump
    std::vector<AdvantagePair> pairs;
    for (int i = 0; i < 256; ++i)
        pairs.push_back(select_advantage_noise(trainer.teacher, trainer.critic,
                                               trainer.world.fixed_state(),
                                               std::max(1, trainer.cfg.n_cand), rng));
    write_advantage_pairs_csv((out_dir / "adv_pairs.csv").string(), pairs);
}

int do_main(int argc, char** argv) {
    CLI::App app{"GS-flow Multi-Crescent laboratory"};
    app.require_subcommand(1);

    std::string config_path, run_name, seeds_csv, from, checkpoint_path, out_path, preset;
    std::vector<std::string> overrides;
    long seed_flag = -1;
    int episodes = 50;
    int n_mc = 2000, n_best = 10;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "flat key=value config file");
        sub->add_option("-o,--override", overrides, "config override key=value");
    };

    auto* gen = app.add_subcommand("gen-dataset", "generate the offline dataset file");
    add_common(gen);
    gen->add_option("--seed", seed_flag, "dataset seed (defaults to config seed)");
    gen->add_option("--out", out_path, "output path (defaults to config dataset_path)");

    auto* train_off = app.add_subcommand("train-offline", "run the offline phase");
    add_common(train_off);
    train_off->add_option("--run", run_name, "run name")->required();
    train_off->add_option("--seeds", seeds_csv, "comma-separated seeds");
    train_off->add_option("--resume", from, "checkpoint to resume from");

    auto* train_on = app.add_subcommand("train-online", "run the online phase from a checkpoint");
    add_common(train_on);
    train_on->add_option("--run", run_name, "run name")->required();
    train_on->add_option("--seeds", seeds_csv, "comma-separated seeds");
    train_on->add_option("--from", from,
                         "offline checkpoint file, or run name with per-seed checkpoints");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval_cmd->add_option("--episodes", episodes, "evaluation episodes");

    auto* ablate = app.add_subcommand("ablate", "run an ablation preset");
    add_common(ablate);
    ablate->add_option("preset", preset, "one of: n-cand, alpha1, entropy, variants")->required();
    ablate->add_option("--run", run_name, "run-name prefix (defaults to the preset)");
    ablate->add_option("--seeds", seeds_csv, "comma-separated seeds");

    auto* analyze = app.add_subcommand("analyze", "emit bound/bias/KDE reports for a checkpoint");
    analyze->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    analyze->add_option("--out", out_path, "output directory (defaults to <ckpt dir>/analysis)");
    analyze->add_option("--n-mc", n_mc, "Monte-Carlo draws");
    analyze->add_option("--n-best", n_best, "oracle group size");

    auto* report = app.add_subcommand("report", "aggregate metrics across the seeds of a run");
    report->add_option("--run", run_name, "run name")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_name() == "CallForHelp" ? 0 : 2;
    }

    if (gen->parsed()) {
        TrainConfig cfg = effective_config(config_path, overrides);
        if (seed_flag >= 0) cfg.seed = seed_flag;
        const std::string out = out_path.empty() ? cfg.dataset_path : out_path;
        const CrescentWorld world = CrescentWorld::make_default(
            {cfg.reward_moderate, cfg.reward_mid, cfg.reward_max});
        const auto data = generate_dataset(world, cfg.per_crescent, cfg.background,
                                           static_cast<uint64_t>(cfg.seed));
        if (const fs::path parent = fs::path(out).parent_path(); !parent.empty())
            fs::create_directories(parent);
        save_dataset(out, data);
        std::cout << "wrote " << data.size() << " transitions to " << out << "\n";
        return 0;
    }

    if (train_off->parsed()) {
        const TrainConfig base = effective_config(config_path, overrides);
        std::vector<std::function<void()>> cells;
        for (long s : parse_seeds(seeds_csv, base.seed)) {
            TrainConfig cfg = base;
            cfg.seed = s;
            cells.push_back([cfg, s, run_name, from] {
                run_cell(cfg, seed_dir(run_name, s), from, /*offline=*/true, /*online=*/false);
            });
        }
        run_cells_parallel(cells);
        return 0;
    }

    if (train_on->parsed()) {
        const TrainConfig base = effective_config(config_path, overrides);
        std::vector<std::function<void()>> cells;
        for (long s : parse_seeds(seeds_csv, base.seed)) {
            TrainConfig cfg = base;
            cfg.seed = s;
            std::string ckpt = from;
            if (!from.empty() && !fs::exists(from))
                ckpt = (seed_dir(from, s) / "checkpoint.bin").string();
            cells.push_back([cfg, s, run_name, ckpt] {
                run_cell(cfg, seed_dir(run_name, s), ckpt, /*offline=*/false, /*online=*/true);
            });
        }
        run_cells_parallel(cells);
        return 0;
    }

    if (eval_cmd->parsed()) {
        auto trainer = load_checkpoint(checkpoint_path);
        const EvalReport rep = trainer->evaluate(episodes);
        nlohmann::json j;
        j["return_mean"] = rep.return_mean;
        j["return_std"] = rep.return_std;
        j["mode_coverage"] = rep.mode_coverage;
        j["excluded_hits"] = rep.excluded_hits;
        if (rep.q_bias) j["q_bias"] = *rep.q_bias;
        std::cout << j.dump(2) << "\n";
        return 0;
    }

    if (ablate->parsed()) {
        const TrainConfig base = effective_config(config_path, overrides);
        const std::string prefix = run_name.empty() ? preset : run_name;
        const auto seeds = parse_seeds(seeds_csv, base.seed);
        struct Cell {
            std::string name;
            TrainConfig cfg;
            bool online = true;
        };
        std::vector<Cell> matrix;
        if (preset == "n-cand") {
            for (int n : {0, 5, 10, 15}) {
                Cell c{prefix + "-ncand" + std::to_string(n), base};
                c.cfg.n_cand = n;
                matrix.push_back(c);
            }
        } else if (preset == "alpha1") {
            for (double a : {0.0, 1.0, 10.0, 100.0}) {
                Cell c{prefix + "-alpha1_" + std::to_string(static_cast<int>(a)), base, false};
                c.cfg.alpha1_offline = a;
                matrix.push_back(c);
            }
        } else if (preset == "entropy") {
            for (double m : {0.1, 0.5, 0.75}) {
                char tag[32];
                std::snprintf(tag, sizeof(tag), "%s-mult%.2f", prefix.c_str(), m);
                Cell c{tag, base};
                c.cfg.entropy_mult = m;
                matrix.push_back(c);
            }
        } else if (preset == "variants") {
            for (Variant v : {Variant::ours, Variant::ours_wo_ce, Variant::fql, Variant::fql_wo_q,
                              Variant::bc}) {
                Cell c{prefix + "-" + variant_name(v), base};
                c.cfg.variant = v;
                matrix.push_back(c);
            }
        } else {
            throw std::invalid_argument("unknown ablate preset: " + preset);
        }
        std::vector<std::function<void()>> cells;
        for (const auto& cell : matrix) {
            for (long s : seeds) {
                TrainConfig cfg = cell.cfg;
                cfg.seed = s;
                const bool online = cell.online;
                const std::string name = cell.name;
                cells.push_back([cfg, s, name, online] {
                    const fs::path dir = seed_dir(name, s);
                    run_cell(cfg, dir, "", /*offline=*/true, online);
                    if (!online) {  // alpha1 preset: emit the bias report
                        auto trainer = load_checkpoint((dir / "checkpoint.bin").string());
                        RandomStream rng = RandomStream::for_stream(cfg.seed, "analysis");
                        const BiasReport bias = q_bias(
                            trainer->critic, [&] { return trainer->policy_action(rng, false); },
                            trainer->world, 1000);
                        fs::create_directories(dir / "analysis");
                        std::ofstream(dir / "analysis" / "bias.json")
                            << bias_report_json(bias) << "\n";
                    }
                });
            }
        }
        run_cells_parallel(cells);
        return 0;
    }

    if (analyze->parsed()) {
        auto trainer = load_checkpoint(checkpoint_path);
        const fs::path out = out_path.empty()
                                 ? fs::path(checkpoint_path).parent_path() / "analysis"
                                 : fs::path(out_path);
        emit_analysis(*trainer, out, n_mc, n_best);
        std::cout << "analysis written to " << out << "\n";
        return 0;
    }

    if (report->parsed()) {
        const fs::path root = fs::path(runs_root()) / run_name;
        if (!fs::exists(root)) throw std::runtime_error("report: no such run " + run_name);
        nlohmann::json j;
        std::vector<double> finals;
        for (const auto& entry : fs::directory_iterator(root)) {
            if (!entry.is_directory()) continue;
            const fs::path mpath = entry.path() / "metrics.csv";
            if (!fs::exists(mpath)) continue;
            const auto rows = load_metrics(mpath.string());
            for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
                if (it->eval_return_mean) {
                    finals.push_back(*it->eval_return_mean);
                    j["seeds"][entry.path().filename().string()] = *it->eval_return_mean;
                    break;
                }
            }
        }
        if (finals.empty()) throw std::runtime_error("report: no metrics found for " + run_name);
        double mean = 0.0;
        for (double f : finals) mean += f;
        mean /= finals.size();
        double var = 0.0;
        for (double f : finals) var += (f - mean) * (f - mean);
        j["final_return_mean"] = mean;
        j["final_return_std"] = finals.size() > 1 ? std::sqrt(var / (finals.size() - 1)) : 0.0;
        j["n_seeds"] = finals.size();
        std::ofstream(root / "summary.json") << j.dump(2) << "\n";
        std::cout << j.dump(2) << "\n";
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    gsflow::tune_allocator();
    try {
        return do_main(argc, argv);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
