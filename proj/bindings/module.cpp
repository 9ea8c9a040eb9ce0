// Python bindings over the main operations: dataset generation, the
// environment, both training phases, evaluation, and the analysis reports.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <sstream>

#include "gsflow/analysis.hpp"
#include "gsflow/checkpoint.hpp"
#include "gsflow/config.hpp"
#include "gsflow/trainer.hpp"

namespace py = pybind11;
using namespace gsflow;

namespace {

TrainConfig config_from_dict(const py::dict& d) {
    TrainConfig cfg;
    for (auto item : d)
        cfg.set(py::cast<std::string>(item.first), py::cast<std::string>(py::str(item.second)));
    return cfg;
}

py::dict eval_to_dict(const EvalReport& rep) {
    py::dict d;
    d["return_mean"] = rep.return_mean;
    d["return_std"] = rep.return_std;
    d["mode_coverage"] = rep.mode_coverage;
    d["excluded_hits"] = rep.excluded_hits;
    d["crescent_frac"] = rep.crescent_frac;
    if (rep.q_bias) d["q_bias"] = *rep.q_bias;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    tune_allocator();
    m.doc() = "GS-flow Multi-Crescent laboratory core";

    py::class_<CrescentWorld>(m, "World")
        .def_static("make_default",
                    [](double moderate, double mid, double max) {
                        return CrescentWorld::make_default({moderate, mid, max});
                    },
                    py::arg("reward_moderate") = 4.0, py::arg("reward_mid") = 7.0,
                    py::arg("reward_max") = 10.0)
        .def("reward", [](const CrescentWorld& w, double x, double y) {
            return w.reward({x, y});
        })
        .def("crescent_index", [](const CrescentWorld& w, double x, double y) {
            return w.crescent_index({x, y});
        })
        .def("step",
             [](const CrescentWorld& w, double x, double y) {
                 const StepResult r = w.step({x, y});
                 return py::make_tuple(r.reward, r.next_state, r.done);
             })
        .def_property_readonly("excluded_pair", &CrescentWorld::excluded_pair);

    m.def("default_config", [] {
        py::dict d;
        const TrainConfig cfg;
        std::istringstream is(cfg.to_text());
        std::string line;
        while (std::getline(is, line)) {
            const auto eq = line.find('=');
            d[py::str(line.substr(0, eq))] = line.substr(eq + 1);
        }
        return d;
    });

    m.def(
        "generate_dataset",
        [](const std::string& path, int per_crescent, int background, long seed) {
            const CrescentWorld world = CrescentWorld::make_default();
            const auto data =
                generate_dataset(world, per_crescent, background, static_cast<uint64_t>(seed));
            save_dataset(path, data);
            return data.size();
        },
        py::arg("path"), py::arg("per_crescent") = 2500, py::arg("background") = 2000,
        py::arg("seed") = 0);

    m.def(
        "train_offline",
        [](const py::dict& config, const std::string& run_dir) {
            TrainConfig cfg = config_from_dict(config);
            std::filesystem::create_directories(run_dir);
            cfg.save(run_dir + "/config.txt");
            Trainer trainer(cfg);
            trainer.load_offline_dataset_file(cfg.dataset_path);
            MetricsWriter metrics(run_dir + "/metrics.csv");
            trainer.run_offline(&metrics);
            const std::string ckpt = run_dir + "/checkpoint.bin";
            save_checkpoint(ckpt, trainer);
            return ckpt;
        },
        py::arg("config"), py::arg("run_dir"));

    m.def(
        "train_online",
        [](const py::dict& config, const std::string& run_dir, const std::string& from_checkpoint) {
            TrainConfig cfg = config_from_dict(config);
            std::filesystem::create_directories(run_dir);
            cfg.save(run_dir + "/config.txt");
            Trainer trainer(cfg);
            if (!from_checkpoint.empty()) restore_checkpoint_state(from_checkpoint, trainer);
            trainer.load_offline_dataset_file(cfg.dataset_path);
            MetricsWriter metrics(run_dir + "/metrics.csv");
            trainer.run_online(&metrics);
            const std::string ckpt = run_dir + "/checkpoint.bin";
            save_checkpoint(ckpt, trainer);
            return ckpt;
        },
        py::arg("config"), py::arg("run_dir"), py::arg("from_checkpoint") = std::string());

    m.def(
        "evaluate",
        [](const std::string& checkpoint, int episodes) {
            auto trainer = load_checkpoint(checkpoint);
            return eval_to_dict(trainer->evaluate(episodes));
        },
        py::arg("checkpoint"), py::arg("episodes") = 50);

    m.def(
        "estimate_bound",
        [](const std::string& checkpoint, int n_mc, int n_best, long seed) {
            auto trainer = load_checkpoint(checkpoint);
            RandomStream rng = RandomStream::for_stream(seed, "analysis");
            const BoundReport r = estimate_bound(trainer->teacher, trainer->critic, trainer->cvae,
                                                 trainer->world.fixed_state(), n_mc, n_best, rng);
            py::dict d;
            d["j_base"] = r.j_base;
            d["j_oracle"] = r.j_oracle;
            d["delta_select"] = r.delta_select;
            d["eps_vae"] = r.eps_vae;
            d["lipschitz_hat"] = r.lipschitz_hat;
            d["j_amortized"] = r.j_amortized;
            d["slack"] = r.slack;
            d["se_slack"] = r.se_slack;
            return d;
        },
        py::arg("checkpoint"), py::arg("n_mc") = 2000, py::arg("n_best") = 10, py::arg("seed") = 0);

    m.def(
        "q_bias",
        [](const std::string& checkpoint, int n, long seed) {
            auto trainer = load_checkpoint(checkpoint);
            RandomStream rng = RandomStream::for_stream(seed, "analysis");
            const BiasReport r =
                q_bias(trainer->critic, [&] { return trainer->policy_action(rng, false); },
                       trainer->world, n);
            py::dict d;
            d["mean_bias"] = r.mean_bias;
            d["mean_abs_bias"] = r.mean_abs_bias;
            return d;
        },
        py::arg("checkpoint"), py::arg("n") = 1000, py::arg("seed") = 0);

    m.def(
        "best_of_n",
        [](const std::string& checkpoint, int n, int episodes, long seed) {
            auto trainer = load_checkpoint(checkpoint);
            RandomStream rng = RandomStream::for_stream(seed, "analysis");
            const BestOfNResult r =
                best_of_n_eval(trainer->teacher, trainer->critic, trainer->world, n, episodes, rng);
            return py::make_tuple(r.return_mean, r.return_std);
        },
        py::arg("checkpoint"), py::arg("n") = 10, py::arg("episodes") = 50, py::arg("seed") = 0);

    m.def(
        "kde",
        [](const Eigen::MatrixXd& points, int resolution, double bandwidth) {
            if (points.cols() != 2) throw std::invalid_argument("kde: points must be Nx2");
            std::vector<Eigen::Vector2d> pts;
            pts.reserve(points.rows());
            for (int i = 0; i < points.rows(); ++i) pts.emplace_back(points(i, 0), points(i, 1));
            return kde_grid(pts, resolution, bandwidth).density;
        },
        py::arg("points"), py::arg("resolution") = 200, py::arg("bandwidth") = 0.0);

    m.def("load_metrics", [](const std::string& path) {
        py::list rows;
        for (const auto& r : load_metrics(path)) {
            py::dict d;
            d["step"] = r.step;
            d["phase"] = r.phase;
            if (r.eval_return_mean) d["eval_return_mean"] = *r.eval_return_mean;
            if (r.mode_coverage) d["mode_coverage"] = *r.mode_coverage;
            if (r.entropy) d["entropy"] = *r.entropy;
            if (r.alpha2) d["alpha2"] = *r.alpha2;
            if (r.vae_recon) d["vae_recon"] = *r.vae_recon;
            if (r.vae_kl) d["vae_kl"] = *r.vae_kl;
            if (r.q_bias) d["q_bias"] = *r.q_bias;
            rows.append(d);
        }
        return rows;
    });
}
