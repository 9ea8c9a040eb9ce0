#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gsflow/config.hpp"
#include "gsflow/metrics.hpp"

using namespace gsflow;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("cli");

namespace {

const fs::path kWork = fs::temp_directory_path() / "gsflow_cli_tests";

int run_cli(const std::string& args) {
    const std::string cmd = "cd " + kWork.string() + " && GSFLOW_RUNS_DIR=" +
                            (kWork / "runs").string() + " " + GSFLOW_CLI_PATH + " " + args +
                            " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_tiny_config(const fs::path& path) {
    TrainConfig cfg;
    cfg.hidden_dim = 16;
    cfg.batch_size = 16;
    cfg.n_cand = 3;
    cfg.euler_steps = 5;
    cfg.offline_steps = 20;
    cfg.online_steps = 20;
    cfg.eval_interval = 10;
    cfg.eval_episodes = 5;
    cfg.per_crescent = 30;
    cfg.background = 20;
    cfg.online_buffer_capacity = 256;
    cfg.dataset_path = (kWork / "dataset.txt").string();
    cfg.save(path.string());
}

struct CliFixture {
    CliFixture() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
        write_tiny_config(kWork / "tiny.txt");
    }
};

}  // namespace

TEST_CASE("cli: end-to-end verbs, exit codes, and determinism") {
    CliFixture fix;

    SUBCASE("gen-dataset is byte-identical under the same seed") {
        REQUIRE(run_cli("gen-dataset --config tiny.txt --seed 0 --out ds_a.txt") == 0);
        REQUIRE(run_cli("gen-dataset --config tiny.txt --seed 0 --out ds_b.txt") == 0);
        CHECK(slurp(kWork / "ds_a.txt") == slurp(kWork / "ds_b.txt"));
        REQUIRE(run_cli("gen-dataset --config tiny.txt --seed 1 --out ds_c.txt") == 0);
        CHECK(slurp(kWork / "ds_a.txt") != slurp(kWork / "ds_c.txt"));
    }

    SUBCASE("unknown override keys are rejected with exit 2") {
        CHECK(run_cli("train-offline --config tiny.txt --run x --override not_a_key=3") == 2);
        CHECK(run_cli("definitely-not-a-verb") == 2);
        CHECK(run_cli("train-offline") == 2);  // missing required --run
    }

    SUBCASE("missing dataset file is a runtime error with exit 1") {
        CHECK(run_cli("train-offline --config tiny.txt --run x "
                      "--override dataset_path=nope.txt") == 1);
    }

    SUBCASE("offline_steps=0 writes an immediate checkpoint with exit 0") {
        REQUIRE(run_cli("gen-dataset --config tiny.txt") == 0);
        CHECK(run_cli("train-offline --config tiny.txt --run zero "
                      "--override offline_steps=0") == 0);
        CHECK(fs::exists(kWork / "runs" / "zero" / "seed0" / "checkpoint.bin"));
        CHECK(fs::exists(kWork / "runs" / "zero" / "seed0" / "config.txt"));
    }

    SUBCASE("offline -> online -> eval -> analyze -> report pipeline") {
        REQUIRE(run_cli("gen-dataset --config tiny.txt") == 0);
        REQUIRE(run_cli("train-offline --config tiny.txt --run off --seeds 0,1") == 0);
        const fs::path off0 = kWork / "runs" / "off" / "seed0";
        CHECK(fs::exists(off0 / "metrics.csv"));
        // effective config round-trips: re-feeding it reproduces the run
        const TrainConfig again = TrainConfig::load((off0 / "config.txt").string());
        CHECK(again.offline_steps == 20);

        REQUIRE(run_cli("train-online --config tiny.txt --run on --seeds 0 --from off") == 0);
        const fs::path on0 = kWork / "runs" / "on" / "seed0";
        CHECK(fs::exists(on0 / "checkpoint.bin"));
        const auto rows = load_metrics((on0 / "metrics.csv").string());
        REQUIRE(!rows.empty());
        CHECK(rows.back().phase == "online");

        CHECK(run_cli("eval --checkpoint " + (on0 / "checkpoint.bin").string() +
                      " --episodes 5") == 0);
        CHECK(run_cli("analyze --checkpoint " + (on0 / "checkpoint.bin").string() +
                      " --n-mc 100 --n-best 5") == 0);
        CHECK(fs::exists(on0 / "analysis" / "bound.json"));
        CHECK(fs::exists(on0 / "analysis" / "bias.json"));
        CHECK(fs::exists(on0 / "analysis" / "kde.csv"));
        CHECK(fs::exists(on0 / "analysis" / "adv_pairs.csv"));

        CHECK(run_cli("report --run on") == 0);
        CHECK(fs::exists(kWork / "runs" / "on" / "summary.json"));
    }

    SUBCASE("ablate entropy emits the three mult run directories") {
        REQUIRE(run_cli("gen-dataset --config tiny.txt") == 0);
        REQUIRE(run_cli("ablate entropy --config tiny.txt --override offline_steps=5 "
                        "--override online_steps=5 --override eval_interval=5") == 0);
        CHECK(fs::exists(kWork / "runs" / "entropy-mult0.10" / "seed0" / "metrics.csv"));
        CHECK(fs::exists(kWork / "runs" / "entropy-mult0.50" / "seed0" / "metrics.csv"));
        CHECK(fs::exists(kWork / "runs" / "entropy-mult0.75" / "seed0" / "metrics.csv"));
    }

    SUBCASE("identical seeded runs produce identical metrics files") {
        REQUIRE(run_cli("gen-dataset --config tiny.txt") == 0);
        REQUIRE(run_cli("train-offline --config tiny.txt --run da") == 0);
        REQUIRE(run_cli("train-offline --config tiny.txt --run db") == 0);
        CHECK(slurp(kWork / "runs" / "da" / "seed0" / "metrics.csv") ==
              slurp(kWork / "runs" / "db" / "seed0" / "metrics.csv"));
        CHECK(slurp(kWork / "runs" / "da" / "seed0" / "checkpoint.bin") ==
              slurp(kWork / "runs" / "db" / "seed0" / "checkpoint.bin"));
    }
}

TEST_SUITE_END();
