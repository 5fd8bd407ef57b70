#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "perc/experiments.hpp"
#include "stats.hpp"

using namespace perc;

namespace {

ExperimentConfig small_scaling_config() {
    ExperimentConfig cfg;
    cfg.experiment = "scaling";
    cfg.d = 2;
    cfg.kernel_family = "boolean_power";
    cfg.gamma = 1.0;
    cfg.mark_kind = "dirac";
    cfg.mark_value = 0.5;
    cfg.lambda = 4.0;
    cfg.L_list = {4.0, 6.0};
    cfg.trials = 12;
    cfg.seed = 5;
    return cfg;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("flat text and json configs parse to the same settings") {
    const std::string text =
        "# comment\n"
        "experiment = scaling\n"
        "kernel.family = max\n"
        "mark.kind = uniform\n"
        "mark.lo = 0\n"
        "mark.hi = 1\n"
        "lambda = 3.5\n"
        "L = 4, 8\n"
        "trials = 7\n";
    auto kv = parse_config_text(text);
    ExperimentConfig a = config_from_map(kv);
    CHECK(a.kernel_family == "max");
    CHECK(a.lambda == doctest::Approx(3.5));
    CHECK(a.L_list == std::vector<double>{4.0, 8.0});
    CHECK(a.trials == 7);

    const std::string js = R"({
      "experiment": "scaling",
      "kernel": {"family": "max"},
      "mark": {"kind": "uniform", "lo": 0, "hi": 1},
      "lambda": 3.5,
      "L": [4, 8],
      "trials": 7
    })";
    ExperimentConfig b = config_from_map(parse_config_json(js));
    CHECK(b.kernel_family == a.kernel_family);
    CHECK(b.lambda == a.lambda);
    CHECK(b.L_list == a.L_list);
    CHECK(b.trials == a.trials);

    CHECK_THROWS_AS(config_from_map(parse_config_text("nonsense.key = 1\n")),
                    std::invalid_argument);
    CHECK_THROWS_AS(config_from_map(parse_config_text("L = 8, 4\n")), std::invalid_argument);
    CHECK_THROWS_AS(config_from_map(parse_config_text("experiment = bogus\n")),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("not a pair\n"), std::invalid_argument);
}

TEST_CASE("config content hash tracks every key") {
    auto kv1 = config_to_map(small_scaling_config());
    auto kv2 = kv1;
    kv2["lambda"] = "4.25";
    CHECK(config_content_hash(kv1) != config_content_hash(kv2));
    CHECK(config_content_hash(kv1) == config_content_hash(config_to_map(small_scaling_config())));
}

TEST_CASE("csv schema is stable") {
    std::vector<TrialRecord> recs{{"scaling", 8.0, 4.0, 0.0, 3, 12345, 7, true, 0}};
    const std::string csv = records_to_csv(recs);
    CHECK(csv == "experiment,L,lambda,zeta,trial,seed,count,success,ms\n"
                 "scaling,8,4,0,3,12345,7,1,0\n");
}

TEST_CASE("scaling runs calibrate and fill every cell") {
    ExperimentConfig cfg = small_scaling_config();
    auto res = run_experiment(cfg);
    CHECK(res.records.size() == cfg.L_list.size() * cfg.trials);
    auto summary = nlohmann::json::parse(res.summary_json);
    CHECK(summary["experiment"] == "scaling");
    CHECK(summary["c"].get<double>() > 0.0);
    CHECK(summary["cells"].size() == 2);
    CHECK(summary.contains("config_hash"));
    CHECK(summary["config"]["lambda"] == "4");
    // records arrive in (cell, trial) order
    CHECK(res.records.front().L == doctest::Approx(4.0));
    CHECK(res.records.back().L == doctest::Approx(6.0));
}

TEST_CASE("runs are reproducible and independent of the thread count") {
    ExperimentConfig cfg = small_scaling_config();
    cfg.threads = 1;
    auto res1 = run_experiment(cfg);
    cfg.threads = 4;
    auto res2 = run_experiment(cfg);
    CHECK(records_to_csv(res1.records) == records_to_csv(res2.records));

    cfg.seed = 6;
    auto res3 = run_experiment(cfg);
    CHECK(records_to_csv(res1.records) != records_to_csv(res3.records));
}

TEST_CASE("threshold sweep reports a monotone curve and a fitted midpoint") {
    ExperimentConfig cfg;
    cfg.experiment = "threshold";
    cfg.kernel_family = "boolean_power";
    cfg.mark_kind = "dirac";
    cfg.mark_value = 0.5;
    cfg.sweep_param = "lambda";
    cfg.sweep_from = 0.5;
    cfg.sweep_to = 6.5;
    cfg.sweep_steps = 4;
    cfg.trials = 30;
    cfg.window_side = 14.0;
    cfg.seed = 9;
    cfg.threads = 2;
    auto res = run_experiment(cfg);
    CHECK(res.records.size() == static_cast<std::size_t>(cfg.sweep_steps * cfg.trials));
    auto summary = nlohmann::json::parse(res.summary_json);
    CHECK(summary["fit"].contains("p50"));
    const auto cells = summary["cells"];
    CHECK(cells.front()["spanning_frequency"].get<double>() <=
          cells.back()["spanning_frequency"].get<double>());
}

TEST_CASE("zeta sweeps drive the resistor-network kernel") {
    ExperimentConfig cfg;
    cfg.experiment = "threshold";
    cfg.kernel_family = "miller_abrahams";
    cfg.zeta = 2.0;
    cfg.mark_kind = "uniform";
    cfg.mark_lo = 0.0;
    cfg.mark_hi = 0.4;
    cfg.sweep_param = "zeta";
    cfg.sweep_from = 1.0;
    cfg.sweep_to = 5.0;
    cfg.sweep_steps = 3;
    cfg.trials = 12;
    cfg.window_side = 10.0;
    cfg.lambda = 3.0;
    cfg.seed = 10;
    auto res = run_experiment(cfg);
    CHECK(res.records.size() == 36);
    // the zeta column carries the sweep value
    CHECK(res.records.front().zeta == doctest::Approx(1.0));
    CHECK(res.records.back().zeta == doctest::Approx(5.0));
}

TEST_CASE("coupling experiment holds on every instance") {
    ExperimentConfig cfg;
    cfg.experiment = "coupling";
    cfg.kernel_family = "boolean_power";
    cfg.mark_kind = "dirac";
    cfg.mark_value = 0.5;
    cfg.lambda = 4.0;
    cfg.lambda_star = 2.0;
    cfg.ell_star = 0.2;
    cfg.K = 4;
    cfg.L_list = {3.0};
    cfg.trials = 6;
    cfg.seed = 11;
    auto res = run_experiment(cfg);
    CHECK(res.ok);
    auto summary = nlohmann::json::parse(res.summary_json);
    CHECK(summary["all_hold"].get<bool>());
}

TEST_CASE("slice scaling coincides with the lattice statistic in the plane") {
    ExperimentConfig cfg;
    cfg.experiment = "slice_scaling";
    cfg.kernel_family = "boolean_power";
    cfg.mark_kind = "dirac";
    cfg.mark_value = 0.5;
    cfg.lambda = 4.0;
    cfg.lambda_star = 2.0;
    cfg.ell_star = 0.2;
    cfg.K = 4;
    cfg.L_list = {3.0, 4.0};
    cfg.trials = 5;
    cfg.slice_k = 2.0; // irrelevant in d = 2: no transverse coordinates
    cfg.seed = 12;
    auto res = run_experiment(cfg);
    CHECK(res.records.size() == 10);

    // d = 3 smoke run completes and writes records
    ExperimentConfig c3 = cfg;
    c3.d = 3;
    c3.L_list = {2.0};
    c3.trials = 2;
    c3.lambda = 2.0;
    c3.lambda_star = 1.0;
    c3.slice_k = 1.0;
    auto res3 = run_experiment(c3);
    CHECK(res3.records.size() == 2);
}

TEST_CASE("renorm demo reports the block search and chain flags") {
    ExperimentConfig cfg;
    cfg.experiment = "renorm_demo";
    cfg.kernel_family = "boolean_power";
    cfg.mark_kind = "dirac";
    cfg.mark_value = 0.5;
    cfg.lambda = 20.0;
    cfg.lambda_star = 16.0;
    cfg.demo_alpha = 0.05;
    cfg.demo_kappa = 2;
    cfg.K = 4;
    cfg.trials = 3;
    cfg.eps_prime = 1.0 / 24.0;
    cfg.seed = 13;
    auto res = run_experiment(cfg);
    auto summary = nlohmann::json::parse(res.summary_json);
    CHECK(summary.contains("mn_search"));
    CHECK(summary["occupation_given_seed"]["trials"] == 3);
    CHECK(summary["chains"].size() == 3);
}

TEST_CASE("tanemura demo agrees with the recount on every trial") {
    ExperimentConfig cfg;
    cfg.experiment = "tanemura_demo";
    cfg.M = 6;
    cfg.p_occ = 0.7;
    cfg.trials = 10;
    cfg.seed = 14;
    auto res = run_experiment(cfg);
    CHECK(res.ok);
    for (const auto& r : res.records) CHECK(r.success);
}

TEST_CASE("cli: dry runs, outputs, and thread-count independence") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "perc_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg_path = dir / "run.cfg";
    {
        std::ofstream out(cfg_path);
        out << "experiment = scaling\nkernel.family = boolean_power\nmark.kind = dirac\n"
               "mark.value = 0.5\nlambda = 4\nL = 4, 6\ntrials = 8\nseed = 21\n";
    }

    const std::string cfg_arg = "--config=" + cfg_path.string();
    {
        const char* argv[] = {"perc", cfg_arg.c_str(), "--dry-run"};
        CHECK(cli_main(3, argv) == 0);
    }
    {
        const char* argv[] = {"perc"};
        CHECK(cli_main(1, argv) == 2);
    }
    {
        const char* argv[] = {"perc", "--config=/nonexistent/path.cfg"};
        CHECK(cli_main(2, argv) == 2);
    }
    {
        const char* argv[] = {"perc", cfg_arg.c_str(), "--set", "trials=oops"};
        CHECK(cli_main(4, argv) == 2);
    }

    const fs::path out1 = dir / "run1", out2 = dir / "run2";
    const std::string o1 = "--out=" + out1.string(), o2 = "--out=" + out2.string();
    {
        const char* argv[] = {"perc", cfg_arg.c_str(), o1.c_str(), "--threads=1"};
        CHECK(cli_main(4, argv) == 0);
    }
    {
        const char* argv[] = {"perc", cfg_arg.c_str(), o2.c_str(), "--threads=4"};
        CHECK(cli_main(4, argv) == 0);
    }
    const std::string csv1 = slurp(out1 / "records.csv");
    CHECK(csv1 == slurp(out2 / "records.csv"));
    CHECK(csv1.rfind("experiment,L,lambda,zeta,trial,seed,count,success,ms\n", 0) == 0);
    CHECK(nlohmann::json::parse(slurp(out1 / "summary.json")).contains("config_hash"));

    // overrides reach the run
    const fs::path out3 = dir / "run3";
    const std::string o3 = "--out=" + out3.string();
    {
        const char* argv[] = {"perc", cfg_arg.c_str(), o3.c_str(), "--set", "trials=3"};
        CHECK(cli_main(5, argv) == 0);
    }
    std::istringstream csv(slurp(out3 / "records.csv"));
    std::string line;
    int rows = -1;
    while (std::getline(csv, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 6); // 2 cells x 3 trials

    fs::remove_all(dir);
}

TEST_CASE("witness export is flag-controlled") {
    ExperimentConfig cfg = small_scaling_config();
    cfg.trials = 4;
    auto plain = nlohmann::json::parse(run_experiment(cfg).summary_json);
    CHECK_FALSE(plain.contains("witnesses"));
    cfg.witnesses = true;
    auto with = nlohmann::json::parse(run_experiment(cfg).summary_json);
    REQUIRE(with.contains("witnesses"));
    CHECK(with["witnesses"].size() == 8); // 2 cells x 4 trials
    bool some_path = false;
    for (const auto& w : with["witnesses"])
        if (!w["paths"].empty() && !w["paths"][0].empty()) some_path = true;
    CHECK(some_path);
}

TEST_CASE("interrupted runs flush only completed trials") {
    ExperimentConfig cfg = small_scaling_config();
    cfg.trials = 50;
    request_interrupt(); // nothing scheduled: completed set stays empty
    auto res = run_experiment(cfg);
    clear_interrupt();
    CHECK(res.records.empty());
    CHECK(nlohmann::json::parse(res.summary_json)["interrupted"].get<bool>());

    auto full = run_experiment(cfg);
    CHECK(full.records.size() == 100);
    CHECK_FALSE(nlohmann::json::parse(full.summary_json).contains("interrupted"));
}

TEST_CASE("subcritical configurations are flagged") {
    ExperimentConfig cfg = small_scaling_config();
    cfg.lambda = 0.3; // far below the percolation threshold
    cfg.c = 0.5;      // any positive target fails everywhere
    cfg.trials = 10;
    auto res = run_experiment(cfg);
    CHECK_FALSE(res.ok);
    auto summary = nlohmann::json::parse(res.summary_json);
    CHECK(summary.contains("flag"));
}

TEST_CASE("a single-L run skips the fit and reports frequencies only") {
    ExperimentConfig cfg = small_scaling_config();
    cfg.L_list = {4.0};
    cfg.trials = 8;
    auto summary = nlohmann::json::parse(run_experiment(cfg).summary_json);
    CHECK(summary["cells"].size() == 1);
    CHECK(summary["fit"].contains("skipped"));
}

TEST_CASE("zero intensity never spans") {
    ExperimentConfig cfg;
    cfg.experiment = "threshold";
    cfg.kernel_family = "boolean_power";
    cfg.mark_kind = "dirac";
    cfg.mark_value = 0.5;
    cfg.sweep_param = "lambda";
    cfg.sweep_from = 0.0;
    cfg.sweep_to = 0.4;
    cfg.sweep_steps = 2;
    cfg.trials = 10;
    cfg.window_side = 10.0;
    cfg.seed = 33;
    auto summary = nlohmann::json::parse(run_experiment(cfg).summary_json);
    CHECK(summary["cells"][0]["spanning_frequency"].get<double>() == 0.0);
}

TEST_CASE("threshold estimates agree across master seeds within their intervals") {
    auto sweep = [](std::uint64_t seed) {
        ExperimentConfig cfg;
        cfg.experiment = "threshold";
        cfg.kernel_family = "boolean_power";
        cfg.mark_kind = "dirac";
        cfg.mark_value = 0.5;
        cfg.sweep_param = "lambda";
        cfg.sweep_from = 0.5;
        cfg.sweep_to = 4.0;
        cfg.sweep_steps = 6;
        cfg.trials = 80;
        cfg.window_side = 14.0;
        cfg.seed = seed;
        return nlohmann::json::parse(run_experiment(cfg).summary_json)["fit"];
    };
    const bool ok = teststats::with_rerun_policy(
        [&](std::uint64_t base) {
            auto f1 = sweep(base), f2 = sweep(base + 1);
            if (!f1.contains("p50_ci_lo") || !f2.contains("p50_ci_lo")) return false;
            const double p1 = f1["p50"].get<double>(), p2 = f2["p50"].get<double>();
            return p1 >= f2["p50_ci_lo"].get<double>() && p1 <= f2["p50_ci_hi"].get<double>() &&
                   p2 >= f1["p50_ci_lo"].get<double>() && p2 <= f1["p50_ci_hi"].get<double>();
        },
        700, 800);
    CHECK(ok);
}

TEST_CASE("slice failure frequency does not grow with L in a supercritical run") {
    ExperimentConfig cfg;
    cfg.experiment = "slice_scaling";
    cfg.kernel_family = "boolean_power";
    cfg.mark_kind = "dirac";
    cfg.mark_value = 0.5;
    cfg.lambda = 4.0;
    cfg.lambda_star = 2.0;
    cfg.ell_star = 0.2;
    cfg.K = 4;
    cfg.L_list = {12.0, 24.0};
    cfg.trials = 30;
    cfg.seed = 34;
    auto summary = nlohmann::json::parse(run_experiment(cfg).summary_json);
    const double f12 = summary["cells"][0]["failure_frequency"].get<double>();
    const double f24 = summary["cells"][1]["failure_frequency"].get<double>();
    CHECK(f24 <= f12);
}
