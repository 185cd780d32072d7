#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "fedclip/config.hpp"
#include "fedclip/csv.hpp"
#include "fedclip/runner.hpp"
#include "fedclip/svg.hpp"

using namespace fedclip;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("fedclip_test_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

json counterexample_config(const std::string& algorithm) {
    json j;
    j["algorithm"] = algorithm;
    j["objective"] = {{"family", "quadratic_counterexample"}, {"gamma", 2.0}};
    j["clients"] = 2;
    j["interval"] = 1;
    j["rounds"] = 10;
    j["eta"] = 1.0;
    j["gamma"] = 2.0;
    j["noise"] = {{"sigma", 0.0}, {"kind", "none"}};
    j["seed"] = 0;
    return j;
}

fs::path write_json(const fs::path& dir, const std::string& name, const json& j) {
    const fs::path p = dir / name;
    std::ofstream out(p);
    out << j.dump(2);
    return p;
}

} // namespace

TEST_CASE("config: valid config parses and resolves") {
    const ExperimentConfig c = ExperimentConfig::from_json(counterexample_config("celgc"));
    CHECK(c.algorithm == Algorithm::kCelgc);
    CHECK(c.clients == 2);
    const ResolvedExperiment r = resolve_experiment(c);
    CHECK(r.hp.eta == 1.0);
    CHECK(r.objectives.size() == 2);
    CHECK(r.x0.dim() == 1);
}

TEST_CASE("config: unknown keys are rejected") {
    json j = counterexample_config("celgc");
    j["etaa"] = 0.5;
    CHECK_THROWS_WITH(ExperimentConfig::from_json(j),
                      Catch::Matchers::ContainsSubstring("unknown key 'etaa'"));
    json obj = j["objective"];
    j.erase("etaa");
    j["objective"]["shape"] = 2;
    CHECK_THROWS_WITH(ExperimentConfig::from_json(j),
                      Catch::Matchers::ContainsSubstring("unknown key 'shape'"));
}

TEST_CASE("config: missing algorithm and hyperparameter exclusivity") {
    json j = counterexample_config("episode");
    j.erase("algorithm");
    CHECK_THROWS_WITH(ExperimentConfig::from_json(j),
                      Catch::Matchers::ContainsSubstring("missing required key 'algorithm'"));

    j = counterexample_config("episode");
    j.erase("eta");
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError); // gamma without eta

    j = counterexample_config("episode");
    j.erase("eta");
    j.erase("gamma");
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError); // neither

    j["theorem"] = {{"L0", 1.0}, {"L1", 1.0}, {"kappa", 1.0}, {"rho", 2.0},
                    {"Delta", 1.0}, {"epsilon", 0.1}};
    CHECK_NOTHROW(ExperimentConfig::from_json(j)); // theorem alone is fine

    j["eta"] = 1.0;
    j["gamma"] = 2.0;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError); // both modes
}

TEST_CASE("config: theorem mode resolves eta and gamma") {
    json j = counterexample_config("episode");
    j.erase("eta");
    j.erase("gamma");
    j["objective"] = {{"family", "quartic"}, {"H", 1.0}};
    j["noise"] = {{"sigma", 0.5}, {"kind", "uniform_ball"}};
    j["theorem"] = {{"L0", 30.0}, {"L1", 1.0}, {"kappa", "auto"}, {"rho", 2.0},
                    {"Delta", 8.0}, {"epsilon", 0.2}, {"constants", "appendix"}};
    const ExperimentConfig c = ExperimentConfig::from_json(j);
    REQUIRE(c.theorem_mode);
    CHECK(c.constants->kappa == Catch::Approx(kappa_H(1.0)));
    CHECK(c.constants->sigma == 0.5); // taken from the noise block
    const ResolvedExperiment r = resolve_experiment(c);
    REQUIRE(r.theorem.has_value());
    CHECK(r.hp.eta == r.theorem->eta);
    CHECK(r.hp.gamma == r.theorem->gamma);
    CHECK(r.config.eta.has_value()); // resolved form is explicit
}

TEST_CASE("run_experiment: CELGC counterexample trajectory file is exact") {
    TempDir tmp;
    ExperimentConfig c = ExperimentConfig::from_json(counterexample_config("celgc"));
    const auto out = run_experiment(c, tmp.path / "celgc");
    REQUIRE(fs::exists(out.trajectory_csv));
    REQUIRE(fs::exists(out.summary_json));

    const PlotData data = parse_plot_csv(read_text_file(out.trajectory_csv.string()),
                                         out.trajectory_csv.string());
    const SeriesData& series = data.at("trajectory");
    REQUIRE(series.rounds.size() == 11);
    for (std::size_t i = 0; i < series.rounds.size(); ++i) {
        CHECK(series.loss[i] == 0.0);
        CHECK(series.grad_norm[i] == 0.5);
    }
    CHECK(out.summary["status"] == "completed");
    CHECK(out.summary["final_grad_norm"] == 0.5);
}

TEST_CASE("run_experiment: EPISODE counterexample grad_norm column is [0.5, 0, 0, ...]") {
    TempDir tmp;
    ExperimentConfig c = ExperimentConfig::from_json(counterexample_config("episode"));
    const auto out = run_experiment(c, tmp.path / "episode");
    const PlotData data = parse_plot_csv(read_text_file(out.trajectory_csv.string()),
                                         out.trajectory_csv.string());
    const SeriesData& series = data.at("trajectory");
    REQUIRE(series.rounds.size() == 11);
    CHECK(series.grad_norm[0] == 0.5);
    for (std::size_t i = 1; i < series.rounds.size(); ++i) CHECK(series.grad_norm[i] == 0.0);
}

TEST_CASE("run_experiment: malformed config leaves no output files") {
    TempDir tmp;
    json j = counterexample_config("celgc");
    j.erase("algorithm");
    const fs::path cfg = write_json(tmp.path, "bad.json", j);
    const fs::path outdir = tmp.path / "out";
    CHECK_THROWS_AS(run_experiment(cfg, 1), ConfigError);
    CHECK_FALSE(fs::exists(outdir));
}

TEST_CASE("run_experiment: summary round-trips to the identical trajectory hash") {
    TempDir tmp;
    json j = counterexample_config("episode");
    j["objective"] = {{"family", "quartic"}, {"H", 4.0}};
    j["interval"] = 8;
    j["rounds"] = 30;
    j["eta"] = 0.01;
    j["gamma"] = 0.1;
    j["noise"] = {{"sigma", 1.0}, {"kind", "uniform_per_coordinate"}};
    j["seed"] = 21;
    j["init"] = {1.0};
    const auto first = run_experiment(ExperimentConfig::from_json(j), tmp.path / "a");
    const ExperimentConfig repro = ExperimentConfig::from_json(first.summary["resolved_config"]);
    const auto second = run_experiment(repro, tmp.path / "b");
    CHECK(first.summary["trajectory_fnv64"] == second.summary["trajectory_fnv64"]);
    CHECK(read_text_file(first.trajectory_csv.string()) ==
          read_text_file(second.trajectory_csv.string()));
}

TEST_CASE("run_experiment: monitoring writes per-round trace dumps") {
    TempDir tmp;
    json j = counterexample_config("episode");
    j["rounds"] = 3;
    j["monitor"] = true;
    const auto out = run_experiment(ExperimentConfig::from_json(j), tmp.path / "mon");
    CHECK(fs::exists(tmp.path / "mon" / "trace" / "round_000000.csv"));
    CHECK(fs::exists(tmp.path / "mon" / "trace" / "round_000002.csv"));
    CHECK(out.summary["violations"] == 0);
}

TEST_CASE("trajectory csv: stable header and 17-digit round trip") {
    Trajectory traj;
    TrajectoryRow row;
    row.round = 0;
    row.loss = 1.0 / 3.0;
    row.grad_norm = 0.1 + 0.2;
    row.max_discrepancy = 1e-17;
    traj.rows.push_back(row);
    const std::string csv = trajectory_to_csv(traj);
    CHECK(csv.rfind("round,loss,grad_norm,clipped,max_discrepancy,elapsed_ms\n", 0) == 0);
    const PlotData data = parse_plot_csv(csv, "mem");
    CHECK(data.at("trajectory").loss[0] == 1.0 / 3.0); // exact after parse
    CHECK(data.at("trajectory").grad_norm[0] == 0.1 + 0.2);
}

TEST_CASE("emit_plots: deterministic bytes, two points for a 1-round trajectory") {
    TempDir tmp;
    Trajectory traj;
    for (int r = 0; r <= 1; ++r) {
        TrajectoryRow row;
        row.round = r;
        row.loss = 1.0 - 0.25 * r;
        row.grad_norm = 0.5 - 0.1 * r;
        traj.rows.push_back(row);
    }
    const fs::path csv = tmp.path / "traj.csv";
    write_text_file(csv.string(), trajectory_to_csv(traj));
    const auto first = emit_plots(csv, tmp.path);
    const std::string svg1 = read_text_file(first.loss_svg.string());
    const auto second = emit_plots(csv, tmp.path);
    CHECK(svg1 == read_text_file(second.loss_svg.string())); // byte-identical regeneration
    CHECK(svg1.find("<svg") != std::string::npos);
    CHECK(std::count(svg1.begin(), svg1.end(), 'c') >= 2); // two circle markers present
    std::size_t circles = 0, pos = 0;
    while ((pos = svg1.find("<circle", pos)) != std::string::npos) {
        ++circles;
        pos += 7;
    }
    CHECK(circles == 2);
}

TEST_CASE("emit_plots: a zero-round trajectory (single row) still renders") {
    TempDir tmp;
    Trajectory traj;
    TrajectoryRow row;
    row.round = 0;
    row.loss = 2.5;
    row.grad_norm = 1.0;
    traj.rows.push_back(row);
    const fs::path csv = tmp.path / "single.csv";
    write_text_file(csv.string(), trajectory_to_csv(traj));
    const auto paths = emit_plots(csv, tmp.path);
    const std::string svg = read_text_file(paths.loss_svg.string());
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("<circle") != std::string::npos);
}

TEST_CASE("emit_plots: empty body and unknown columns are errors, nothing written") {
    TempDir tmp;
    const fs::path empty_csv = tmp.path / "empty.csv";
    write_text_file(empty_csv.string(), std::string(kTrajectoryHeader) + "\n");
    CHECK_THROWS_AS(emit_plots(empty_csv, tmp.path / "plots"), IoError);
    CHECK_FALSE(fs::exists(tmp.path / "plots" / "empty_loss.svg"));

    const fs::path odd_csv = tmp.path / "odd.csv";
    write_text_file(odd_csv.string(), "round,objective\n0,1\n");
    CHECK_THROWS_WITH(emit_plots(odd_csv, tmp.path / "plots"),
                      Catch::Matchers::ContainsSubstring("unknown columns"));
}

TEST_CASE("compare: merged CSV and charts for two algorithms, one family") {
    TempDir tmp;
    json e = counterexample_config("episode");
    json c = counterexample_config("celgc");
    const fs::path pe = write_json(tmp.path, "episode.json", e);
    const fs::path pc = write_json(tmp.path, "celgc.json", c);
    const auto out = compare_experiments({pe, pc}, tmp.path / "cmp", 2);
    REQUIRE(fs::exists(out.combined_csv));
    REQUIRE(fs::exists(out.loss_svg));
    REQUIRE(fs::exists(out.grad_norm_svg));
    const PlotData data = parse_plot_csv(read_text_file(out.combined_csv.string()),
                                         out.combined_csv.string());
    REQUIRE(data.size() == 2);
    CHECK(data.count("episode") == 1);
    CHECK(data.count("celgc") == 1);
    CHECK(data.at("episode").grad_norm.back() == 0.0);
    CHECK(data.at("celgc").grad_norm.back() == 0.5);
}

TEST_CASE("compare: EPISODE ends strictly lower than CELGC on the quartic, H=4") {
    TempDir tmp;
    json base;
    base["objective"] = {{"family", "quartic"}, {"H", 4.0}};
    base["clients"] = 2;
    base["interval"] = 8;
    base["rounds"] = 500;
    base["eta"] = 0.01;
    base["gamma"] = 0.1;
    base["noise"] = {{"sigma", 1.0}, {"kind", "uniform_per_coordinate"}};
    base["seed"] = 1;
    base["init"] = {1.0};
    json e = base;
    e["algorithm"] = "episode";
    json c = base;
    c["algorithm"] = "celgc";
    const auto out = compare_experiments(
        {write_json(tmp.path, "ep.json", e), write_json(tmp.path, "ce.json", c)},
        tmp.path / "cmp", 2);
    const PlotData data = parse_plot_csv(read_text_file(out.combined_csv.string()),
                                         out.combined_csv.string());
    CHECK(data.at("ep").loss.back() < data.at("ce").loss.back());
}

TEST_CASE("FEDCLIP_THREADS caps the default worker count") {
    const int hw = resolve_threads(0); // current default
    setenv("FEDCLIP_THREADS", "1", 1);
    CHECK(resolve_threads(0) == 1);
    CHECK(resolve_threads(3) == 3); // explicit request wins
    unsetenv("FEDCLIP_THREADS");
    CHECK(resolve_threads(0) == hw);
}

TEST_CASE("compare: mismatched objective families are a structured error") {
    TempDir tmp;
    json a = counterexample_config("episode");
    json b = counterexample_config("episode");
    b["objective"] = {{"family", "quartic"}, {"H", 1.0}};
    const fs::path pa = write_json(tmp.path, "a.json", a);
    const fs::path pb = write_json(tmp.path, "b.json", b);
    CHECK_THROWS_WITH(compare_experiments({pa, pb}, tmp.path / "cmp"),
                      Catch::Matchers::ContainsSubstring("different objective families"));
}

TEST_CASE("compare: identical configs get distinct labels") {
    TempDir tmp;
    const json j = counterexample_config("episode");
    const fs::path p1 = write_json(tmp.path / "one", "same.json", [&] {
        fs::create_directories(tmp.path / "one");
        return j;
    }());
    const fs::path p2 = write_json(tmp.path / "two", "same.json", [&] {
        fs::create_directories(tmp.path / "two");
        return j;
    }());
    const auto out = compare_experiments({p1, p2}, tmp.path / "cmp");
    REQUIRE(out.labels.size() == 2);
    CHECK(out.labels[0] != out.labels[1]);
}

TEST_CASE("timing flag: elapsed_ms column is zero by default, measured when on") {
    TempDir tmp;
    json j = counterexample_config("episode");
    j["rounds"] = 2;
    const auto off = run_experiment(ExperimentConfig::from_json(j), tmp.path / "off");
    const std::string csv_off = read_text_file(off.trajectory_csv.string());
    for (const char* line_end : {",0.000\n"})
        CHECK(csv_off.find(line_end) != std::string::npos);

    j["timing"] = true;
    const auto on = run_experiment(ExperimentConfig::from_json(j), tmp.path / "on");
    CHECK(on.summary["resolved_config"]["timing"] == true);
}
