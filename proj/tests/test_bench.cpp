// Metrics, config parsing, SVG rendering, benchmark bookkeeping, and replay.

#include <sys/wait.h>

#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nbv/bench.hpp"

using namespace nbv;
using Catch::Approx;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

OrientedPointCloud cloud_of(const std::vector<Vec3>& pts) {
    OrientedPointCloud c;
    for (const Vec3& p : pts) c.add(p, Vec3(0, 0, 1));
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::stringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

// Small but real benchmark: classification over two pyramid scenes with the
// two cheap baselines, three views each.
json tiny_bench_config() {
    return resolve_config(json{
        {"task", "classification"},
        {"acquisition", "cross_entropy"},
        {"strategies", {"fps", "random"}},
        {"scenes", {"pyramid:cross", "pyramid:ring"}},
        {"seeds", {5}},
        {"n_views", 3},
        {"scanner", {{"res_w", 24}, {"res_h", 24}, {"n_candidates", 24}}},
        {"spsr", {{"k_max", 2}, {"grid_n", 32}, {"n_mc_samples", 2}}},
        {"classifier",
         {{"epochs", 200}, {"train_seeds_per_class", 5}, {"train_views", 2}}},
    });
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("nbv_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(NBV_CLI_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

}  // namespace

TEST_CASE("first and stable hit times", "[metrics]") {
    // wrong, right, wrong, right, right
    const HitTimes t = first_and_stable_hit({1, 7, 3, 7, 7}, 7);
    REQUIRE(t.first);
    REQUIRE(*t.first == 2);
    REQUIRE(t.stable);
    REQUIRE(*t.stable == 4);

    const HitTimes wrong = first_and_stable_hit({1, 2, 3}, 7);
    REQUIRE_FALSE(wrong.first);
    REQUIRE_FALSE(wrong.stable);

    const HitTimes right = first_and_stable_hit({7, 7, 7}, 7);
    REQUIRE(*right.first == 1);
    REQUIRE(*right.stable == 1);

    // A late wobble voids stability but not the first hit.
    const HitTimes wobble = first_and_stable_hit({7, 0}, 7);
    REQUIRE(*wobble.first == 1);
    REQUIRE_FALSE(wobble.stable);

    REQUIRE_THROWS_AS(first_and_stable_hit({}, 0), ConfigError);
}

TEST_CASE("discovery time", "[metrics]") {
    const std::vector<std::vector<double>> counts = {{5, 30}, {25, 40}};
    REQUIRE(discovery_time(counts, 20, 2) == 2);
    REQUIRE_FALSE(discovery_time(counts, 50, 2));
    REQUIRE(discovery_time(counts, 5, 2) == 1);
    REQUIRE_THROWS_AS(discovery_time({{1, 2, 3}}, 1, 2), ConfigError);
    REQUIRE_THROWS_AS(discovery_time({}, 1, 2), ConfigError);
}

TEST_CASE("chamfer and hausdorff on known clouds", "[metrics]") {
    std::vector<Vec3> grid;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) grid.emplace_back(0.5 * i, 0.5 * j, 0.0);
    const OrientedPointCloud a = cloud_of(grid);

    SECTION("identical clouds") {
        const CloudDistance d = chamfer_and_hausdorff(a, a);
        REQUIRE(d.chamfer == 0.0);
        REQUIRE(d.hausdorff == 0.0);
    }

    SECTION("pure translation smaller than the spacing") {
        const Vec3 shift(0.03, 0.0, 0.0);
        std::vector<Vec3> moved;
        for (const Vec3& p : grid) moved.push_back(p + shift);
        const CloudDistance d = chamfer_and_hausdorff(a, cloud_of(moved));
        // Every nearest neighbor is the translated copy of the same point.
        REQUIRE(d.chamfer == Approx(shift.squaredNorm()).margin(1e-15));
        REQUIRE(d.hausdorff == Approx(shift.norm()).margin(1e-12));
    }

    SECTION("empty clouds are rejected") {
        REQUIRE_THROWS_AS(chamfer_and_hausdorff(a, OrientedPointCloud{}), ConfigError);
        REQUIRE_THROWS_AS(chamfer_and_hausdorff(OrientedPointCloud{}, a), ConfigError);
    }
}

TEST_CASE("chamfer and hausdorff match a brute-force oracle", "[metrics]") {
    Rng rng(414);
    const Vec3 lo(-1.2, -1.2, -1.2), hi(1.2, 1.2, 1.2);
    OrientedPointCloud a, b;
    for (int i = 0; i < 150; ++i) a.add(rng.uniform_in_box(lo, hi), Vec3(0, 0, 1));
    for (int i = 0; i < 220; ++i) b.add(rng.uniform_in_box(lo, hi), Vec3(0, 0, 1));

    const auto directed = [](const OrientedPointCloud& from,
                             const OrientedPointCloud& to) {
        double sum = 0, worst = 0;
        for (const Vec3& p : from.positions) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec3& q : to.positions)
                best = std::min(best, (p - q).squaredNorm());
            sum += best;
            worst = std::max(worst, best);
        }
        return std::pair<double, double>{sum / from.size(), worst};
    };
    const auto [mean_ab, max_ab] = directed(a, b);
    const auto [mean_ba, max_ba] = directed(b, a);

    const CloudDistance d = chamfer_and_hausdorff(a, b);
    REQUIRE(d.chamfer == Approx(0.5 * (mean_ab + mean_ba)).epsilon(1e-12));
    REQUIRE(d.hausdorff == Approx(std::sqrt(std::max(max_ab, max_ba))).epsilon(1e-12));
}

TEST_CASE("coldest point error", "[metrics]") {
    REQUIRE(coldest_point_error(Vec3(1, 0, 0), Vec3(0, 0, 0)) == Approx(1.0));
    // Two symmetric minima: score against the nearer one.
    const std::vector<Vec3> minima = {Vec3(0, 0, -1), Vec3(0, 0, 1)};
    REQUIRE(coldest_point_error(Vec3(0.1, 0, 0.9), minima) ==
            Approx((Vec3(0.1, 0, 0.9) - Vec3(0, 0, 1)).norm()));
    REQUIRE_THROWS_AS(coldest_point_error(Vec3::Zero(), std::vector<Vec3>{}),
                      ConfigError);
}

TEST_CASE("cumulative hit fraction", "[metrics]") {
    const std::vector<std::optional<int>> times = {2, std::nullopt, 1};
    const auto curve = cumulative_hit_fraction(times, 4);
    REQUIRE(curve.size() == 4);
    REQUIRE(curve[0] == Approx(1.0 / 3));
    REQUIRE(curve[1] == Approx(2.0 / 3));
    REQUIRE(curve[2] == Approx(2.0 / 3));
    REQUIRE(curve[3] == Approx(2.0 / 3));
    for (size_t i = 1; i < curve.size(); ++i) REQUIRE(curve[i] >= curve[i - 1]);
    REQUIRE(cumulative_hit_fraction({}, 2) == std::vector<double>{0.0, 0.0});
    REQUIRE_THROWS_AS(cumulative_hit_fraction(times, 0), ConfigError);
}

TEST_CASE("TOML subset parsing", "[config]") {
    const std::string text = R"(# benchmark setup
task = "heat"
n_views = 7
n_target = 42.5
seeds = [3, 4]  # paired seeds
spsr.k_max = 3

[scanner]
fov_deg = 60.5
res_w = 32
noise_sigma = 1e-3

[heat.source]
type = "gaussian"
center = [0.0, 0.1,
          -0.2]
width = 0.5

[classifier]
seed = 12000
)";
    const json cfg = parse_config_text(text);
    REQUIRE(cfg["task"] == "heat");
    REQUIRE(cfg["n_views"].is_number_integer());
    REQUIRE(cfg["n_views"] == 7);
    REQUIRE(cfg["n_target"].is_number_float());
    REQUIRE(cfg["n_target"] == Approx(42.5));
    REQUIRE(cfg["seeds"] == json({3, 4}));
    REQUIRE(cfg["spsr"]["k_max"] == 3);
    REQUIRE(cfg["scanner"]["fov_deg"] == Approx(60.5));
    REQUIRE(cfg["scanner"]["noise_sigma"] == Approx(1e-3));
    REQUIRE(cfg["heat"]["source"]["type"] == "gaussian");
    REQUIRE(cfg["heat"]["source"]["center"] == json({0.0, 0.1, -0.2}));
    REQUIRE(cfg["classifier"]["seed"] == 12000);

    SECTION("strings, escapes, and booleans") {
        const json c2 = parse_config_text(
            "name = \"a \\\"quoted\\\" word\"\nflag = true\noff = false\n");
        REQUIRE(c2["name"] == "a \"quoted\" word");
        REQUIRE(c2["flag"] == true);
        REQUIRE(c2["off"] == false);
    }

    SECTION("errors carry line numbers") {
        try {
            parse_config_text("a = 1\nb = \n");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
        }
        REQUIRE_THROWS_AS(parse_config_text("s = \"unterminated\n"), ConfigError);
        REQUIRE_THROWS_AS(parse_config_text("just nonsense\n"), ConfigError);
    }
}

TEST_CASE("JSON config sniffing", "[config]") {
    const json cfg = parse_config_text("  {\"n_views\": 4, \"task\": \"heat\"}");
    REQUIRE(cfg["n_views"] == 4);
    REQUIRE(cfg["task"] == "heat");
    try {
        parse_config_text("{broken");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        REQUIRE(std::string(e.what()).find("JSON") != std::string::npos);
    }
}

TEST_CASE("config resolution and validation", "[config]") {
    const json cfg = resolve_config(json{{"n_views", 9}});
    REQUIRE(cfg["n_views"] == 9);
    // Untouched defaults survive the merge.
    REQUIRE(cfg["scanner"]["res_w"] == 40);
    REQUIRE(cfg["spsr"]["lengthscale"] == Approx(0.35));
    REQUIRE(cfg["task"] == "classification");

    SECTION("unknown keys are rejected with their path") {
        try {
            resolve_config(json{{"scanner", {{"rex_w", 32}}}});
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            REQUIRE(std::string(e.what()).find("scanner.rex_w") != std::string::npos);
        }
    }

    SECTION("enum validation") {
        REQUIRE_THROWS_AS(resolve_config(json{{"task", "sorting"}}), ConfigError);
        REQUIRE_THROWS_AS(resolve_config(json{{"acquisition", "magic"}}), ConfigError);
        REQUIRE_THROWS_AS(resolve_config(json{{"strategies", {"fps", "warp"}}}),
                          ConfigError);
        REQUIRE_THROWS_AS(resolve_config(json{{"initial_view", "sometimes"}}),
                          ConfigError);
        REQUIRE_THROWS_AS(resolve_config(json{{"n_views", 0}}), ConfigError);
        REQUIRE_THROWS_AS(resolve_config(json{{"scenes", json::array()}}),
                          ConfigError);
        REQUIRE_NOTHROW(resolve_config(json{{"initial_view", "per_scene_random"}}));
        REQUIRE_NOTHROW(resolve_config(json{{"initial_view", 3}}));
    }
}

TEST_CASE("typed config extraction", "[config]") {
    const json cfg = resolve_config(json{
        {"scanner",
         {{"fov_deg", 50.0}, {"res_w", 30}, {"res_h", 20}, {"noise_sigma", 0.01},
          {"sphere_radius", 3.0}, {"n_candidates", 17}}},
        {"spsr", {{"lengthscale", 0.3}, {"amplitude", 0.15}, {"k_max", 2},
                  {"grid_n", 24}, {"mean_offset", -0.25}}},
        {"heat", {{"h", 0.05}, {"T", 0.6}, {"k", 8}, {"max_points", 123}}},
    });

    const ScanConfig sc = scan_config_of(cfg);
    REQUIRE(sc.fov_degrees == Approx(50.0));
    REQUIRE(sc.res_w == 30);
    REQUIRE(sc.res_h == 20);
    REQUIRE(sc.noise_sigma == Approx(0.01));

    const auto pool = candidate_pool_of(cfg);
    REQUIRE(pool.size() == 17);
    for (const CameraPose& p : pool)
        REQUIRE(p.position.norm() == Approx(3.0).margin(1e-12));

    const PriorBasis basis = basis_of(cfg);
    REQUIRE(basis.lengthscale == Approx(0.3));
    REQUIRE(basis.amplitude == Approx(0.15));
    REQUIRE(basis.grid_n == 24);

    const GpOptions gp = gp_options_of(cfg);
    REQUIRE(gp.mean_offset == Approx(-0.25));

    const HeatConfig heat = heat_config_of(cfg);
    REQUIRE(heat.h == Approx(0.05));
    REQUIRE(heat.total_time == Approx(0.6));
    REQUIRE(heat.k_neighbors == 8);
    REQUIRE(heat.max_points == 123);
    REQUIRE(heat.source);  // default gaussian source
    const auto c = cfg["heat"]["source"]["center"].get<std::vector<double>>();
    const Vec3 center(c[0], c[1], c[2]);
    const double w = cfg["heat"]["source"]["width"].get<double>();
    const Vec3 probe(0.2, -0.1, 0.4);
    REQUIRE(heat.source(probe) ==
            Approx(std::exp(-(probe - center).squaredNorm() / (w * w))));

    SECTION("source variants") {
        json none = cfg;
        none["heat"]["source"] = {{"type", "none"}};
        // "none" keeps the remaining source keys at defaults but ignores them.
        REQUIRE(resolve_config(json{{"heat", {{"source", {{"type", "none"}}}}}})
                    .contains("heat"));
        json c2 = resolve_config(json{{"heat", {{"source", {{"type", "none"}}}}}});
        REQUIRE_FALSE(heat_source_of(c2));
        REQUIRE_THROWS_AS(
            heat_source_of(resolve_config(
                json{{"heat", {{"source", {{"type", "volcano"}}}}}})),
            ConfigError);
        REQUIRE_THROWS_AS(
            heat_source_of(resolve_config(
                json{{"heat", {{"source", {{"width", -1.0}}}}}})),
            ConfigError);
    }
}

TEST_CASE("svg line plots", "[svg]") {
    PlotSeries s1{"alpha", {1, 2, 3}, {0.1, 0.4, 0.2}};
    PlotSeries s2{"beta & co", {1, 2, 3}, {0.3, 0.3, 0.5}};
    const std::string svg = render_line_plot("demo", "views", "score", {s1, s2});
    REQUIRE(svg.find("<svg") != std::string::npos);
    REQUIRE(svg.find("polyline") != std::string::npos);
    REQUIRE(svg.find("alpha") != std::string::npos);
    REQUIRE(svg.find("beta &amp; co") != std::string::npos);  // escaped
    // Deterministic output.
    REQUIRE(svg == render_line_plot("demo", "views", "score", {s1, s2}));

    PlotSeries bad{"bad", {1, 2}, {0.1}};
    REQUIRE_THROWS_AS(render_line_plot("t", "x", "y", {bad}), ConfigError);

    const fs::path dir = fresh_dir("svg");
    write_text_file((dir / "plot.svg").string(), svg);
    REQUIRE(slurp((dir / "plot.svg").string()) == svg);
    REQUIRE_THROWS_AS(write_text_file((dir / "no" / "such" / "dir.svg").string(), svg),
                      ConfigError);
}

TEST_CASE("episode csv rows", "[bench]") {
    Episode ep;
    ep.scene_name = "demo";
    ep.strategy = "fps";
    ep.seed = 99;
    StepRecord s1;
    s1.step = 1;
    s1.pose = pose_from_angles(0.0, 0.5, 2.5);
    s1.pose_index = 0;
    s1.cloud_size = 100;
    s1.task = {{"predicted", 2}, {"probs", {0.1, 0.2, 0.7}}};
    StepRecord s2 = s1;
    s2.step = 2;
    s2.pose_index = 7;
    s2.cloud_size = 190;
    s2.task = {{"hard_counts", {4, 9, 2}}, {"soft_totals", {4.2, 8.8, 2.0}}};
    ep.steps = {s1, s2};

    const auto rows = episode_csv_rows(ep, "demo:spec", 5, 2, nullptr);
    REQUIRE(rows.size() == 2);
    const std::string header = csv_header();
    const int n_cols =
        static_cast<int>(std::count(header.begin(), header.end(), ',')) + 1;
    for (const std::string& row : rows)
        REQUIRE(std::count(row.begin(), row.end(), ',') + 1 == n_cols);
    // Classification cells on step 1, empty task cells elsewhere.
    REQUIRE(rows[0].find("demo:spec,5,fps,99,1,0,") == 0);
    REQUIRE(rows[0].find(",2,2,,") != std::string::npos);  // predicted, truth
    // Segmentation min-class count (min of 4, 9, 2) on step 2.
    REQUIRE(rows[1].find(",0,,,2,") != std::string::npos);
}

TEST_CASE("benchmark bookkeeping", "[bench][slow]") {
    const json cfg = tiny_bench_config();
    const fs::path dir = fresh_dir("bench");
    const BenchResult result = run_benchmark(cfg, dir.string());

    SECTION("artifacts and shapes") {
        REQUIRE(result.episodes.size() == 4);  // 2 scenes x 1 seed x 2 strategies
        for (const std::string& scene : {"pyramid:cross", "pyramid:ring"})
            for (const std::string& strat : {"fps", "random"})
                REQUIRE(fs::exists(dir / "episodes" /
                                   episode_file_name(scene, 5, strat)));
        REQUIRE(fs::exists(dir / "metrics.csv"));
        REQUIRE(fs::exists(dir / "summary.json"));
        REQUIRE(fs::exists(dir / "stable_hit.svg"));

        // header + episodes x steps rows
        std::istringstream csv(result.csv);
        std::string line;
        int lines = 0;
        while (std::getline(csv, line)) ++lines;
        REQUIRE(lines == 1 + 4 * 3);
        REQUIRE(result.csv == slurp((dir / "metrics.csv").string()));

        const json summary = json::parse(slurp((dir / "summary.json").string()));
        REQUIRE(summary["task"] == "classification");
        REQUIRE(summary["per_strategy"]["fps"]["episodes"] == 2);
        REQUIRE(summary["per_strategy"]["random"]["episodes"] == 2);
        REQUIRE(summary["per_episode"].size() == 4);
        for (const auto& e : summary["per_episode"])
            REQUIRE(e["metrics"].contains("t_stable_censored"));
    }

    SECTION("strategies are paired") {
        for (const std::string& scene : {"pyramid:cross", "pyramid:ring"}) {
            const BenchEpisode* by_strat[2] = {nullptr, nullptr};
            for (const BenchEpisode& e : result.episodes) {
                if (e.scene != scene) continue;
                by_strat[e.strategy == "random"] = &e;
            }
            REQUIRE(by_strat[0] != nullptr);
            REQUIRE(by_strat[1] != nullptr);
            // Identical episode seed, initial view, and initial scan.
            REQUIRE(by_strat[0]->episode.seed == by_strat[1]->episode.seed);
            const StepRecord& a = by_strat[0]->episode.steps[0];
            const StepRecord& b = by_strat[1]->episode.steps[0];
            REQUIRE(a.pose_index == b.pose_index);
            REQUIRE(a.pose.position == b.pose.position);
            REQUIRE(a.cloud_size == b.cloud_size);
        }
    }

    SECTION("re-running is byte-identical") {
        const fs::path dir2 = fresh_dir("bench2");
        const BenchResult again = run_benchmark(cfg, dir2.string());
        REQUIRE(again.csv == result.csv);
        REQUIRE(slurp((dir2 / "metrics.csv").string()) ==
                slurp((dir / "metrics.csv").string()));
    }

    SECTION("stored episodes replay") {
        const json stored = json::parse(
            slurp((dir / "episodes" / episode_file_name("pyramid:cross", 5, "fps"))
                      .string()));
        const ReplayReport rep =
            replay_episode(stored, (dir / "metrics.csv").string());
        REQUIRE(rep.record_match);
        REQUIRE(rep.csv_checked);
        REQUIRE(rep.csv_match);

        json tampered = stored;
        tampered["steps"][1]["pose"]["position"][0] =
            tampered["steps"][1]["pose"]["position"][0].get<double>() + 0.25;
        const ReplayReport bad = replay_episode(tampered);
        REQUIRE_FALSE(bad.record_match);
        REQUIRE(bad.mismatch.find("step 2") != std::string::npos);

        json incomplete = stored;
        incomplete.erase("config");
        REQUIRE_THROWS_AS(replay_episode(incomplete), ConfigError);
    }
}

TEST_CASE("initial view resolution", "[bench]") {
    const json fixed = resolve_config(json{{"initial_view", 3}});
    REQUIRE(resolve_initial_index(fixed, 10, 42) == 3);
    REQUIRE_THROWS_AS(resolve_initial_index(fixed, 2, 42), ConfigError);

    const json random_cfg = resolve_config(json{{"initial_view", "per_scene_random"}});
    const int first = resolve_initial_index(random_cfg, 10, 42);
    REQUIRE(first == resolve_initial_index(random_cfg, 10, 42));  // deterministic
    bool varied = false;
    for (uint64_t seed = 0; seed < 20 && !varied; ++seed) {
        const int idx = resolve_initial_index(random_cfg, 10, seed);
        REQUIRE(idx >= 0);
        REQUIRE(idx < 10);
        varied = idx != first;
    }
    REQUIRE(varied);
}

TEST_CASE("episode seeds ignore the strategy", "[bench]") {
    REQUIRE(episode_seed_of(5, 0) == episode_seed_of(5, 0));
    REQUIRE(episode_seed_of(5, 0) != episode_seed_of(5, 1));
    REQUIRE(episode_seed_of(5, 0) != episode_seed_of(6, 0));
}

TEST_CASE("cli smoke", "[cli][slow]") {
    const fs::path dir = fresh_dir("cli");
    REQUIRE(run_cli("scan --scene sphere --az 15 --el 30 --out " +
                    (dir / "scan.ply").string()) == 0);
    REQUIRE(fs::exists(dir / "scan.ply"));
    REQUIRE(run_cli("scan --scene not_a_scene") == 2);
    REQUIRE(run_cli("bench --config /definitely/missing.toml") == 2);
    REQUIRE(run_cli("replay --episode /definitely/missing.json") == 2);
}
