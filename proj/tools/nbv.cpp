// Command-line front end: simulated scanning, surface reconstruction,
// episode planning, the benchmark grid, and episode replay.
//
// Exit codes: 0 success, 2 config error, 3 runtime failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nbv/bench.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json effective_config(const std::string& path, const std::optional<uint64_t>& seed,
                      const std::string& out_dir, int threads) {
    const json user = path.empty() ? json::object() : nbv::load_config_file(path);
    json cfg = nbv::resolve_config(user);
    if (seed) cfg["seeds"] = {*seed};
    if (!out_dir.empty()) cfg["out_dir"] = out_dir;
    if (threads > 0) cfg["threads"] = threads;
    return cfg;
}

void ensure_parent_dir(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

int cmd_scan(const json& cfg, const std::string& scene_spec, double az_deg,
             double el_deg, std::string out_path) {
    const uint64_t seed = cfg.at("seeds")[0].get<uint64_t>();
    const nbv::Scene scene = nbv::scene_by_name(scene_spec, seed);
    const double radius = cfg.at("scanner").at("sphere_radius").get<double>();
    const nbv::CameraPose pose =
        nbv::pose_from_angles(nbv::deg2rad(az_deg), nbv::deg2rad(el_deg), radius);
    const nbv::OrientedPointCloud cloud =
        nbv::scan(scene, pose, nbv::scan_config_of(cfg), seed,
                  cfg.at("threads").get<int>());
    if (out_path.empty())
        out_path =
            (fs::path(cfg.at("out_dir").get<std::string>()) / "scan.ply").string();
    ensure_parent_dir(out_path);
    nbv::write_ply(out_path, cloud);
    std::cout << "wrote " << cloud.size() << " points to " << out_path << "\n";
    return 0;
}

int cmd_reconstruct(const json& cfg, const std::string& in_path,
                    std::string out_path) {
    const nbv::OrientedPointCloud cloud = nbv::read_ply(in_path);
    const nbv::GpOptions opts = nbv::gp_options_of(cfg);
    const nbv::PosteriorField post =
        nbv::condition(nbv::basis_of(cfg), cloud, opts.sigma_v, opts.sigma_n, opts);
    const nbv::TriangleMesh mesh = nbv::extract_outer_mesh(post);
    if (out_path.empty())
        out_path =
            (fs::path(cfg.at("out_dir").get<std::string>()) / "mesh.obj").string();
    ensure_parent_dir(out_path);
    nbv::write_obj(mesh, out_path);
    std::cout << "wrote " << mesh.vertices.size() << " vertices / "
              << mesh.triangles.size() << " triangles to " << out_path << "\n";
    return 0;
}

int cmd_plan(const json& cfg, std::string scene_spec, std::string strat_name,
             bool dump_clouds) {
    if (scene_spec.empty()) scene_spec = cfg.at("scenes")[0].get<std::string>();
    if (strat_name.empty()) strat_name = cfg.at("strategies")[0].get<std::string>();
    nbv::strategy_from_name(strat_name);  // fail fast, before model training
    const uint64_t scene_seed = cfg.at("seeds")[0].get<uint64_t>();
    const uint64_t episode_seed = nbv::episode_seed_of(scene_seed, 0);
    const std::string out_dir = cfg.at("out_dir").get<std::string>();
    fs::create_directories(out_dir);

    nbv::StepHook hook;
    if (dump_clouds) {
        fs::create_directories(fs::path(out_dir) / "clouds");
        hook = [out_dir](int step, const nbv::OrientedPointCloud& cloud) {
            char name[32];
            std::snprintf(name, sizeof(name), "step_%02d.ply", step);
            nbv::write_ply((fs::path(out_dir) / "clouds" / name).string(), cloud);
        };
    }

    const nbv::BenchEpisode entry = nbv::run_single_episode(
        cfg, scene_spec, strat_name, scene_seed, episode_seed, {}, hook);

    json ep_json = nbv::episode_to_json(entry.episode);
    ep_json["metrics"] = entry.metrics;
    const std::string path =
        (fs::path(out_dir) /
         nbv::episode_file_name(scene_spec, scene_seed, strat_name))
            .string();
    nbv::write_text_file(path, ep_json.dump(2) + "\n");

    for (const nbv::StepRecord& s : entry.episode.steps) {
        const auto [az, el] = nbv::angles_of(s.pose);
        std::printf("view %d: pool=%d az=%.1f el=%.1f points=%d\n", s.step,
                    s.pose_index, nbv::rad2deg(az), nbv::rad2deg(el),
                    s.cloud_size);
    }
    std::cout << "episode written to " << path << "\n";
    if (entry.episode.failed) {
        std::cerr << "episode failed: " << entry.episode.failure << "\n";
        return 3;
    }
    return 0;
}

int cmd_bench(const json& cfg) {
    const std::string out_dir = cfg.at("out_dir").get<std::string>();
    const nbv::BenchResult result = nbv::run_benchmark(cfg, out_dir);
    int failed = 0;
    for (const nbv::BenchEpisode& e : result.episodes)
        failed += e.episode.failed ? 1 : 0;
    std::cout << result.episodes.size() << " episodes (" << failed
              << " failed); outputs in " << out_dir << "\n";
    return failed == 0 ? 0 : 3;
}

int cmd_replay(const std::string& ep_path, const std::string& csv_path) {
    std::ifstream f(ep_path);
    if (!f) throw nbv::ConfigError("cannot open episode file: " + ep_path);
    json stored;
    try {
        stored = json::parse(f);
    } catch (const json::parse_error& err) {
        throw nbv::ConfigError(std::string("episode JSON: ") + err.what());
    }
    const nbv::ReplayReport rep = nbv::replay_episode(stored, csv_path);
    std::cout << "record: "
              << (rep.record_match ? "match" : "MISMATCH (" + rep.mismatch + ")")
              << "\n";
    if (rep.csv_checked)
        std::cout << "csv rows: " << (rep.csv_match ? "match" : "MISMATCH")
                  << "\n";
    return rep.record_match && (!rep.csv_checked || rep.csv_match) ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Task-aware next-best-view scanning toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    uint64_t seed = 0;
    int threads = 0;
    bool dump_clouds = false;
    app.add_option("--config", config_path, "TOML or JSON config file");
    CLI::Option* seed_opt =
        app.add_option("--seed", seed, "replace the config seed list with this seed");
    app.add_option("--out-dir", out_dir, "output directory (overrides config)");
    app.add_option("--threads", threads, "worker threads (overrides config)");
    app.add_flag("--dump-clouds", dump_clouds,
                 "plan: write the cumulative cloud after every view");

    auto* scan_cmd = app.add_subcommand("scan", "render one simulated scan to PLY");
    scan_cmd->fallthrough();  // global flags may follow the verb
    std::string scan_scene = "sphere", scan_out;
    double az = 0.0, el = 0.0;
    scan_cmd->add_option("--scene", scan_scene,
                         "scene spec, e.g. sphere, pyramid:cross, shapes:3");
    scan_cmd->add_option("--az", az, "camera azimuth in degrees");
    scan_cmd->add_option("--el", el, "camera elevation in degrees");
    scan_cmd->add_option("--out", scan_out, "output PLY path");

    auto* rec_cmd = app.add_subcommand(
        "reconstruct", "fit the surface posterior to a PLY cloud, write mean mesh");
    rec_cmd->fallthrough();
    std::string rec_in, rec_out;
    rec_cmd->add_option("--in", rec_in, "input PLY cloud")->required();
    rec_cmd->add_option("--out", rec_out, "output OBJ path");

    auto* plan_cmd = app.add_subcommand("plan", "run one acquisition episode");
    plan_cmd->fallthrough();
    std::string plan_scene, plan_strategy;
    plan_cmd->add_option("--scene", plan_scene,
                         "scene spec (default: first config scene)");
    plan_cmd->add_option("--strategy", plan_strategy,
                         "view-selection strategy (default: first config strategy)");

    auto* bench_cmd =
        app.add_subcommand("bench", "run the benchmark grid from the config");
    bench_cmd->fallthrough();

    auto* replay_cmd = app.add_subcommand(
        "replay", "re-run a stored episode and verify it reproduces");
    replay_cmd->fallthrough();
    std::string ep_path, csv_path;
    replay_cmd->add_option("--episode", ep_path, "stored episode JSON")->required();
    replay_cmd->add_option("--csv", csv_path,
                           "stored metrics.csv to compare rows against");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad flags are config errors
    }

    try {
        if (replay_cmd->parsed()) return cmd_replay(ep_path, csv_path);
        std::optional<uint64_t> seed_override;
        if (seed_opt->count() > 0) seed_override = seed;
        const json cfg =
            effective_config(config_path, seed_override, out_dir, threads);
        if (scan_cmd->parsed()) return cmd_scan(cfg, scan_scene, az, el, scan_out);
        if (rec_cmd->parsed()) return cmd_reconstruct(cfg, rec_in, rec_out);
        if (plan_cmd->parsed())
            return cmd_plan(cfg, plan_scene, plan_strategy, dump_clouds);
        return cmd_bench(cfg);
    } catch (const nbv::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
