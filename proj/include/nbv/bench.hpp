#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nbv/config.hpp"
#include "nbv/mesh.hpp"
#include "nbv/metrics.hpp"
#include "nbv/planner.hpp"
#include "nbv/scene_library.hpp"
#include "nbv/svg.hpp"
#include "nbv/tasks.hpp"

namespace nbv {

// Per-benchmark task wiring shared by every episode.
struct TaskModels {
    std::string task;
    std::string acquisition;
    std::optional<DescriptorClassifier> classifier;
    HeatConfig heat;        // acquisition-side (decimated hard for speed)
    HeatConfig heat_probe;  // estimate-side (larger point budget)
    double n_target = 20;
    double seg_epsilon = 0.1;
    int threads = 1;
};

namespace detail {

inline std::string sanitize_name(const std::string& name) {
    std::string out;
    for (char c : name)
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '-');
    return out;
}

inline std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline uint64_t ground_truth_seed(uint64_t scene_seed) {
    return mix_seed(scene_seed, 0x67d7);
}

}  // namespace detail

// Episode seeds are derived from (scene seed, scene index) only, never from
// the strategy, so every strategy runs the same paired episodes.
inline uint64_t episode_seed_of(uint64_t scene_seed, int scene_index) {
    return mix_seed(scene_seed, static_cast<uint64_t>(scene_index), 0xbe7c);
}

inline std::string episode_file_name(const std::string& scene_spec,
                                     uint64_t scene_seed,
                                     const std::string& strat_name) {
    return "ep_" + detail::sanitize_name(scene_spec) + "_" +
           std::to_string(scene_seed) + "_" + strat_name + ".json";
}

// Classifier trained on the procedural pyramid family with seeds disjoint
// from evaluation scenes. Each example mimics an episode's cumulative cloud:
// the shared initial view plus a few random lattice views.
inline DescriptorClassifier train_bench_classifier(const nlohmann::json& cfg,
                                                   const std::vector<CameraPose>& pool,
                                                   const ScanConfig& scan_cfg,
                                                   int threads = 1) {
    const auto& cc = cfg.at("classifier");
    const uint64_t base = cc.at("seed").get<uint64_t>();
    const int per_class = cc.at("train_seeds_per_class").get<int>();
    const int n_views = cc.at("train_views").get<int>();
    const auto& names = pyramid_pattern_names();

    std::vector<TrainExample> examples;
    for (int p = 0; p < static_cast<int>(names.size()); ++p) {
        for (int t = 0; t < per_class; ++t) {
            const Scene scene = make_pyramid_scene(static_cast<PyramidPattern>(p),
                                                   base + 100ull * p + t);
            Rng rng(mix_seed(base, p, t));
            OrientedPointCloud cloud;
            for (int k = 0; k < n_views; ++k) {
                const CameraPose& pose =
                    (k == 0) ? pool[0] : pool[rng.uniform_int(pool.size())];
                cloud.append(scan(scene, pose, scan_cfg,
                                  mix_seed(base, 1000ull * p + t, k), threads));
            }
            examples.push_back({std::move(cloud), p});
        }
    }
    return train_descriptor_classifier(examples, cc.at("epochs").get<int>(), base);
}

inline TaskModels build_task_models(const nlohmann::json& cfg,
                                    const std::vector<CameraPose>& pool,
                                    const ScanConfig& scan_cfg, int threads) {
    TaskModels models;
    models.task = cfg.at("task").get<std::string>();
    models.acquisition = cfg.at("acquisition").get<std::string>();
    models.n_target = cfg.at("n_target").get<double>();
    models.seg_epsilon = cfg.at("segmentation").at("epsilon").get<double>();
    models.threads = threads;
    models.heat = heat_config_of(cfg);
    models.heat_probe = models.heat;
    models.heat_probe.max_points = 0;  // probe sees the whole cumulative cloud
    const bool needs_classifier = models.task == "classification" ||
                                  models.acquisition == "cross_entropy" ||
                                  models.acquisition == "eui_entropy";
    if (needs_classifier)
        models.classifier = train_bench_classifier(cfg, pool, scan_cfg, threads);
    return models;
}

// Candidate scorer for the bayes strategies; baselines ignore it.
inline AcqScorer make_scorer(const TaskModels& models, const ScanConfig& scan_cfg,
                             const Scene& scene) {
    const int threads = models.threads;
    if (models.acquisition == "cross_entropy") {
        return [clf = *models.classifier, scan_cfg, threads](
                   const CameraPose& pose, const std::vector<FieldSample>& fields,
                   const OrientedPointCloud& d_t, uint64_t seed) {
            return cross_entropy_over_samples(clf, fields, d_t, pose, scan_cfg, seed,
                                              threads);
        };
    }
    if (models.acquisition == "eui_entropy") {
        UtilityFn u = make_entropy_utility(*models.classifier);
        return [u, scan_cfg, threads](const CameraPose& pose,
                                      const std::vector<FieldSample>& fields,
                                      const OrientedPointCloud& d_t, uint64_t seed) {
            return eui_over_samples(u, fields, d_t, pose, scan_cfg, seed, threads);
        };
    }
    if (models.acquisition == "eui_softcount") {
        UtilityFn u = make_softcount_utility(OracleSegmenter(scene, models.seg_epsilon),
                                             models.n_target);
        return [u, scan_cfg, threads](const CameraPose& pose,
                                      const std::vector<FieldSample>& fields,
                                      const OrientedPointCloud& d_t, uint64_t seed) {
            return eui_over_samples(u, fields, d_t, pose, scan_cfg, seed, threads);
        };
    }
    if (models.acquisition == "eui_heat") {
        UtilityFn u = make_heat_utility(models.heat);
        return [u, scan_cfg, threads](const CameraPose& pose,
                                      const std::vector<FieldSample>& fields,
                                      const OrientedPointCloud& d_t, uint64_t seed) {
            return eui_over_samples(u, fields, d_t, pose, scan_cfg, seed, threads);
        };
    }
    if (models.acquisition == "chamfer") {
        return [scan_cfg, threads](const CameraPose& pose,
                                   const std::vector<FieldSample>& fields,
                                   const OrientedPointCloud& d_t, uint64_t seed) {
            if (d_t.empty()) throw InsufficientPoints("chamfer needs a non-empty cloud");
            return chamfer_over_samples(fields, KdTree(d_t.positions), pose, scan_cfg,
                                        seed, threads);
        };
    }
    throw ConfigError("unknown acquisition: " + models.acquisition);
}

// Per-scene ground truth for the heat and reconstruction metrics.
struct SceneGroundTruth {
    OrientedPointCloud surface;
    double mean_spacing = 0;  // mean nearest-neighbor distance in `surface`
    Vec3 coldest = Vec3::Zero();
    double coldest_temperature = 0;
};

inline SceneGroundTruth compute_ground_truth(const Scene& scene,
                                             const nlohmann::json& cfg,
                                             const TaskModels& models,
                                             uint64_t scene_seed) {
    SceneGroundTruth gt;
    const int n = cfg.at("ground_truth").at("n_surface_samples").get<int>();
    gt.surface = sample_surface(scene, n, detail::ground_truth_seed(scene_seed));
    KdTree tree(gt.surface.positions);
    double acc = 0;
    for (const Vec3& p : gt.surface.positions) {
        const auto hits = tree.knn(p, 2);  // self + nearest
        acc += std::sqrt(hits.back().d2);
    }
    gt.mean_spacing = acc / gt.surface.size();

    if (models.task == "heat") {
        HeatConfig dense = models.heat;
        dense.max_points = 0;
        const GraphLaplacian graph =
            knn_graph_laplacian(gt.surface.positions, dense.k_neighbors,
                                dense.bandwidth);
        const VecX u = heat_solve(gt.surface.positions, graph, dense);
        const ColdestPoint cold = coldest_point(u, gt.surface.positions);
        gt.coldest = cold.position;
        gt.coldest_temperature = cold.temperature;
    }
    return gt;
}

// Task observer recorded into every step; never throws (failures are marked
// in the JSON so an unlucky early scan doesn't abort the whole episode).
inline TaskProbe make_probe(const TaskModels& models, const Scene& scene,
                            std::shared_ptr<const SceneGroundTruth> gt) {
    if (models.task == "classification") {
        return [clf = *models.classifier](const OrientedPointCloud& cloud) {
            nlohmann::json out;
            try {
                const ClassDistribution d = clf.classify(cloud);
                out["predicted"] = predicted_label(d);
                out["probs"] = std::vector<double>(
                    d.probs.data(), d.probs.data() + d.probs.size());
            } catch (const EmptyPrediction&) {
                out["insufficient"] = true;
            }
            return out;
        };
    }
    if (models.task == "segmentation") {
        return [seg = OracleSegmenter(scene, models.seg_epsilon)](
                   const OrientedPointCloud& cloud) {
            nlohmann::json out;
            const std::vector<ClassDistribution> dists = seg.segment(cloud);
            std::vector<double> soft(seg.n_classes(), 0.0);
            std::vector<int> hard(seg.n_classes(), 0);
            for (const ClassDistribution& d : dists) {
                for (int c = 0; c < seg.n_classes(); ++c) soft[c] += d.probs[c];
                ++hard[predicted_label(d)];
            }
            out["soft_totals"] = soft;
            out["hard_counts"] = hard;
            return out;
        };
    }
    if (models.task == "heat") {
        return [cfg = models.heat_probe](const OrientedPointCloud& cloud) {
            nlohmann::json out;
            try {
                const OrientedPointCloud used = decimate_to(cloud, cfg.max_points);
                const GraphLaplacian graph =
                    knn_graph_laplacian(used.positions, cfg.k_neighbors, cfg.bandwidth);
                const VecX u = heat_solve(used.positions, graph, cfg);
                const ColdestPoint cold = coldest_point(u, used.positions);
                out["coldest"] = {cold.position.x(), cold.position.y(),
                                  cold.position.z()};
                out["temperature"] = cold.temperature;
            } catch (const std::exception& err) {
                out["insufficient"] = true;
                out["why"] = err.what();
            }
            return out;
        };
    }
    if (models.task == "reconstruction") {
        return [gt](const OrientedPointCloud& cloud) {
            nlohmann::json out;
            if (cloud.empty()) {
                out["insufficient"] = true;
                return out;
            }
            const CloudDistance d = chamfer_and_hausdorff(cloud, gt->surface);
            out["chamfer"] = d.chamfer;
            out["hausdorff"] = d.hausdorff;
            return out;
        };
    }
    throw ConfigError("unknown task: " + models.task);
}

// ------------------------------------------------------------- CSV rows ----

inline std::string csv_header() {
    return "scene,scene_seed,strategy,episode_seed,step,pose_index,pos_x,pos_y,pos_z,"
           "cloud_size,failed,predicted,truth,min_class_count,coldest_x,coldest_y,"
           "coldest_z,coldest_error,chamfer,hausdorff";
}

inline std::vector<std::string> episode_csv_rows(const Episode& ep,
                                                 const std::string& scene_name,
                                                 uint64_t scene_seed, int truth_label,
                                                 const SceneGroundTruth* gt) {
    std::vector<std::string> rows;
    for (const StepRecord& s : ep.steps) {
        std::string row = scene_name + "," + std::to_string(scene_seed) + "," +
                          ep.strategy + "," + std::to_string(ep.seed) + "," +
                          std::to_string(s.step) + "," + std::to_string(s.pose_index) +
                          "," + detail::csv_num(s.pose.position.x()) + "," +
                          detail::csv_num(s.pose.position.y()) + "," +
                          detail::csv_num(s.pose.position.z()) + "," +
                          std::to_string(s.cloud_size) + "," +
                          (ep.failed ? "1" : "0") + ",";
        // classification
        if (s.task.contains("predicted")) {
            row += std::to_string(s.task["predicted"].get<int>()) + "," +
                   std::to_string(truth_label) + ",";
        } else {
            row += ",,";
        }
        // segmentation
        if (s.task.contains("hard_counts")) {
            const auto counts = s.task["hard_counts"].get<std::vector<int>>();
            row += std::to_string(*std::min_element(counts.begin(), counts.end()));
        }
        row += ",";
        // heat
        if (s.task.contains("coldest") && gt) {
            const auto c = s.task["coldest"].get<std::vector<double>>();
            const double err = coldest_point_error(Vec3(c[0], c[1], c[2]), gt->coldest);
            row += detail::csv_num(c[0]) + "," + detail::csv_num(c[1]) + "," +
                   detail::csv_num(c[2]) + "," + detail::csv_num(err) + ",";
        } else {
            row += ",,,,";
        }
        // reconstruction
        if (s.task.contains("chamfer")) {
            row += detail::csv_num(s.task["chamfer"].get<double>()) + "," +
                   detail::csv_num(s.task["hausdorff"].get<double>());
        } else {
            row += ",";
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// ------------------------------------------------------------ benchmark ----

struct BenchEpisode {
    std::string scene;
    uint64_t scene_seed = 0;
    std::string strategy;
    Episode episode;
    nlohmann::json metrics;  // per-episode derived metrics
    std::vector<std::string> csv_rows;
};

struct BenchResult {
    nlohmann::json summary;
    std::string csv;
    std::vector<BenchEpisode> episodes;
};

namespace detail {

// Derived per-episode metrics from the recorded step probes.
inline nlohmann::json episode_metrics(const Episode& ep, const TaskModels& models,
                                      int truth_label, const SceneGroundTruth* gt,
                                      int n_views) {
    nlohmann::json m;
    m["failed"] = ep.failed;
    if (models.task == "classification") {
        std::vector<int> preds;
        for (const StepRecord& s : ep.steps)
            preds.push_back(s.task.contains("predicted")
                                ? s.task["predicted"].get<int>()
                                : -1);
        if (!preds.empty()) {
            const HitTimes hits = first_and_stable_hit(preds, truth_label);
            m["t_first"] = hits.first ? nlohmann::json(*hits.first) : nullptr;
            m["t_stable"] = hits.stable ? nlohmann::json(*hits.stable) : nullptr;
            // Censored value for mean/pairwise comparisons: never = horizon+1.
            m["t_stable_censored"] = hits.stable ? *hits.stable : n_views + 1;
            m["t_first_censored"] = hits.first ? *hits.first : n_views + 1;
        }
    } else if (models.task == "segmentation") {
        std::vector<std::vector<double>> counts;
        for (const StepRecord& s : ep.steps) {
            if (!s.task.contains("hard_counts")) break;
            const auto h = s.task["hard_counts"].get<std::vector<double>>();
            counts.push_back(h);
        }
        nlohmann::json disc = nlohmann::json::object();
        if (!counts.empty()) {
            const int n_classes = static_cast<int>(counts[0].size());
            for (double target : {20.0, 60.0, 100.0, models.n_target}) {
                const auto t = discovery_time(counts, target, n_classes);
                disc[detail::csv_num(target)] =
                    t ? nlohmann::json(*t) : nullptr;
                disc[detail::csv_num(target) + "_censored"] = t ? *t : n_views + 1;
            }
        }
        m["discovery"] = disc;
    } else if (models.task == "heat") {
        std::vector<double> errors;
        for (const StepRecord& s : ep.steps) {
            if (s.task.contains("coldest") && gt) {
                const auto c = s.task["coldest"].get<std::vector<double>>();
                errors.push_back(
                    coldest_point_error(Vec3(c[0], c[1], c[2]), gt->coldest));
            } else {
                errors.push_back(std::numeric_limits<double>::quiet_NaN());
            }
        }
        m["coldest_error"] = errors;
        if (gt) m["gt_mean_spacing"] = gt->mean_spacing;
    } else if (models.task == "reconstruction") {
        std::vector<double> cd, hd;
        for (const StepRecord& s : ep.steps) {
            cd.push_back(s.task.contains("chamfer")
                             ? s.task["chamfer"].get<double>()
                             : std::numeric_limits<double>::quiet_NaN());
            hd.push_back(s.task.contains("hausdorff")
                             ? s.task["hausdorff"].get<double>()
                             : std::numeric_limits<double>::quiet_NaN());
        }
        m["cloud_chamfer"] = cd;
        m["cloud_hausdorff"] = hd;
    }
    return m;
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double acc = 0;
    for (double x : v) acc += x;
    return acc / v.size();
}

}  // namespace detail

inline int resolve_initial_index(const nlohmann::json& cfg, size_t pool_size,
                                 uint64_t episode_seed) {
    const auto& initial = cfg.at("initial_view");
    if (initial.is_string()) {  // "per_scene_random", validated at resolve time
        Rng rng(mix_seed(episode_seed, 0x1111));
        return static_cast<int>(rng.uniform_int(pool_size));
    }
    const int idx = initial.get<int>();
    if (idx < 0 || idx >= static_cast<int>(pool_size))
        throw ConfigError("initial_view index outside the candidate pool");
    return idx;
}

// Reconstruction error of the posterior mean surface against the GT sample.
inline nlohmann::json mesh_metrics(const PosteriorField& posterior,
                                   const SceneGroundTruth& gt, uint64_t seed) {
    nlohmann::json out;
    const TriangleMesh mesh = extract_outer_mesh(posterior);
    if (mesh.triangles.empty()) {
        out["empty_surface"] = true;
        return out;
    }
    const OrientedPointCloud recon =
        sample_mesh(mesh, 8000, mix_seed(seed, 0x3e5));
    if (recon.empty()) {
        out["empty_surface"] = true;
        return out;
    }
    const CloudDistance d = chamfer_and_hausdorff(recon, gt.surface);
    out["mesh_chamfer"] = d.chamfer;
    out["mesh_hausdorff"] = d.hausdorff;
    return out;
}

// Everything derived from a resolved config that is shared across episodes
// (includes the trained classifier, so build it once per benchmark).
struct BenchPlan {
    int threads = 1;
    ScanConfig scan_cfg;
    std::vector<CameraPose> pool;
    TaskModels models;
    PlanConfig plan;
};

inline BenchPlan build_bench_plan(const nlohmann::json& cfg,
                                  int threads_override = 0) {
    BenchPlan bp;
    bp.threads =
        threads_override > 0 ? threads_override : cfg.at("threads").get<int>();
    bp.scan_cfg = scan_config_of(cfg);
    bp.pool = candidate_pool_of(cfg);
    bp.models = build_task_models(cfg, bp.pool, bp.scan_cfg, bp.threads);

    bp.plan.scan = bp.scan_cfg;
    bp.plan.pool = bp.pool;
    bp.plan.basis = basis_of(cfg);
    bp.plan.gp = gp_options_of(cfg);
    bp.plan.n_samples = cfg.at("spsr").at("n_mc_samples").get<int>();
    bp.plan.n_views = cfg.at("n_views").get<int>();
    bp.plan.refine_starts = cfg.at("refine").at("n_starts").get<int>();
    bp.plan.refine_iters = cfg.at("refine").at("n_iters").get<int>();
    bp.plan.refine_step0 = cfg.at("refine").at("step0").get<double>();
    bp.plan.threads = bp.threads;
    return bp;
}

// Optional per-step observer (e.g. cumulative-cloud dumps). Steps are 1-based.
using StepHook = std::function<void(int, const OrientedPointCloud&)>;

// One cell of the benchmark grid: a single (scene, seed, strategy) episode
// plus its derived metrics and CSV rows.
inline BenchEpisode run_episode_cell(const BenchPlan& bp, const Scene& scene,
                                     const std::string& scene_spec,
                                     const std::string& strat_name,
                                     uint64_t scene_seed, uint64_t episode_seed,
                                     int initial_index,
                                     std::shared_ptr<const SceneGroundTruth> gt,
                                     const nlohmann::json& cfg,
                                     const StepHook& on_step = {}) {
    const Strategy strat = strategy_from_name(strat_name);
    const bool is_bayes =
        strat == Strategy::bayes_discrete || strat == Strategy::bayes_refine;
    const AcqScorer scorer =
        is_bayes ? make_scorer(bp.models, bp.scan_cfg, scene) : AcqScorer();
    TaskProbe probe = make_probe(bp.models, scene, gt);
    if (on_step) {
        auto counter = std::make_shared<int>(0);
        probe = [inner = std::move(probe), on_step,
                 counter](const OrientedPointCloud& cloud) {
            on_step(++*counter, cloud);
            return inner(cloud);
        };
    }

    PlanConfig plan = bp.plan;
    plan.initial_index = initial_index;

    std::optional<PlannerState> final_state;
    BenchEpisode entry;
    entry.episode =
        run_episode(scene, strat, scorer, probe, plan, episode_seed, &final_state);
    entry.episode.config = {{"benchmark", cfg},
                            {"scene_spec", scene_spec},
                            {"scene_seed", scene_seed},
                            {"initial_index", initial_index}};
    entry.scene = scene_spec;
    entry.scene_seed = scene_seed;
    entry.strategy = strat_name;
    entry.metrics =
        detail::episode_metrics(entry.episode, bp.models,
                                scene.class_label.value_or(-1), gt.get(),
                                plan.n_views);
    if (bp.models.task == "reconstruction" && !entry.episode.failed &&
        final_state && final_state->posterior) {
        const nlohmann::json mm =
            mesh_metrics(*final_state->posterior, *gt, episode_seed);
        for (const auto& [k, v] : mm.items()) entry.metrics[k] = v;
    }
    entry.csv_rows = episode_csv_rows(entry.episode, scene_spec, scene_seed,
                                      scene.class_label.value_or(-1), gt.get());
    return entry;
}

// Single-episode front end for the CLI `plan` verb and for replays. Rebuilds
// the task models from scratch, so everything is derivable from the config.
inline BenchEpisode run_single_episode(const nlohmann::json& cfg,
                                       const std::string& scene_spec,
                                       const std::string& strat_name,
                                       uint64_t scene_seed, uint64_t episode_seed,
                                       std::optional<int> forced_initial = {},
                                       const StepHook& on_step = {}) {
    const BenchPlan bp = build_bench_plan(cfg);
    const Scene scene = scene_by_name(scene_spec, scene_seed);
    std::shared_ptr<SceneGroundTruth> gt;
    if (bp.models.task == "heat" || bp.models.task == "reconstruction")
        gt = std::make_shared<SceneGroundTruth>(
            compute_ground_truth(scene, cfg, bp.models, scene_seed));
    const int initial =
        forced_initial ? *forced_initial
                       : resolve_initial_index(cfg, bp.pool.size(), episode_seed);
    return run_episode_cell(bp, scene, scene_spec, strat_name, scene_seed,
                            episode_seed, initial, gt, cfg, on_step);
}

inline BenchResult run_benchmark(const nlohmann::json& cfg, std::string out_dir = "",
                                 int threads_override = 0) {
    if (out_dir.empty()) out_dir = cfg.at("out_dir").get<std::string>();
    const BenchPlan bp = build_bench_plan(cfg, threads_override);
    const TaskModels& models = bp.models;

    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "episodes");

    const auto scenes = cfg.at("scenes").get<std::vector<std::string>>();
    const auto seeds = cfg.at("seeds").get<std::vector<uint64_t>>();
    const auto strategies = cfg.at("strategies").get<std::vector<std::string>>();
    const bool needs_gt =
        models.task == "heat" || models.task == "reconstruction";

    BenchResult result;
    std::string csv = csv_header() + "\n";
    for (size_t si = 0; si < scenes.size(); ++si) {
        for (uint64_t scene_seed : seeds) {
            const Scene scene = scene_by_name(scenes[si], scene_seed);
            const uint64_t episode_seed =
                episode_seed_of(scene_seed, static_cast<int>(si));
            std::shared_ptr<SceneGroundTruth> gt;
            if (needs_gt)
                gt = std::make_shared<SceneGroundTruth>(
                    compute_ground_truth(scene, cfg, models, scene_seed));
            const int initial =
                resolve_initial_index(cfg, bp.pool.size(), episode_seed);

            for (const std::string& strat_name : strategies) {
                BenchEpisode entry =
                    run_episode_cell(bp, scene, scenes[si], strat_name,
                                     scene_seed, episode_seed, initial, gt, cfg);
                for (const std::string& row : entry.csv_rows) csv += row + "\n";

                const std::string file_name =
                    episode_file_name(scenes[si], scene_seed, strat_name);
                nlohmann::json ep_json = episode_to_json(entry.episode);
                ep_json["metrics"] = entry.metrics;
                write_text_file((fs::path(out_dir) / "episodes" / file_name).string(),
                                ep_json.dump(2) + "\n");
                result.episodes.push_back(std::move(entry));
            }
        }
    }

    // ------------------------------------------------ aggregate + plots ----
    const int n_views = bp.plan.n_views;
    nlohmann::json per_strategy = nlohmann::json::object();
    std::vector<PlotSeries> plot;
    for (const std::string& strat : strategies) {
        nlohmann::json agg;
        std::vector<const BenchEpisode*> eps;
        for (const BenchEpisode& e : result.episodes)
            if (e.strategy == strat) eps.push_back(&e);
        agg["episodes"] = eps.size();
        int failed = 0;
        for (const auto* e : eps) failed += e->episode.failed ? 1 : 0;
        agg["failed"] = failed;

        PlotSeries series;
        series.label = strat;
        if (models.task == "classification") {
            std::vector<std::optional<int>> stable;
            std::vector<double> censored, first_censored;
            for (const auto* e : eps) {
                if (!e->metrics.contains("t_stable")) continue;
                stable.push_back(e->metrics["t_stable"].is_null()
                                     ? std::optional<int>()
                                     : std::optional<int>(
                                           e->metrics["t_stable"].get<int>()));
                censored.push_back(e->metrics["t_stable_censored"].get<double>());
                first_censored.push_back(e->metrics["t_first_censored"].get<double>());
            }
            agg["mean_t_stable_censored"] = detail::mean_of(censored);
            agg["mean_t_first_censored"] = detail::mean_of(first_censored);
            const auto curve = cumulative_hit_fraction(stable, n_views);
            for (int s = 0; s < n_views; ++s) {
                series.x.push_back(s + 1);
                series.y.push_back(curve[s]);
            }
        } else if (models.task == "segmentation") {
            nlohmann::json by_target = nlohmann::json::object();
            std::vector<std::optional<int>> at_cfg_target;
            for (double target : {20.0, 60.0, 100.0, models.n_target}) {
                const std::string key = detail::csv_num(target);
                std::vector<double> censored;
                std::vector<std::optional<int>> times;
                for (const auto* e : eps) {
                    const auto& disc = e->metrics["discovery"];
                    if (!disc.contains(key)) continue;
                    censored.push_back(disc[key + "_censored"].get<double>());
                    times.push_back(disc[key].is_null()
                                        ? std::optional<int>()
                                        : std::optional<int>(disc[key].get<int>()));
                }
                by_target[key] = detail::mean_of(censored);
                if (target == models.n_target) at_cfg_target = times;
            }
            agg["mean_discovery_censored"] = by_target;
            const auto curve = cumulative_hit_fraction(at_cfg_target, n_views);
            for (int s = 0; s < n_views; ++s) {
                series.x.push_back(s + 1);
                series.y.push_back(curve[s]);
            }
        } else if (models.task == "heat") {
            std::vector<double> final_errors;
            for (int s = 0; s < n_views; ++s) {
                std::vector<double> step_errors;
                for (const auto* e : eps) {
                    const auto errs =
                        e->metrics["coldest_error"].get<std::vector<double>>();
                    if (s < static_cast<int>(errs.size()) && std::isfinite(errs[s]))
                        step_errors.push_back(errs[s]);
                }
                series.x.push_back(s + 1);
                series.y.push_back(detail::mean_of(step_errors));
            }
            for (const auto* e : eps) {
                const auto errs =
                    e->metrics["coldest_error"].get<std::vector<double>>();
                if (!errs.empty() && std::isfinite(errs.back()))
                    final_errors.push_back(errs.back());
            }
            agg["mean_final_coldest_error"] = detail::mean_of(final_errors);
        } else if (models.task == "reconstruction") {
            for (int s = 0; s < n_views; ++s) {
                std::vector<double> step_cd;
                for (const auto* e : eps) {
                    const auto cds =
                        e->metrics["cloud_chamfer"].get<std::vector<double>>();
                    if (s < static_cast<int>(cds.size()) && std::isfinite(cds[s]))
                        step_cd.push_back(cds[s]);
                }
                series.x.push_back(s + 1);
                series.y.push_back(detail::mean_of(step_cd));
            }
            std::vector<double> mesh_cd;
            for (const auto* e : eps)
                if (e->metrics.contains("mesh_chamfer"))
                    mesh_cd.push_back(e->metrics["mesh_chamfer"].get<double>());
            agg["mean_mesh_chamfer"] = detail::mean_of(mesh_cd);
        }
        plot.push_back(std::move(series));
        per_strategy[strat] = std::move(agg);
    }

    nlohmann::json per_episode = nlohmann::json::array();
    for (const BenchEpisode& e : result.episodes)
        per_episode.push_back({{"scene", e.scene},
                               {"scene_seed", e.scene_seed},
                               {"strategy", e.strategy},
                               {"seed", e.episode.seed},
                               {"metrics", e.metrics}});

    result.summary = {{"task", models.task},
                      {"acquisition", models.acquisition},
                      {"n_views", n_views},
                      {"per_strategy", per_strategy},
                      {"per_episode", per_episode}};
    result.csv = csv;

    write_text_file((fs::path(out_dir) / "metrics.csv").string(), csv);
    write_text_file((fs::path(out_dir) / "summary.json").string(),
                    result.summary.dump(2) + "\n");
    const std::map<std::string, std::pair<std::string, std::string>> plot_names = {
        {"classification", {"stable_hit", "fraction of episodes stable-correct"}},
        {"segmentation", {"discovery", "fraction of episodes fully discovered"}},
        {"heat", {"coldest_error", "mean coldest-point error"}},
        {"reconstruction", {"chamfer", "mean cloud Chamfer distance"}}};
    const auto& [plot_file, y_label] = plot_names.at(models.task);
    write_text_file((fs::path(out_dir) / (plot_file + ".svg")).string(),
                    render_line_plot(models.task + " / " + models.acquisition,
                                     "views", y_label, plot));
    return result;
}

// ---------------------------------------------------------------- replay ----

struct ReplayReport {
    bool record_match = false;  // steps (minus timing), failure flag, metrics
    bool csv_checked = false;
    bool csv_match = false;
    std::string mismatch;  // first difference, for diagnostics
    BenchEpisode replayed;
};

// Re-run a stored episode from its embedded config and verify the record
// reproduces. `stored_csv_path` optionally points at a benchmark metrics.csv
// whose rows for this episode must match the regenerated ones byte for byte.
inline ReplayReport replay_episode(const nlohmann::json& stored,
                                   const std::string& stored_csv_path = "") {
    for (const char* key : {"format", "strategy", "seed", "steps", "config"})
        if (!stored.contains(key))
            throw ConfigError(std::string("episode record lacks '") + key + "'");
    if (stored["format"] != "nbv_episode_v1")
        throw ConfigError("unknown episode format");
    const nlohmann::json& meta = stored["config"];
    for (const char* key : {"benchmark", "scene_spec", "scene_seed"})
        if (!meta.contains(key))
            throw ConfigError(std::string("episode config lacks '") + key + "'");

    const nlohmann::json cfg = resolve_config(meta["benchmark"]);
    const std::string scene_spec = meta["scene_spec"].get<std::string>();
    const std::string strat_name = stored["strategy"].get<std::string>();
    const uint64_t scene_seed = meta["scene_seed"].get<uint64_t>();
    const uint64_t episode_seed = stored["seed"].get<uint64_t>();
    std::optional<int> forced;
    if (meta.contains("initial_index")) forced = meta["initial_index"].get<int>();

    ReplayReport report;
    report.replayed = run_single_episode(cfg, scene_spec, strat_name, scene_seed,
                                         episode_seed, forced);

    // Wall times are the one legitimately nondeterministic field.
    const auto strip_timing = [](nlohmann::json steps) {
        for (auto& s : steps) s.erase("wall_ms");
        return steps;
    };
    const nlohmann::json replayed_json = episode_to_json(report.replayed.episode);
    const nlohmann::json want = strip_timing(stored["steps"]);
    const nlohmann::json got = strip_timing(replayed_json["steps"]);
    report.record_match = true;
    if (want != got) {
        report.record_match = false;
        for (size_t i = 0; i < std::min(want.size(), got.size()); ++i)
            if (want[i] != got[i]) {
                report.mismatch = "step " + std::to_string(i + 1) + " differs";
                break;
            }
        if (report.mismatch.empty()) report.mismatch = "step counts differ";
    } else if (stored["failed"] != replayed_json["failed"]) {
        report.record_match = false;
        report.mismatch = "failure flags differ";
    } else if (stored.contains("metrics") &&
               stored["metrics"] != report.replayed.metrics) {
        report.record_match = false;
        report.mismatch = "derived metrics differ";
    }

    if (!stored_csv_path.empty()) {
        report.csv_checked = true;
        std::ifstream f(stored_csv_path);
        if (!f) throw ConfigError("cannot open CSV: " + stored_csv_path);
        const std::string prefix = scene_spec + "," + std::to_string(scene_seed) +
                                   "," + strat_name + ",";
        std::vector<std::string> want_rows;
        std::string line;
        while (std::getline(f, line))
            if (line.rfind(prefix, 0) == 0) want_rows.push_back(line);
        report.csv_match = want_rows == report.replayed.csv_rows;
        if (!report.csv_match && report.mismatch.empty())
            report.mismatch = "stored CSV rows differ from regenerated rows";
    }
    return report;
}

}  // namespace nbv
