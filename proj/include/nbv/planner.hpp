#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nbv/acquisition.hpp"
#include "nbv/camera.hpp"
#include "nbv/common.hpp"
#include "nbv/gp.hpp"
#include "nbv/point_cloud.hpp"
#include "nbv/scanner.hpp"
#include "nbv/scene.hpp"

namespace nbv {

enum class Strategy { bayes_discrete, bayes_refine, fps, uncertainty, random };

inline const std::vector<std::string>& strategy_names() {
    static const std::vector<std::string> names = {"bayes_discrete", "bayes_refine",
                                                   "fps", "uncertainty", "random"};
    return names;
}

inline std::string to_string(Strategy s) { return strategy_names()[static_cast<int>(s)]; }

inline Strategy strategy_from_name(const std::string& name) {
    const auto& names = strategy_names();
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<Strategy>(i);
    throw ConfigError("unknown strategy: " + name);
}

// Scores one candidate pose against the shared per-step posterior samples.
// May throw InsufficientPoints / EmptyPrediction to mean "skip me".
using AcqScorer = std::function<double(const CameraPose&, const std::vector<FieldSample>&,
                                       const OrientedPointCloud&, uint64_t)>;

// Task observer run on the cumulative cloud after every real scan; its JSON
// lands in the step record (predictions, counts, coldest point, ...).
using TaskProbe = std::function<nlohmann::json(const OrientedPointCloud&)>;

struct PlannerState {
    std::vector<CameraPose> pool;
    std::vector<char> used;   // pool mask, grows with chosen
    std::vector<int> chosen;  // pool indices in selection order
    OrientedPointCloud cloud;
    std::optional<PosteriorField> posterior;
    int step = 0;  // number of real scans taken

    explicit PlannerState(std::vector<CameraPose> candidates)
        : pool(std::move(candidates)), used(pool.size(), 0) {
        if (pool.empty()) throw ConfigError("planner needs a non-empty candidate pool");
    }

    void mark_chosen(int index) {
        used[index] = 1;
        chosen.push_back(index);
    }
    int n_unchosen() const {
        int n = 0;
        for (char u : used)
            if (!u) ++n;
        return n;
    }
};

constexpr double kInvalidScore = -std::numeric_limits<double>::infinity();

// Alg. core: draw the sample set once, score every unchosen candidate with
// it (common random numbers), return the argmax with lowest-index ties.
// Scores come back in pool order, one per unchosen candidate.
inline std::pair<int, std::vector<double>> plan_next_view_discrete(
    const PlannerState& state, const AcqScorer& scorer,
    const std::vector<FieldSample>& fields, uint64_t seed) {
    if (state.n_unchosen() == 0)
        throw AllCandidatesInvalid("candidate pool exhausted");
    std::vector<double> scores;
    scores.reserve(state.n_unchosen());
    int best_index = -1;
    double best_score = kInvalidScore;
    for (size_t i = 0; i < state.pool.size(); ++i) {
        if (state.used[i]) continue;
        double score = kInvalidScore;
        try {
            score = scorer(state.pool[i], fields, state.cloud, seed);
        } catch (const InsufficientPoints&) {
        } catch (const EmptyPrediction&) {
        }
        scores.push_back(score);
        if (score > best_score && std::isfinite(score)) {
            best_score = score;
            best_index = static_cast<int>(i);
        }
    }
    if (best_index < 0)
        throw AllCandidatesInvalid("every candidate errored or scored -inf");
    return {best_index, std::move(scores)};
}

inline std::pair<int, std::vector<double>> plan_next_view_discrete(
    const PlannerState& state, const AcqScorer& scorer, int n_samples, uint64_t seed) {
    if (!state.posterior) throw ConfigError("discrete planning needs a posterior");
    return plan_next_view_discrete(
        state, scorer, draw_posterior_fields(*state.posterior, n_samples, seed), seed);
}

// Derivative-free pattern search over (azimuth, elevation) at the pose's
// radius: multi-start, 4 axis neighbors per iteration, halve the step when
// no neighbor improves. Returns the best pose seen across all starts.
inline CameraPose refine_local(const CameraPose& pose,
                               const std::function<double(const CameraPose&)>& evaluate,
                               int n_starts = 6, int n_iters = 20,
                               double step0 = 0.35) {
    if (n_starts < 1) throw ConfigError("refine_local needs n_starts >= 1");
    const double radius = pose.position.norm();
    constexpr double kElMax = 0.5 * M_PI - 1e-3;

    std::vector<std::pair<double, double>> starts;
    starts.push_back(angles_of(pose));
    if (n_starts > 1)
        for (const CameraPose& p : fibonacci_candidates(n_starts - 1, radius))
            starts.push_back(angles_of(p));

    double best_score = -std::numeric_limits<double>::infinity();
    std::pair<double, double> best_angles = starts[0];
    for (const auto& start : starts) {
        double az = start.first;
        double el = std::clamp(start.second, -kElMax, kElMax);
        double cur = evaluate(pose_from_angles(az, el, radius));
        if (cur > best_score) {
            best_score = cur;
            best_angles = {az, el};
        }
        double step = step0;
        for (int it = 0; it < n_iters; ++it) {
            double nbr_best = cur;
            double nbr_az = az, nbr_el = el;
            const double moves[4][2] = {{step, 0}, {-step, 0}, {0, step}, {0, -step}};
            for (const double* mv : moves) {
                const double a = az + mv[0];
                const double e = std::clamp(el + mv[1], -kElMax, kElMax);
                const double v = evaluate(pose_from_angles(a, e, radius));
                if (v > nbr_best) {
                    nbr_best = v;
                    nbr_az = a;
                    nbr_el = e;
                }
            }
            if (nbr_best > cur) {
                cur = nbr_best;
                az = nbr_az;
                el = nbr_el;
            } else {
                step *= 0.5;
            }
            if (cur > best_score) {
                best_score = cur;
                best_angles = {az, el};
            }
        }
    }
    return pose_from_angles(best_angles.first, best_angles.second, radius);
}

// Coverage baseline: farthest unchosen candidate from the chosen cameras
// (Euclidean in R^3; equivalent ordering to arc distance on a shared sphere).
inline std::pair<int, std::vector<double>> baseline_fps(const PlannerState& state) {
    if (state.chosen.empty()) throw ConfigError("fps needs at least one chosen pose");
    std::vector<double> scores;
    int best_index = -1;
    double best = -1;
    for (size_t i = 0; i < state.pool.size(); ++i) {
        if (state.used[i]) continue;
        double d_min = std::numeric_limits<double>::infinity();
        for (int j : state.chosen)
            d_min = std::min(d_min,
                             (state.pool[i].position - state.pool[j].position).norm());
        scores.push_back(d_min);
        if (d_min > best) {
            best = d_min;
            best_index = static_cast<int>(i);
        }
    }
    if (best_index < 0) throw AllCandidatesInvalid("candidate pool exhausted");
    return {best_index, std::move(scores)};
}

// Geometric-uncertainty baseline: maximum posterior variance over equispaced
// points where the candidate's principal ray crosses the modeling cube.
inline std::pair<int, std::vector<double>> baseline_uncertainty(
    const PlannerState& state, int n_ray_samples = 32) {
    if (!state.posterior) throw ConfigError("uncertainty baseline needs a posterior");
    std::vector<double> scores;
    int best_index = -1;
    double best = kInvalidScore;
    for (size_t i = 0; i < state.pool.size(); ++i) {
        if (state.used[i]) continue;
        const auto [origin, dir] = principal_ray(state.pool[i]);
        double t0 = 0, t1 = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) {
            if (std::abs(dir[a]) < 1e-15) {
                if (std::abs(origin[a]) > kDomainHalf) t1 = -1;
                continue;
            }
            double lo = (-kDomainHalf - origin[a]) / dir[a];
            double hi = (kDomainHalf - origin[a]) / dir[a];
            if (lo > hi) std::swap(lo, hi);
            t0 = std::max(t0, lo);
            t1 = std::min(t1, hi);
        }
        double score = kInvalidScore;
        if (t0 < t1) {
            std::vector<Vec3> probes;
            probes.reserve(n_ray_samples);
            for (int k = 0; k < n_ray_samples; ++k) {
                const double t = t0 + (t1 - t0) * (k + 0.5) / n_ray_samples;
                probes.push_back(origin + t * dir);
            }
            score = state.posterior->posterior_variance(probes).maxCoeff();
        }
        scores.push_back(score);
        if (score > best && std::isfinite(score)) {
            best = score;
            best_index = static_cast<int>(i);
        }
    }
    if (best_index < 0) throw AllCandidatesInvalid("no candidate ray crosses the domain");
    return {best_index, std::move(scores)};
}

inline int baseline_random(const PlannerState& state, uint64_t seed) {
    const int n = state.n_unchosen();
    if (n == 0) throw AllCandidatesInvalid("candidate pool exhausted");
    Rng rng(mix_seed(seed, 0xd1ce));
    int pick = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n)));
    for (size_t i = 0; i < state.pool.size(); ++i) {
        if (state.used[i]) continue;
        if (pick-- == 0) return static_cast<int>(i);
    }
    throw std::logic_error("unreachable");
}

// ------------------------------------------------------------- episodes ----

struct PlanConfig {
    ScanConfig scan;
    std::vector<CameraPose> pool;
    PriorBasis basis;
    GpOptions gp;
    int n_samples = 16;      // posterior draws per planning step
    int n_views = 5;         // total views incl. the initial scan
    int initial_index = 0;   // theta_1 = pool[initial_index]
    int refine_starts = 6;   // bayes_refine pattern search
    int refine_iters = 20;
    double refine_step0 = 0.35;
    int threads = 1;
};

struct StepRecord {
    int step = 0;  // 1-indexed view number
    CameraPose pose;
    int pose_index = -1;          // pool index, -1 for refined poses
    std::vector<double> scores;   // per unchosen candidate, pool order
    nlohmann::json task;          // task probe output (null if no probe)
    int cloud_size = 0;
    double wall_ms = 0;
};

struct Episode {
    std::string scene_name;
    std::string strategy;
    uint64_t seed = 0;
    nlohmann::json config;  // resolved snapshot, filled by the harness
    std::vector<StepRecord> steps;
    bool failed = false;
    std::string failure;
};

inline nlohmann::json pose_to_json(const CameraPose& pose) {
    return {{"position", {pose.position.x(), pose.position.y(), pose.position.z()}},
            {"look_at", {pose.look_at.x(), pose.look_at.y(), pose.look_at.z()}}};
}

inline CameraPose pose_from_json(const nlohmann::json& j) {
    const auto p = j.at("position").get<std::vector<double>>();
    const auto l = j.at("look_at").get<std::vector<double>>();
    if (p.size() != 3 || l.size() != 3) throw ConfigError("pose arrays must have 3 entries");
    return CameraPose{Vec3(p[0], p[1], p[2]), Vec3(l[0], l[1], l[2])};
}

inline nlohmann::json episode_to_json(const Episode& e) {
    nlohmann::json steps = nlohmann::json::array();
    for (const StepRecord& s : e.steps) {
        nlohmann::json js = {{"step", s.step},
                             {"pose", pose_to_json(s.pose)},
                             {"pose_index", s.pose_index},
                             {"scores", s.scores},
                             {"task", s.task},
                             {"cloud_size", s.cloud_size},
                             {"wall_ms", s.wall_ms}};
        steps.push_back(std::move(js));
    }
    return {{"format", "nbv_episode_v1"}, {"scene", e.scene_name},
            {"strategy", e.strategy},     {"seed", e.seed},
            {"config", e.config},         {"failed", e.failed},
            {"failure", e.failure},       {"steps", std::move(steps)}};
}

namespace detail {

// Seed streams: real scans depend only on (episode seed, step) so paired
// strategies share them; sample draws use the documented step xor pattern.
inline uint64_t scan_seed(uint64_t episode_seed, int step) {
    return mix_seed(episode_seed, static_cast<uint64_t>(step), 0x5ca0);
}
inline uint64_t step_seed(uint64_t episode_seed, int step) {
    return episode_seed ^ (static_cast<uint64_t>(step) * 65537ull);
}

}  // namespace detail

// Full NBV loop: initial scan from pool[initial_index], then N-1 rounds of
// recondition -> select (strategy) -> real scan against the true scene. The
// task probe runs after every real scan. A step error aborts the episode,
// which is returned flagged failed with the partial record intact.
inline Episode run_episode(const Scene& scene, Strategy strategy,
                           const AcqScorer& scorer, const TaskProbe& probe,
                           const PlanConfig& cfg, uint64_t seed,
                           std::optional<PlannerState>* final_state = nullptr) {
    if (cfg.n_views < 1) throw ConfigError("episode needs n_views >= 1");
    if (cfg.initial_index < 0 ||
        cfg.initial_index >= static_cast<int>(cfg.pool.size()))
        throw ConfigError("initial view index outside the candidate pool");
    if ((strategy == Strategy::bayes_discrete || strategy == Strategy::bayes_refine) &&
        !scorer)
        throw ConfigError("bayes strategies need an acquisition scorer");

    Episode episode;
    episode.scene_name = scene.name;
    episode.strategy = to_string(strategy);
    episode.seed = seed;

    PlannerState state(cfg.pool);
    const auto record_scan = [&](int step, const CameraPose& pose, int pose_index,
                                 std::vector<double> scores,
                                 std::chrono::steady_clock::time_point t0) {
        state.cloud.append(
            scan(scene, pose, cfg.scan, detail::scan_seed(seed, step), cfg.threads));
        state.step = step;
        state.posterior.emplace(
            condition(cfg.basis, state.cloud, cfg.gp.sigma_v, cfg.gp.sigma_n, cfg.gp));

        StepRecord rec;
        rec.step = step;
        rec.pose = pose;
        rec.pose_index = pose_index;
        rec.scores = std::move(scores);
        rec.cloud_size = static_cast<int>(state.cloud.size());
        if (probe) rec.task = probe(state.cloud);
        rec.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        episode.steps.push_back(std::move(rec));
    };

    try {
        auto t0 = std::chrono::steady_clock::now();
        state.mark_chosen(cfg.initial_index);
        record_scan(1, cfg.pool[cfg.initial_index], cfg.initial_index, {}, t0);

        for (int step = 2; step <= cfg.n_views; ++step) {
            t0 = std::chrono::steady_clock::now();
            const uint64_t s_seed = detail::step_seed(seed, step);
            int index = -1;
            std::vector<double> scores;
            CameraPose pose;
            switch (strategy) {
                case Strategy::bayes_discrete: {
                    std::tie(index, scores) =
                        plan_next_view_discrete(state, scorer, cfg.n_samples, s_seed);
                    pose = state.pool[index];
                    break;
                }
                case Strategy::bayes_refine: {
                    const std::vector<FieldSample> fields =
                        draw_posterior_fields(*state.posterior, cfg.n_samples, s_seed);
                    std::tie(index, scores) =
                        plan_next_view_discrete(state, scorer, fields, s_seed);
                    pose = refine_local(
                        state.pool[index],
                        [&](const CameraPose& p) {
                            try {
                                return scorer(p, fields, state.cloud, s_seed);
                            } catch (const InsufficientPoints&) {
                            } catch (const EmptyPrediction&) {
                            }
                            return kInvalidScore;
                        },
                        cfg.refine_starts, cfg.refine_iters, cfg.refine_step0);
                    break;
                }
                case Strategy::fps:
                    std::tie(index, scores) = baseline_fps(state);
                    pose = state.pool[index];
                    break;
                case Strategy::uncertainty:
                    std::tie(index, scores) = baseline_uncertainty(state);
                    pose = state.pool[index];
                    break;
                case Strategy::random:
                    index = baseline_random(state, s_seed);
                    pose = state.pool[index];
                    break;
            }
            state.mark_chosen(index);
            const int recorded_index = (strategy == Strategy::bayes_refine) ? -1 : index;
            record_scan(step, pose, recorded_index, std::move(scores), t0);
        }
    } catch (const std::exception& err) {
        episode.failed = true;
        episode.failure = err.what();
    }
    if (final_state) *final_state = std::move(state);
    return episode;
}

}  // namespace nbv
