// Release gate. Each criterion below is a self-contained check with its
// tolerances pinned in code; the binary prints one PASS/FAIL line per
// criterion plus indented diagnostics, and exits nonzero if anything fails.
//
//   ./acceptance        run every criterion
//   ./acceptance 4      run criterion 4 only
//
// The statistical checks (1, 2) use fixed seeds, so their 3-sigma bounds are
// regression tests rather than flaky coin flips. The benchmark criteria
// (6-9) run the real pipeline end to end and take minutes, not seconds.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nbv/bench.hpp"

namespace fs = std::filesystem;
using namespace nbv;

namespace {

bool expect(bool ok, const std::string& what) {
    if (!ok) std::printf("    FAILED: %s\n", what.c_str());
    return ok;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("nbv_accept_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(NBV_CLI_BIN) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

double mean_of(const std::vector<double>& v) {
    double acc = 0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / v.size();
}

// One-sided exact sign test: P[X >= wins] for X ~ Binomial(wins + losses, 1/2).
// Ties are dropped before calling.
double sign_test_p(int wins, int losses) {
    const int n = wins + losses;
    if (n == 0) return 1.0;
    double p = 0;
    for (int k = wins; k <= n; ++k) {
        const double log_c = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                             std::lgamma(n - k + 1.0);
        p += std::exp(log_c - n * std::log(2.0));
    }
    return p;
}

struct PairedStats {
    double mean_a = 0, mean_b = 0;
    int wins = 0, losses = 0, ties = 0;
    double p = 1.0;  // one-sided: a beats b more often than chance
};

// a and b are paired per index (same scene, same seed); lower is better.
PairedStats compare_paired(const std::vector<double>& a, const std::vector<double>& b) {
    PairedStats s;
    s.mean_a = mean_of(a);
    s.mean_b = mean_of(b);
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i])
            ++s.wins;
        else if (a[i] > b[i])
            ++s.losses;
        else
            ++s.ties;
    }
    s.p = sign_test_p(s.wins, s.losses);
    return s;
}

// ---------------------------------------------------------------------------
// 1. Conditioning matches a dense Gaussian oracle, and pathwise samples have
//    the exact posterior moments.
// ---------------------------------------------------------------------------

bool gp_conditioning_oracle() {
    const double kMomentTol = 1e-6;
    PriorBasis basis = build_prior(0.35, 0.2, 2);
    const Eigen::Index d = static_cast<Eigen::Index>(basis.feature_dim());
    std::printf("    feature dim %d\n", static_cast<int>(d));
    bool ok = expect(d <= 200, "oracle check needs feature dim <= 200");

    // 40 observations on a small sphere, outward normals.
    OrientedPointCloud cloud;
    for (const CameraPose& c : fibonacci_candidates(40, 1.0)) {
        const Vec3 n = c.position.normalized();
        cloud.positions.push_back(0.55 * n);
        cloud.normals.push_back(n);
    }
    GpOptions opts;
    const PosteriorField post = condition(basis, cloud, opts.sigma_v, opts.sigma_n, opts);

    // Independent oracle: rebuild the whitened observation rows, then condition
    // in observation space instead of weight space. With B = N^{-1/2} Phi,
    // z = N^{-1/2}(y - m) and G = I + B B^T:
    //   mean(x) = m + phi^T B^T G^{-1} z
    //   var(x)  = phi^T phi - (B phi)^T G^{-1} (B phi)
    const Eigen::Index n_obs = static_cast<Eigen::Index>(cloud.size());
    MatX b(4 * n_obs, d);
    VecX z(4 * n_obs);
    VecX vrow(d);
    MatX grow(3, d);
    for (Eigen::Index i = 0; i < n_obs; ++i) {
        const Vec3& x = cloud.positions[i];
        basis.feature_row(x, vrow);
        b.row(4 * i) = vrow / opts.sigma_v;
        z[4 * i] = (0.0 - opts.mean_offset) / opts.sigma_v;
        basis.gradient_rows(x, grow);
        const Vec3 target = -opts.gradient_scale * cloud.normals[i];
        for (int j = 0; j < 3; ++j) {
            b.row(4 * i + 1 + j) = grow.row(j) / opts.sigma_n;
            z[4 * i + 1 + j] = target[j] / opts.sigma_n;
        }
    }
    MatX g = MatX::Identity(4 * n_obs, 4 * n_obs);
    g += b * b.transpose();
    Eigen::LDLT<MatX> g_ldlt(g);

    Rng rng(31);
    std::vector<Vec3> probes;
    for (int i = 0; i < 5; ++i)
        probes.push_back(rng.uniform_in_box(Vec3(-0.9, -0.9, -0.9), Vec3(0.9, 0.9, 0.9)));

    std::vector<double> exact_mean(5), exact_var(5);
    double worst_mean = 0, worst_var = 0;
    for (int i = 0; i < 5; ++i) {
        basis.feature_row(probes[i], vrow);
        const VecX bphi = b * vrow;
        exact_mean[i] = opts.mean_offset + bphi.dot(g_ldlt.solve(z));
        exact_var[i] = vrow.dot(vrow) - bphi.dot(g_ldlt.solve(bphi));
        worst_mean = std::max(worst_mean,
                              std::abs(post.posterior_mean_at(probes[i]) - exact_mean[i]));
        worst_var = std::max(worst_var,
                             std::abs(post.posterior_variance_at(probes[i]) - exact_var[i]));
    }
    std::printf("    max |mean - oracle| %s, max |var - oracle| %s\n",
                fmt(worst_mean).c_str(), fmt(worst_var).c_str());
    ok &= expect(worst_mean <= kMomentTol, "posterior mean vs dense oracle");
    ok &= expect(worst_var <= kMomentTol, "posterior variance vs dense oracle");

    // Pathwise samples: empirical moments of 2000 draws stay inside 3-sigma
    // Monte-Carlo bounds around the exact moments at every probe.
    const int kDraws = 2000;
    std::vector<double> acc(5, 0.0), acc2(5, 0.0);
    for (int s = 0; s < kDraws; ++s) {
        const FieldSample f = post.sample(700 + static_cast<uint64_t>(s));
        for (int i = 0; i < 5; ++i) {
            const double v = f.value(probes[i]);
            acc[i] += v;
            acc2[i] += v * v;
        }
    }
    for (int i = 0; i < 5; ++i) {
        const double m_hat = acc[i] / kDraws;
        const double v_hat =
            (acc2[i] - kDraws * m_hat * m_hat) / (kDraws - 1);
        const double sd = std::sqrt(std::max(exact_var[i], 0.0));
        const double mean_bound = 3.0 * sd / std::sqrt(double(kDraws));
        const double var_bound =
            3.0 * exact_var[i] * std::sqrt(2.0 / (kDraws - 1));
        ok &= expect(std::abs(m_hat - exact_mean[i]) <= mean_bound,
                     "sample mean at probe " + std::to_string(i) + ": |" +
                         fmt(m_hat - exact_mean[i]) + "| > " + fmt(mean_bound));
        ok &= expect(std::abs(v_hat - exact_var[i]) <= var_bound,
                     "sample variance at probe " + std::to_string(i) + ": |" +
                         fmt(v_hat - exact_var[i]) + "| > " + fmt(var_bound));
    }
    return ok;
}

// ---------------------------------------------------------------------------
// 2. The Monte-Carlo improvement estimator agrees with the closed form on a
//    Gaussian stub utility.
// ---------------------------------------------------------------------------

bool eui_matches_closed_form() {
    const int kSamples = 10000;
    Rng rng(2026);
    bool ok = true;
    double worst_ratio = 0;
    for (int t = 0; t < 20; ++t) {
        const double mu = rng.uniform(-2.0, 2.0);
        const double sigma = rng.uniform(0.05, 2.0);
        // Keep the clipped mass non-degenerate so the CLT bound is meaningful.
        const double y_best = mu - sigma * rng.uniform(-2.5, 3.0);
        const uint64_t seed = mix_seed(900, t);
        const auto sim = [&](uint64_t s_seed, int) {
            return mu + sigma * Rng(mix_seed(s_seed, 0x6a11)).gauss();
        };
        const double est = eui_core(kSamples, seed, y_best, sim);

        // Sample standard deviation of the clipped improvements (same draws).
        double m = 0, m2 = 0;
        for (int s = 0; s < kSamples; ++s) {
            const double v =
                std::max(0.0, sim(seed ^ static_cast<uint64_t>(s), s) - y_best);
            m += v;
            m2 += v * v;
        }
        m /= kSamples;
        const double var = std::max(0.0, m2 / kSamples - m * m);
        const double bound = 3.0 * std::sqrt(var / kSamples) + 1e-12;
        const double exact = expected_improvement_closed_form(mu, sigma, y_best);
        const double err = std::abs(est - exact);
        worst_ratio = std::max(worst_ratio, err / bound);
        ok &= expect(err <= bound, "triple " + std::to_string(t) + ": |" + fmt(est) +
                                       " - " + fmt(exact) + "| > " + fmt(bound));
    }
    std::printf("    20 triples, S=%d, worst |err|/bound %s\n", kSamples,
                fmt(worst_ratio).c_str());
    return ok;
}

// ---------------------------------------------------------------------------
// 3. Task utilities hit their pinned values.
// ---------------------------------------------------------------------------

// Classifier stand-in whose prediction never moves: the expected cross
// entropy then collapses to the entropy of its fixed distribution.
struct ConstClassifier {
    ClassDistribution p;
    ClassDistribution classify(const OrientedPointCloud&) const { return p; }
};

bool task_utility_values() {
    bool ok = true;

    // Negated entropy of the uniform 5-class distribution is exactly -ln 5
    // (-1.6094379...; quoting it as -1.60944 is a 6-figure rounding).
    const double u_ent = utility_entropy(ClassDistribution(VecX::Constant(5, 0.2)));
    std::printf("    entropy(uniform 5) %s vs -ln 5 %s\n", fmt(u_ent).c_str(),
                fmt(-std::log(5.0)).c_str());
    ok &= expect(std::abs(u_ent - (-std::log(5.0))) <= 1e-6,
                 "uniform-5 entropy utility");

    // Exactly N_target hard points of one class saturate that class's soft
    // count at tanh(1); the untouched classes contribute tanh(0) = 0.
    const double n_target = 7;
    std::vector<ClassDistribution> dists(7, ClassDistribution{1.0, 0.0, 0.0});
    const double u_soft = utility_softcount(dists, n_target, 3);
    std::printf("    softcount at N_target %s vs tanh(1) %s\n", fmt(u_soft).c_str(),
                fmt(std::tanh(1.0)).c_str());
    ok &= expect(std::abs(u_soft - std::tanh(1.0)) <= 1e-9,
                 "softcount saturation at N_target");

    // Self-consistency: if the classifier never changes its mind, the
    // expected cross entropy equals the entropy of the current prediction.
    ConstClassifier clf{ClassDistribution{0.5, 0.2, 0.3}};
    PriorBasis basis = build_prior(0.4, 0.25, 1);
    basis.grid_n = 32;
    std::vector<FieldSample> fields;
    for (int s = 0; s < 3; ++s) fields.push_back(sample_prior(basis, 7 + s));
    OrientedPointCloud d_t;
    d_t.positions = {Vec3(0.3, 0, 0), Vec3(0, 0.3, 0), Vec3(0, 0, 0.3)};
    d_t.normals = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    ScanConfig sc;
    sc.res_w = sc.res_h = 12;
    const CameraPose pose = pose_from_angles(0.5, -0.4, 2.5);
    const double alpha = cross_entropy_over_samples(clf, fields, d_t, pose, sc, 11);
    double h = 0;
    for (double p : {0.5, 0.2, 0.3}) h -= p * std::log(p);
    std::printf("    frozen-classifier cross entropy %s vs entropy %s\n",
                fmt(alpha).c_str(), fmt(h).c_str());
    ok &= expect(std::abs(alpha - h) <= 1e-9, "cross-entropy self-consistency");
    return ok;
}

// ---------------------------------------------------------------------------
// 4. Graph heat diffusion: Laplacian structure, maximum principle, and the
//    implicit Euler convergence order.
// ---------------------------------------------------------------------------

bool heat_diffusion_properties() {
    bool ok = true;
    Rng rng(44);

    // L 1 = 0 exactly: the diagonal is the negative float sum of its row's
    // off-diagonal weights in index order, so folding the off-diagonals first
    // and adding the diagonal last must cancel bit-for-bit. (A plain matrix
    // product folds the diagonal mid-stream and keeps a 1-ulp residue, which
    // is not the invariant.)
    int inexact_rows = 0;
    double worst_eig = -1e300, worst_asym = 0;
    for (int t = 0; t < 20; ++t) {
        std::vector<Vec3> pts;
        for (int i = 0; i < 50; ++i)
            pts.push_back(rng.uniform_in_box(Vec3(-1, -1, -1), Vec3(1, 1, 1)));
        const GraphLaplacian g = knn_graph_laplacian(pts, 8);
        for (int i = 0; i < 50; ++i) {
            double off = 0, diag = 0;
            for (SpMat::InnerIterator it(g.laplacian, i); it; ++it)
                (it.row() == i ? diag : off) += it.value();  // symmetric: col = row
            if (off + diag != 0.0) ++inexact_rows;
        }
        const MatX l = MatX(g.laplacian);
        worst_asym = std::max(worst_asym, (l - l.transpose()).cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<MatX> es(l, Eigen::EigenvaluesOnly);
        worst_eig = std::max(worst_eig, es.eigenvalues().maxCoeff());
    }
    std::printf("    inexact row sums %d/1000, max eigenvalue %s, max |L - L^T| %s\n",
                inexact_rows, fmt(worst_eig).c_str(), fmt(worst_asym).c_str());
    ok &= expect(inexact_rows == 0, "L 1 = 0 exactly");
    ok &= expect(worst_eig <= 1e-10, "L negative semidefinite");
    ok &= expect(worst_asym == 0.0, "L symmetric");

    // Source-free maximum principle: without injection the temperature stays
    // inside the initial range.
    int principle_failures = 0;
    for (int t = 0; t < 100; ++t) {
        std::vector<Vec3> pts;
        for (int i = 0; i < 30; ++i)
            pts.push_back(rng.uniform_in_box(Vec3(-1, -1, -1), Vec3(1, 1, 1)));
        HeatConfig hc;
        hc.h = 0.05;
        hc.total_time = 0.4;
        hc.k_neighbors = 6;
        hc.u0_per_point.resize(30);
        for (double& u : hc.u0_per_point) u = rng.uniform(-1.0, 2.0);
        const double lo =
            *std::min_element(hc.u0_per_point.begin(), hc.u0_per_point.end());
        const double hi =
            *std::max_element(hc.u0_per_point.begin(), hc.u0_per_point.end());
        const GraphLaplacian g = knn_graph_laplacian(pts, hc.k_neighbors);
        const VecX u = heat_solve(pts, g, hc);
        if (u.minCoeff() < lo - 1e-9 || u.maxCoeff() > hi + 1e-9) ++principle_failures;
    }
    std::printf("    maximum principle: %d/100 trials violated\n", principle_failures);
    ok &= expect(principle_failures == 0, "source-free maximum principle");

    // Implicit Euler is first order: halving h should roughly halve the error
    // against the exact semigroup solution exp(T L) u0.
    for (int t = 0; t < 3; ++t) {
        std::vector<Vec3> pts;
        for (int i = 0; i < 40; ++i)
            pts.push_back(rng.uniform_in_box(Vec3(-1, -1, -1), Vec3(1, 1, 1)));
        const GraphLaplacian g = knn_graph_laplacian(pts, 8);
        Eigen::SelfAdjointEigenSolver<MatX> es(MatX(g.laplacian));
        VecX u0(40);
        for (Eigen::Index i = 0; i < 40; ++i) u0[i] = rng.uniform(0.0, 1.0);

        const double kT = 0.2;
        const VecX u_exact =
            es.eigenvectors() *
            ((es.eigenvalues().array() * kT).exp() *
             (es.eigenvectors().transpose() * u0).array())
                .matrix();
        const auto solve_error = [&](double h) {
            HeatConfig hc;
            hc.h = h;
            hc.total_time = kT;
            hc.k_neighbors = 8;
            hc.u0_per_point.assign(u0.data(), u0.data() + u0.size());
            return (heat_solve(pts, g, hc) - u_exact).norm();
        };
        const double ratio = solve_error(0.02) / solve_error(0.01);
        std::printf("    Richardson halving factor %s\n", fmt(ratio).c_str());
        ok &= expect(ratio >= 1.5 && ratio <= 2.5,
                     "halving factor outside [1.5, 2.5]");
    }
    return ok;
}

// ---------------------------------------------------------------------------
// 5. Scanner geometry: per-ray depth against the analytic sphere
//    intersection, and the candidate lattice layout.
// ---------------------------------------------------------------------------

bool scanner_geometry() {
    bool ok = true;
    const Scene scene = make_sphere_scene(1.0);
    const CameraPose pose = pose_from_angles(0.7, 0.3, 2.5);
    ScanConfig cfg;  // 30 deg fov, 50x50, zero noise
    const OrientedPointCloud cloud = scan(scene, pose, cfg, 5);
    std::printf("    %d/2500 rays hit\n", static_cast<int>(cloud.size()));
    ok &= expect(cloud.size() == 2500, "every ray of the 50x50 scan hits");

    // Each returned point lies on its pixel ray, so the analytic depth is the
    // near root of |o + t d| = 1.
    double worst_depth = 0;
    for (const Vec3& p : cloud.positions) {
        const Vec3 to_p = p - pose.position;
        const double depth = to_p.norm();
        const Vec3 d = to_p / depth;
        const double b = d.dot(pose.position);
        const double disc = b * b - (pose.position.squaredNorm() - 1.0);
        if (!expect(disc > 0, "ray misses the sphere analytically")) return false;
        const double t = -b - std::sqrt(disc);
        worst_depth = std::max(worst_depth, std::abs(depth - t));
    }
    std::printf("    max per-ray depth error %s\n", fmt(worst_depth).c_str());
    ok &= expect(worst_depth < 1e-4, "per-ray depth vs analytic intersection");

    const std::vector<CameraPose> pool = fibonacci_candidates(120, 2.5);
    double worst_norm = 0, min_angle = 1e300;
    for (size_t i = 0; i < pool.size(); ++i) {
        worst_norm = std::max(worst_norm, std::abs(pool[i].position.norm() - 2.5));
        for (size_t j = i + 1; j < pool.size(); ++j) {
            const double c = pool[i].position.normalized().dot(
                pool[j].position.normalized());
            min_angle = std::min(min_angle, std::acos(std::clamp(c, -1.0, 1.0)));
        }
    }
    std::printf("    max |norm - 2.5| %s, min pairwise angle %.2f deg\n",
                fmt(worst_norm).c_str(), rad2deg(min_angle));
    ok &= expect(worst_norm <= 1e-12, "all candidate norms = 2.5");
    ok &= expect(min_angle > deg2rad(10.0), "min pairwise angle > 10 deg");
    return ok;
}

// ---------------------------------------------------------------------------
// Shared helpers for the benchmark criteria.
// ---------------------------------------------------------------------------

// metric value per (scene, seed) pair, one map per strategy.
using CellMetric = std::map<std::pair<std::string, uint64_t>, double>;

bool all_episodes_succeeded(const BenchResult& r) {
    bool ok = true;
    for (const BenchEpisode& e : r.episodes)
        if (e.episode.failed) {
            std::printf("    FAILED episode %s seed %llu (%s): %s\n", e.scene.c_str(),
                        static_cast<unsigned long long>(e.scene_seed),
                        e.strategy.c_str(), e.episode.failure.c_str());
            ok = false;
        }
    return ok;
}

bool collect_metric(const BenchResult& r, const std::string& key,
                    std::map<std::string, CellMetric>& out) {
    if (!all_episodes_succeeded(r)) return false;
    for (const BenchEpisode& e : r.episodes) {
        if (!e.metrics.contains(key)) {
            std::printf("    FAILED: episode missing metric %s\n", key.c_str());
            return false;
        }
        out[e.strategy][{e.scene, e.scene_seed}] = e.metrics[key].get<double>();
    }
    return true;
}

// Paired vectors in matching (scene, seed) order; dies if the grids differ.
std::pair<std::vector<double>, std::vector<double>> paired_vectors(
    const CellMetric& a, const CellMetric& b) {
    std::vector<double> va, vb;
    for (const auto& [cell, value] : a) {
        va.push_back(value);
        vb.push_back(b.at(cell));
    }
    return {va, vb};
}

// ---------------------------------------------------------------------------
// 6. Task-aware planning reaches a stable correct classification sooner than
//    every baseline (paired seeds, one-sided sign test).
// ---------------------------------------------------------------------------

bool classification_planning() {
    const fs::path dir = fresh_dir("c6");
    nlohmann::json cfg = resolve_config(nlohmann::json{
        {"task", "classification"},
        {"acquisition", "cross_entropy"},
        {"strategies", {"bayes_discrete", "fps", "uncertainty", "random"}},
        {"scenes",
         {"pyramid:cross", "pyramid:ring", "pyramid:star", "pyramid:triangle",
          "pyramid:square"}},
        {"seeds", {1, 2, 3, 4, 5}},
        {"n_views", 5},
        {"out_dir", dir.string()},
        {"scanner", {{"res_w", 32}, {"res_h", 32}, {"n_candidates", 60}}},
        {"spsr",
         {{"k_max", 3}, {"grid_n", 40}, {"n_mc_samples", 8}, {"amplitude", 0.1}}},
    });
    const BenchResult r = run_benchmark(cfg, dir.string());

    std::map<std::string, CellMetric> stable;
    if (!collect_metric(r, "t_stable_censored", stable)) return false;

    bool ok = true;
    for (const std::string base : {"fps", "uncertainty", "random"}) {
        const auto [va, vb] = paired_vectors(stable.at("bayes_discrete"), stable.at(base));
        const PairedStats s = compare_paired(va, vb);
        std::printf("    mean T_stable %.3f (bayes) vs %.3f (%s): %dW/%dL/%dT p=%.4f\n",
                    s.mean_a, s.mean_b, base.c_str(), s.wins, s.losses, s.ties, s.p);
        ok &= expect(s.mean_a < s.mean_b, "mean T_stable strictly below " + base);
        ok &= expect(s.p < 0.05, "sign test vs " + base + " not significant");
    }
    return ok;
}

// ---------------------------------------------------------------------------
// 7. Soft-count planning discovers every part class at least as fast as
//    random, strictly faster for most target counts.
// ---------------------------------------------------------------------------

bool segmentation_discovery() {
    nlohmann::json base = nlohmann::json{
        {"task", "segmentation"},
        {"acquisition", "eui_softcount"},
        {"scenes", {"parts"}},
        {"seeds", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16}},
        {"n_views", 10},
        {"scanner", {{"res_w", 40}, {"res_h", 40}, {"n_candidates", 48}}},
        {"spsr",
         {{"k_max", 3}, {"grid_n", 40}, {"n_mc_samples", 6}, {"amplitude", 0.1}}},
    };

    // The soft-count policy depends on its target, so each target gets its own
    // planning arm; the random baseline is target-blind and runs once.
    const std::vector<double> targets = {20, 60, 100};
    std::map<std::string, CellMetric> by_arm;
    for (double t : targets) {
        nlohmann::json cfg = base;
        cfg["strategies"] = {"bayes_discrete"};
        cfg["n_target"] = t;
        const fs::path dir = fresh_dir("c7_t" + std::to_string(int(t)));
        cfg["out_dir"] = dir.string();
        const BenchResult r = run_benchmark(resolve_config(cfg), dir.string());
        if (!all_episodes_succeeded(r)) return false;
        for (const BenchEpisode& e : r.episodes)
            by_arm["bayes_" + detail::csv_num(t)][{e.scene, e.scene_seed}] =
                e.metrics["discovery"][detail::csv_num(t) + "_censored"].get<double>();
    }
    {
        nlohmann::json cfg = base;
        cfg["strategies"] = {"random"};
        const fs::path dir = fresh_dir("c7_rand");
        cfg["out_dir"] = dir.string();
        const BenchResult r = run_benchmark(resolve_config(cfg), dir.string());
        if (!all_episodes_succeeded(r)) return false;
        for (const BenchEpisode& e : r.episodes)
            for (double t : targets)
                by_arm["random_" + detail::csv_num(t)][{e.scene, e.scene_seed}] =
                    e.metrics["discovery"][detail::csv_num(t) + "_censored"].get<double>();
    }

    bool ok = true;
    int strict = 0;
    for (double t : targets) {
        const std::string key = detail::csv_num(t);
        const auto [va, vb] =
            paired_vectors(by_arm.at("bayes_" + key), by_arm.at("random_" + key));
        const PairedStats s = compare_paired(va, vb);
        std::printf("    N_target %g: mean T_discovery %.3f (softcount) vs %.3f (random)\n",
                    t, s.mean_a, s.mean_b);
        ok &= expect(s.mean_a <= s.mean_b,
                     "mean discovery above random at N_target " + key);
        if (s.mean_a < s.mean_b) ++strict;
    }
    std::printf("    strictly better at %d/3 targets\n", strict);
    ok &= expect(strict >= 2, "needs strict improvement at >= 2 of 3 targets");
    return ok;
}

// ---------------------------------------------------------------------------
// 8. Chamfer-driven reconstruction keeps pace with FPS coverage and beats
//    random on final mesh quality.
// ---------------------------------------------------------------------------

bool reconstruction_quality() {
    const fs::path dir = fresh_dir("c8");
    nlohmann::json cfg = resolve_config(nlohmann::json{
        {"task", "reconstruction"},
        {"acquisition", "chamfer"},
        {"strategies", {"bayes_discrete", "fps", "random"}},
        {"scenes",
         {"shapes:0", "shapes:1", "shapes:2", "shapes:3", "shapes:4", "shapes:5",
          "shapes:6", "shapes:7"}},
        {"seeds", {3}},
        {"n_views", 5},
        {"out_dir", dir.string()},
        {"scanner", {{"res_w", 32}, {"res_h", 32}, {"n_candidates", 60}}},
        {"spsr",
         {{"k_max", 4}, {"grid_n", 56}, {"n_mc_samples", 8}, {"amplitude", 0.1}}},
    });
    const BenchResult r = run_benchmark(cfg, dir.string());

    std::map<std::string, CellMetric> cd;
    if (!collect_metric(r, "mesh_chamfer", cd)) return false;

    const auto strategy_mean = [&](const std::string& name) {
        std::vector<double> v;
        for (const auto& [cell, value] : cd.at(name)) v.push_back(value);
        return mean_of(v);
    };
    const double mean_bayes = strategy_mean("bayes_discrete");
    const double mean_fps = strategy_mean("fps");
    const double mean_rand = strategy_mean("random");
    std::printf("    mean mesh chamfer: chamfer-acq %s, fps %s, random %s\n",
                fmt(mean_bayes).c_str(), fmt(mean_fps).c_str(), fmt(mean_rand).c_str());
    bool ok = expect(mean_bayes <= 1.25 * mean_fps,
                     "chamfer acquisition within 25% of fps");
    ok &= expect(mean_bayes < mean_rand, "chamfer acquisition beats random");
    return ok;
}

// ---------------------------------------------------------------------------
// 9. Cold-spot search: the heat acquisition finds the hidden coldest point
//    within the resolution of the dense ground truth; random mostly fails.
// ---------------------------------------------------------------------------

bool cold_spot_search() {
    const fs::path dir = fresh_dir("c9");
    nlohmann::json cfg = resolve_config(nlohmann::json{
        {"task", "heat"},
        {"acquisition", "eui_heat"},
        {"strategies", {"bayes_discrete", "random"}},
        {"scenes", {"heat_probe"}},
        {"seeds", {1, 2, 3, 4, 5, 6, 7, 8}},
        {"n_views", 6},
        {"out_dir", dir.string()},
        {"scanner",
         {{"fov_deg", 30.0}, {"res_w", 72}, {"res_h", 72}, {"n_candidates", 48}}},
        {"spsr",
         {{"k_max", 3}, {"grid_n", 48}, {"n_mc_samples", 6}, {"amplitude", 0.1}}},
    });
    const BenchResult r = run_benchmark(cfg, dir.string());

    int bayes_total = 0, bayes_hits = 0, rand_total = 0, rand_fails = 0;
    for (const BenchEpisode& e : r.episodes) {
        if (e.episode.failed) {
            std::printf("    FAILED episode seed %llu (%s): %s\n",
                        static_cast<unsigned long long>(e.scene_seed),
                        e.strategy.c_str(), e.episode.failure.c_str());
            return false;
        }
        const double threshold = 2.0 * e.metrics["gt_mean_spacing"].get<double>();
        const auto errors = e.metrics["coldest_error"].get<std::vector<double>>();
        double best = 1e300;
        for (double err : errors)
            if (std::isfinite(err)) best = std::min(best, err);
        const bool hit = best <= threshold;
        std::printf("    seed %llu %s: best error %s vs threshold %s -> %s\n",
                    static_cast<unsigned long long>(e.scene_seed), e.strategy.c_str(),
                    fmt(best).c_str(), fmt(threshold).c_str(), hit ? "hit" : "miss");
        if (e.strategy == "bayes_discrete") {
            ++bayes_total;
            bayes_hits += hit;
        } else {
            ++rand_total;
            rand_fails += !hit;
        }
    }
    std::printf("    heat acquisition %d/%d hits, random %d/%d misses\n", bayes_hits,
                bayes_total, rand_fails, rand_total);
    bool ok = expect(bayes_total == 8 && rand_total == 8, "episode grid complete");
    ok &= expect(bayes_hits == bayes_total, "heat acquisition locates every seed");
    ok &= expect(2 * rand_fails >= rand_total, "random fails >= 50% of seeds");
    return ok;
}

// ---------------------------------------------------------------------------
// 10. Stored episodes replay bit-for-bit through the CLI.
// ---------------------------------------------------------------------------

bool replay_determinism() {
    const fs::path dir = fresh_dir("c10");
    const fs::path config = dir / "bench.toml";
    std::ofstream(config) <<
        "task = \"classification\"\n"
        "acquisition = \"cross_entropy\"\n"
        "strategies = [\"bayes_discrete\", \"random\"]\n"
        "scenes = [\"pyramid:cross\", \"pyramid:ring\"]\n"
        "seeds = [5]\n"
        "n_views = 3\n\n"
        "[scanner]\n"
        "res_w = 24\n"
        "res_h = 24\n"
        "n_candidates = 24\n\n"
        "[spsr]\n"
        "k_max = 2\n"
        "grid_n = 32\n"
        "n_mc_samples = 2\n\n"
        "[classifier]\n"
        "epochs = 200\n"
        "train_seeds_per_class = 5\n"
        "train_views = 2\n";

    const fs::path out1 = dir / "run1", out2 = dir / "run2";
    bool ok = expect(run_cli("bench --config " + config.string() + " --out-dir " +
                             out1.string()) == 0,
                     "first benchmark run");
    ok &= expect(run_cli("bench --config " + config.string() + " --out-dir " +
                         out2.string()) == 0,
                 "second benchmark run");
    if (!ok) return false;

    const std::string csv1 = slurp(out1 / "metrics.csv");
    ok &= expect(!csv1.empty() && csv1 == slurp(out2 / "metrics.csv"),
                 "re-run metrics.csv byte-identical");

    int replayed = 0;
    std::vector<fs::path> episodes;
    for (const auto& entry : fs::directory_iterator(out1 / "episodes"))
        episodes.push_back(entry.path());
    std::sort(episodes.begin(), episodes.end());
    for (const fs::path& ep : episodes) {
        const int rc = run_cli("replay --episode " + ep.string() + " --csv " +
                               (out1 / "metrics.csv").string());
        ok &= expect(rc == 0, "replay mismatch for " + ep.filename().string());
        ++replayed;
    }
    std::printf("    %d episodes replayed against their stored records and CSV rows\n",
                replayed);
    ok &= expect(replayed == 4, "expected 4 stored episodes");
    return ok;
}

struct Criterion {
    int id;
    const char* name;
    bool (*fn)();
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {1, "gp_conditioning_oracle", gp_conditioning_oracle},
        {2, "eui_closed_form", eui_matches_closed_form},
        {3, "task_utility_values", task_utility_values},
        {4, "heat_diffusion_properties", heat_diffusion_properties},
        {5, "scanner_geometry", scanner_geometry},
        {6, "classification_planning", classification_planning},
        {7, "segmentation_discovery", segmentation_discovery},
        {8, "reconstruction_quality", reconstruction_quality},
        {9, "cold_spot_search", cold_spot_search},
        {10, "replay_determinism", replay_determinism},
    };

    const int which = argc > 1 ? std::atoi(argv[1]) : 0;
    bool all_ok = true;
    int ran = 0;
    for (const Criterion& c : criteria) {
        if (which != 0 && c.id != which) continue;
        ++ran;
        const auto t0 = std::chrono::steady_clock::now();
        bool ok = false;
        try {
            ok = c.fn();
        } catch (const std::exception& e) {
            std::printf("    error: %s\n", e.what());
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        std::printf("[criterion %d] %s: %s  (%.1fs)\n", c.id, c.name,
                    ok ? "PASS" : "FAIL", secs);
        std::fflush(stdout);
        all_ok &= ok;
    }
    if (ran == 0) {
        std::fprintf(stderr, "unknown criterion %d (valid: 1..10)\n", which);
        return 2;
    }
    return all_ok ? 0 : 1;
}
