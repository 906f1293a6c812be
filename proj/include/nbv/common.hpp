#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace nbv {

using Vec3 = Eigen::Vector3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// All scenes are built inside the normalized cube [-pi/2, pi/2]^3 so the
// torus-periodic GP basis never sees wrap-around.
inline constexpr double kDomainHalf = 1.5707963267948966;

// ---------------------------------------------------------------- errors ---

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateGradient : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SamplingStalled : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FeatureBudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IllConditioned : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyPrediction : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InsufficientPoints : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateTraining : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SolverDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AllCandidatesInvalid : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ------------------------------------------------------------------- rng ---

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Hash-combines up to three stream ids into one well-mixed seed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0x9e37u,
                              std::uint64_t c = 0x79b9u) {
  std::uint64_t s = a;
  std::uint64_t h = splitmix64(s);
  s ^= b + 0x9e3779b97f4a7c15ull + (h << 6);
  h ^= splitmix64(s);
  s ^= c + 0x9e3779b97f4a7c15ull + (h << 6);
  return splitmix64(s);
}

// Deterministic RNG with explicit Box-Muller gaussians (no hidden spare
// state, so draw order is reproducible across platforms).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    // Warm the engine from a splitmix stream instead of seed_seq (cheaper,
    // and identical everywhere).
    std::uint64_t init[4] = {splitmix64(s), splitmix64(s), splitmix64(s),
                             splitmix64(s)};
    gen_.seed(init[0] ^ (init[1] << 1) ^ (init[2] << 2) ^ (init[3] << 3));
    for (int i = 0; i < 8; ++i) gen_();
  }

  std::uint64_t next_u64() { return gen_(); }

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    // Rejection to avoid modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = gen_();
    while (v >= limit) v = gen_();
    return v % n;
  }

  double gauss() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586 * u2);
  }

  Vec3 gauss3() { return Vec3(gauss(), gauss(), gauss()); }

  Vec3 uniform_in_box(const Vec3& lo, const Vec3& hi) {
    return Vec3(uniform(lo.x(), hi.x()), uniform(lo.y(), hi.y()),
                uniform(lo.z(), hi.z()));
  }

 private:
  std::mt19937_64 gen_;
};

// ------------------------------------------------------------------ math ---

inline double normal_pdf(double x) {
  return 0.3989422804014327 * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.7071067811865476);
}

inline double deg2rad(double d) { return d * (M_PI / 180.0); }
inline double rad2deg(double r) { return r * (180.0 / M_PI); }

inline double sqr(double x) { return x * x; }

// -------------------------------------------------------------- parallel ---

// Runs fn(i) for i in [0, n). Work items must write only to their own output
// slot; the observable result is then independent of the thread count.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int nw = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(threads), n));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(nw);
  std::exception_ptr err;
  std::mutex err_mu;
  for (int w = 0; w < nw; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

inline int default_threads() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace nbv
