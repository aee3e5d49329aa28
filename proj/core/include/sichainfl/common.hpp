// Shared small utilities: vector arithmetic, seeded RNG, seed derivation,
// bounded parallel fan-out and stable float formatting.
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sichainfl {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b);
double l2_norm(const Vec& v);
// y += a * x
void axpy(double a, const Vec& x, Vec& y);
bool all_finite(const Vec& v);
double cosine_similarity(const Vec& a, const Vec& b);

// SplitMix64 step; used to derive independent stream seeds from a base seed.
std::uint64_t splitmix64(std::uint64_t& state);

// Deterministic sub-seed for (purpose, a, b), e.g. (round, client_id).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t purpose,
                          std::uint64_t a = 0, std::uint64_t b = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(eng_);
  }
  double gamma(double shape) {
    return std::gamma_distribution<double>(shape, 1.0)(eng_);
  }
  double lognormal(double mu, double sigma) {
    return std::lognormal_distribution<double>(mu, sigma)(eng_);
  }
  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng_);
  }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), eng_);
  }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

// Runs fn(i) for i in [0, n). Thread count is capped by the
// SICHAINFL_THREADS environment variable; each index writes only its own
// output slot, so results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Round-trip-exact decimal rendering ("%.17g") for CSV/JSON output.
std::string format_double(double x);

}  // namespace sichainfl
