#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "conbandit/linalg.hpp"
#include "conbandit/rng.hpp"

namespace conbandit {

struct SampleOutcome {
  double reward = 0.0;
  std::vector<double> per_base;  // semi-bandit feedback, combinatorial only
};

// ---------------------------------------------------------------------------
// K-armed Bernoulli environment
// ---------------------------------------------------------------------------

struct KArmedEnv {
  std::vector<double> means;
  double mu0 = 0.0;        // known constant reward of the default arm
  std::uint64_t seed = 0;  // standalone noise key; harness passes per-run keys

  int arm_count() const { return static_cast<int>(means.size()); }
  double best_mean() const { return *std::max_element(means.begin(), means.end()); }

  void validate() const {
    if (means.empty()) throw std::invalid_argument("environment needs at least one arm");
    for (double mu : means)
      if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("arm means must lie in [0, 1]");
    if (!(mu0 > 0.0 && mu0 < best_mean()))
      throw std::invalid_argument("default mean must satisfy 0 < mu0 < max arm mean");
  }
};

// Arithmetic grid of means from mu_hi down to mu_lo.
inline KArmedEnv make_cmab_grid(int K, double mu0, double mu_hi, double mu_lo,
                                std::uint64_t seed) {
  if (K < 2) throw std::invalid_argument("cmab grid needs K >= 2");
  if (!(0.0 < mu_lo && mu_lo < mu_hi && mu_hi <= 1.0))
    throw std::invalid_argument("cmab grid needs 0 < mu_lo < mu_hi <= 1");
  if (!(0.0 < mu0 && mu0 < mu_hi))
    throw std::invalid_argument("cmab grid needs 0 < mu0 < mu_hi (default arm must not dominate)");
  KArmedEnv env;
  env.means.resize(K);
  for (int i = 0; i < K; ++i)
    env.means[i] = mu_hi - (mu_hi - mu_lo) * static_cast<double>(i) / (K - 1);
  env.mu0 = mu0;
  env.seed = seed;
  return env;
}

inline SampleOutcome sample(const KArmedEnv& env, int arm, std::uint64_t t,
                            std::uint64_t noise_key) {
  if (arm < 0 || arm >= env.arm_count()) throw std::out_of_range("unknown arm index");
  double r = rng::bernoulli(noise_key, t, static_cast<std::uint64_t>(arm), env.means[arm])
                 ? 1.0
                 : 0.0;
  return {r, {}};
}

inline SampleOutcome sample(const KArmedEnv& env, int arm, std::uint64_t t) {
  return sample(env, arm, t, env.seed);
}

inline double sample_default(const KArmedEnv& env) { return env.mu0; }

// ---------------------------------------------------------------------------
// Linear environments
// ---------------------------------------------------------------------------
//
// Construction keeps means exactly linear in the features while mapping them
// onto [0.1, 0.9]: each arm is x_i = (kappa * u_i, kappa) with kappa = 1/sqrt(2)
// and u_i uniform on the unit sphere of R^{d-1} (unit norm, L = 1); raw scores
// p_i = u_i . v with v uniform in the unit ball; the affine map a*p + b that
// sends [min p, max p] to [0.1, 0.9] is folded into
// theta* = ((a/kappa) * v, b/kappa), so x_i . theta* = a*p_i + b.

namespace detail {

struct LinearCore {
  std::vector<Vec> arms;
  Vec theta_star;
  std::vector<double> means;
};

inline LinearCore make_linear_core(int d, int K, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("linear env needs d >= 1");
  if (K < 2) throw std::invalid_argument("linear env needs K >= 2");
  LinearCore core;
  core.arms.assign(K, Vec(d, 0.0));
  core.theta_star.assign(d, 0.0);
  core.means.assign(K, 0.0);
  if (d == 1) {
    for (int i = 0; i < K; ++i) core.arms[i][0] = 1.0;
    core.theta_star[0] = 0.5;
    for (int i = 0; i < K; ++i) core.means[i] = 0.5;
    return core;
  }
  int n = d - 1;
  double kappa = std::sqrt(0.5);
  rng::Counter stream(rng::mix64(~seed));  // construction domain, split from noise
  std::vector<Vec> us(K);
  for (int i = 0; i < K; ++i) us[i] = rng::unit_sphere(stream, n);
  Vec v = rng::unit_ball(stream, n);
  Vec p(K);
  for (int i = 0; i < K; ++i) p[i] = dot(us[i], v);
  double lo = *std::min_element(p.begin(), p.end());
  double hi = *std::max_element(p.begin(), p.end());
  double a, b;
  if (hi - lo < 1e-12) {
    a = 0.0;
    b = 0.5;
  } else {
    a = 0.8 / (hi - lo);
    b = 0.1 - a * lo;
  }
  for (int j = 0; j < n; ++j) core.theta_star[j] = (a / kappa) * v[j];
  core.theta_star[n] = b / kappa;
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < n; ++j) core.arms[i][j] = kappa * us[i][j];
    core.arms[i][n] = kappa;
    core.means[i] = dot(core.arms[i], core.theta_star);
  }
  return core;
}

}  // namespace detail

struct LinearEnv {
  Vec theta_star;
  std::vector<Vec> arms;
  std::vector<double> means;  // arms[i] . theta_star, cached
  double mu0 = 0.0;
  double feature_bound = 1.0;  // L
  double param_bound = 1.0;    // S = ||theta_star||
  std::uint64_t seed = 0;

  int arm_count() const { return static_cast<int>(arms.size()); }
  double best_mean() const { return *std::max_element(means.begin(), means.end()); }

  void validate() const {
    if (arms.empty()) throw std::invalid_argument("environment needs at least one arm");
    for (double mu : means)
      if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("arm means must lie in [0, 1]");
    if (!(mu0 > 0.0 && mu0 < best_mean()))
      throw std::invalid_argument("default mean must satisfy 0 < mu0 < max arm mean");
  }
};

inline LinearEnv make_linear_env(int d, int K, std::uint64_t seed, double mu0_fraction) {
  if (!(mu0_fraction > 0.0 && mu0_fraction < 1.0))
    throw std::invalid_argument("mu0_fraction must lie in (0, 1)");
  detail::LinearCore core = detail::make_linear_core(d, K, seed);
  LinearEnv env;
  env.theta_star = std::move(core.theta_star);
  env.arms = std::move(core.arms);
  env.means = std::move(core.means);
  env.mu0 = mu0_fraction * env.best_mean();
  env.feature_bound = 1.0;
  env.param_bound = norm2(env.theta_star);
  env.seed = seed;
  env.validate();
  return env;
}

inline SampleOutcome sample(const LinearEnv& env, int arm, std::uint64_t t,
                            std::uint64_t noise_key) {
  if (arm < 0 || arm >= env.arm_count()) throw std::out_of_range("unknown arm index");
  double r = rng::bernoulli(noise_key, t, static_cast<std::uint64_t>(arm), env.means[arm])
                 ? 1.0
                 : 0.0;
  return {r, {}};
}

inline SampleOutcome sample(const LinearEnv& env, int arm, std::uint64_t t) {
  return sample(env, arm, t, env.seed);
}

inline double sample_default(const LinearEnv& env) { return env.mu0; }

// ---------------------------------------------------------------------------
// Contextual combinatorial environment (semi-bandit feedback)
// ---------------------------------------------------------------------------
//
// Decision class: all subsets of exactly `cardinality` base arms; the super-arm
// value is the sum of base means, so the exact oracle is top-cardinality.

struct CombEnv {
  std::vector<Vec> base_arms;
  Vec theta_star;
  std::vector<double> base_means;  // w*
  int cardinality = 1;
  double mu0 = 0.0;
  double feature_bound = 1.0;
  double param_bound = 1.0;
  std::uint64_t seed = 0;

  int base_arm_count() const { return static_cast<int>(base_arms.size()); }

  // value of the best super arm: sum of the top-`cardinality` base means
  double best_super_mean() const {
    std::vector<double> sorted = base_means;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double s = 0.0;
    for (int i = 0; i < cardinality; ++i) s += sorted[i];
    return s;
  }

  double super_mean(const std::vector<int>& subset) const {
    double s = 0.0;
    for (int e : subset) s += base_means.at(e);
    return s;
  }

  void validate() const {
    if (base_arms.empty()) throw std::invalid_argument("environment needs at least one arm");
    if (cardinality < 1 || cardinality > base_arm_count())
      throw std::invalid_argument("cardinality must lie in [1, K]");
    for (double w : base_means)
      if (!(w >= 0.0 && w <= 1.0))
        throw std::invalid_argument("base arm means must lie in [0, 1]");
    if (!(mu0 > 0.0 && mu0 < best_super_mean()))
      throw std::invalid_argument("default mean must satisfy 0 < mu0 < best super-arm value");
  }
};

inline CombEnv make_comb_env(int d, int K, int cardinality, std::uint64_t seed,
                             double mu0_fraction) {
  if (!(mu0_fraction > 0.0 && mu0_fraction < 1.0))
    throw std::invalid_argument("mu0_fraction must lie in (0, 1)");
  if (cardinality < 1 || cardinality > K)
    throw std::invalid_argument("cardinality must lie in [1, K]");
  detail::LinearCore core = detail::make_linear_core(d, K, seed);
  CombEnv env;
  env.base_arms = std::move(core.arms);
  env.theta_star = std::move(core.theta_star);
  env.base_means = std::move(core.means);
  env.cardinality = cardinality;
  env.mu0 = mu0_fraction * env.best_super_mean();
  env.feature_bound = 1.0;
  env.param_bound = norm2(env.theta_star);
  env.seed = seed;
  env.validate();
  return env;
}

inline SampleOutcome sample_super(const CombEnv& env, const std::vector<int>& subset,
                                  std::uint64_t t, std::uint64_t noise_key) {
  if (static_cast<int>(subset.size()) != env.cardinality)
    throw std::invalid_argument("super arm must contain exactly `cardinality` base arms");
  SampleOutcome out;
  out.per_base.reserve(subset.size());
  for (std::size_t k = 0; k < subset.size(); ++k) {
    int e = subset[k];
    if (e < 0 || e >= env.base_arm_count()) throw std::out_of_range("unknown base arm index");
    for (std::size_t j = 0; j < k; ++j)
      if (subset[j] == e) throw std::invalid_argument("super arm has a repeated base arm");
    double r =
        rng::bernoulli(noise_key, t, static_cast<std::uint64_t>(e), env.base_means[e]) ? 1.0
                                                                                       : 0.0;
    out.per_base.push_back(r);
    out.reward += r;
  }
  return out;
}

inline SampleOutcome sample_super(const CombEnv& env, const std::vector<int>& subset,
                                  std::uint64_t t) {
  return sample_super(env, subset, t, env.seed);
}

inline double sample_default(const CombEnv& env) { return env.mu0; }

}  // namespace conbandit
