#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "conbandit/linalg.hpp"

namespace conbandit {

// Per-arm sufficient statistics: count, reward sum, reward square sum.
struct ArmStats {
  long long count = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double reward) {
    ++count;
    sum += reward;
    sum_sq += reward * reward;
  }

  double mean() const { return count > 0 ? sum / static_cast<double>(count) : 0.0; }

  // Population variance; tiny negative cancellation residue clamps to zero.
  double variance() const {
    if (count == 0) return 0.0;
    double mu = sum / static_cast<double>(count);
    double v = sum_sq / static_cast<double>(count) - mu * mu;
    if (v < 0.0 && v > -1e-12) v = 0.0;
    return v;
  }

  double mean_variance(double rho) const { return rho * mean() - variance(); }
};

namespace detail {

inline void check_clock(long long m) {
  if (m < 1) throw std::invalid_argument("policy clock must be >= 1 at choose time");
}

}  // namespace detail

// UCB1 index over the regular-pull clock m. Unpulled arms rank first; ties
// break toward the lowest index.
inline int ucb_choose(const std::vector<ArmStats>& stats, long long m) {
  detail::check_clock(m);
  int best = -1;
  double best_index = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(stats.size()); ++i) {
    double index = stats[i].count == 0
                       ? std::numeric_limits<double>::infinity()
                       : stats[i].mean() + std::sqrt(2.0 * std::log(static_cast<double>(m)) /
                                                     static_cast<double>(stats[i].count));
    if (index > best_index) {
      best = i;
      best_index = index;
    }
  }
  return best;
}

// Confidence radius beta_m = sqrt(d * ln(2 m^2 (1 + m L^2 / lambda))) + sqrt(lambda) * S.
inline double linucb_radius(const RidgeState& ridge, long long m) {
  detail::check_clock(m);
  double md = static_cast<double>(m);
  double l2 = ridge.feature_bound * ridge.feature_bound;
  double inner = 2.0 * md * md * (1.0 + md * l2 / ridge.lambda);
  return std::sqrt(static_cast<double>(ridge.dim) * std::log(inner)) +
         std::sqrt(ridge.lambda) * ridge.param_bound;
}

// Optimistic index x . theta_hat + beta_m ||x||_{V^-1}; for a finite arm set
// this equals maximizing x . theta over the confidence ellipsoid.
inline int linucb_choose(const RidgeState& ridge, const std::vector<Vec>& arms, long long m) {
  double beta = linucb_radius(ridge, m);
  int best = -1;
  double best_index = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(arms.size()); ++i) {
    double index = dot(arms[i], ridge.estimate) + beta * mahalanobis_inverse_norm(ridge, arms[i]);
    if (index > best_index) {
      best = i;
      best_index = index;
    }
  }
  return best;
}

// Width for the combinatorial variant; the log carries an extra factor K.
inline double c2ucb_width(const RidgeState& ridge, int K, long long m) {
  detail::check_clock(m);
  double md = static_cast<double>(m);
  double l2 = ridge.feature_bound * ridge.feature_bound;
  double inner = 2.0 * md * md * (1.0 + md * static_cast<double>(K) * l2 / ridge.lambda);
  return std::sqrt(static_cast<double>(ridge.dim) * std::log(inner)) +
         std::sqrt(ridge.lambda) * ridge.param_bound;
}

// Exact oracle for sum-valued super arms: top-`cardinality` base arms by the
// optimistic weight w_bar, ties toward lower indices. Returned set is sorted.
inline std::vector<int> c2ucb_choose(const RidgeState& ridge, const std::vector<Vec>& base_arms,
                                     int cardinality, long long m) {
  int K = static_cast<int>(base_arms.size());
  if (cardinality < 1 || cardinality > K)
    throw std::invalid_argument("cardinality must lie in [1, K]");
  double width = c2ucb_width(ridge, K, m);
  std::vector<double> w_bar(K);
  for (int e = 0; e < K; ++e)
    w_bar[e] = dot(base_arms[e], ridge.estimate) +
               width * mahalanobis_inverse_norm(ridge, base_arms[e]);
  std::vector<int> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (w_bar[a] != w_bar[b]) return w_bar[a] > w_bar[b];
    return a < b;
  });
  std::vector<int> chosen(order.begin(), order.begin() + cardinality);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// Mean-variance index MV_hat_i + (5 + rho) * sqrt(ln(12 K m^3) / (2 N_i)).
inline int mvucb_choose(const std::vector<ArmStats>& stats, double rho, long long m) {
  detail::check_clock(m);
  int K = static_cast<int>(stats.size());
  double md = static_cast<double>(m);
  double log_term = std::log(12.0 * static_cast<double>(K) * md * md * md);
  int best = -1;
  double best_index = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < K; ++i) {
    double index = stats[i].count == 0
                       ? std::numeric_limits<double>::infinity()
                       : stats[i].mean_variance(rho) +
                             (5.0 + rho) * std::sqrt(log_term /
                                                     (2.0 * static_cast<double>(stats[i].count)));
    if (index > best_index) {
      best = i;
      best_index = index;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Stateful policies, one instance per simulation run. Each owns its regular-
// pull clock m, incremented before choosing.
// ---------------------------------------------------------------------------

struct UcbPolicy {
  std::vector<ArmStats> stats;
  long long m = 0;

  explicit UcbPolicy(int K) : stats(K) {
    if (K < 1) throw std::invalid_argument("policy needs K >= 1");
  }

  int choose() {
    ++m;
    return ucb_choose(stats, m);
  }

  void update(int arm, double reward) { stats.at(arm).add(reward); }
};

struct MvUcbPolicy {
  std::vector<ArmStats> stats;
  double rho;
  long long m = 0;

  MvUcbPolicy(int K, double rho_) : stats(K), rho(rho_) {
    if (K < 1) throw std::invalid_argument("policy needs K >= 1");
    if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  }

  int choose() {
    ++m;
    return mvucb_choose(stats, rho, m);
  }

  void update(int arm, double reward) { stats.at(arm).add(reward); }
};

struct LinUcbPolicy {
  RidgeState ridge;
  std::vector<Vec> arms;
  long long m = 0;

  LinUcbPolicy(std::vector<Vec> arms_, double lambda, double feature_bound, double param_bound)
      : ridge(ridge_init(arms_.empty() ? 1 : static_cast<int>(arms_[0].size()), lambda,
                         feature_bound, param_bound)),
        arms(std::move(arms_)) {
    if (arms.empty()) throw std::invalid_argument("policy needs at least one arm");
  }

  int choose() {
    ++m;
    return linucb_choose(ridge, arms, m);
  }

  void update(int arm, double reward) { ridge_update(ridge, arms.at(arm), reward); }
};

struct C2UcbPolicy {
  RidgeState ridge;
  std::vector<Vec> base_arms;
  int cardinality;
  long long m = 0;

  C2UcbPolicy(std::vector<Vec> base_arms_, int cardinality_, double lambda,
              double feature_bound, double param_bound)
      : ridge(ridge_init(base_arms_.empty() ? 1 : static_cast<int>(base_arms_[0].size()), lambda,
                         feature_bound, param_bound)),
        base_arms(std::move(base_arms_)),
        cardinality(cardinality_) {
    if (base_arms.empty()) throw std::invalid_argument("policy needs at least one arm");
    if (cardinality < 1 || cardinality > static_cast<int>(base_arms.size()))
      throw std::invalid_argument("cardinality must lie in [1, K]");
  }

  std::vector<int> choose() {
    ++m;
    return c2ucb_choose(ridge, base_arms, cardinality, m);
  }

  // Semi-bandit feedback: one ridge update per observed base arm.
  void update(const std::vector<int>& subset, const std::vector<double>& per_base) {
    if (subset.size() != per_base.size())
      throw std::invalid_argument("semi-bandit feedback length mismatch");
    for (std::size_t k = 0; k < subset.size(); ++k)
      ridge_update(ridge, base_arms.at(subset[k]), per_base[k]);
  }
};

}  // namespace conbandit
