#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "conbandit/env.hpp"
#include "conbandit/gate.hpp"

namespace conbandit {

inline constexpr int default_action = -1;

// Full trace of one run. `subsets` is parallel to `action` and populated only
// for combinatorial runs.
struct RunRecord {
  std::vector<int> action;
  std::vector<std::vector<int>> subsets;
  std::vector<double> reward;
  std::vector<std::uint8_t> is_default;
  std::uint64_t noise_key = 0;

  std::size_t size() const { return reward.size(); }

  void reserve(std::size_t n) {
    action.reserve(n);
    reward.reserve(n);
    is_default.reserve(n);
  }

  void push(const StepOutcome& s) {
    action.push_back(s.arm);
    reward.push_back(s.reward);
    is_default.push_back(s.is_default ? 1 : 0);
    if (!s.subset.empty() || !subsets.empty()) {
      subsets.resize(action.size() - 1);
      subsets.push_back(s.subset);
    }
  }
};

namespace detail {

// Neumaier-compensated accumulator. The audits re-sum tens of thousands of
// rewards; plain sequential addition can drift past the 1e-9 audit slack on
// runs that ride the budget floor, flagging trajectories the gate kept safe.
struct CompensatedSum {
  double s = 0.0, c = 0.0;

  void add(double x) {
    double t = s + x;
    if (std::fabs(s) >= std::fabs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }

  double value() const { return s + c; }
};

inline double true_mean(const KArmedEnv& env, const RunRecord& rec, std::size_t s) {
  if (rec.is_default[s]) return env.mu0;
  int a = rec.action[s];
  if (a < 0 || a >= env.arm_count()) throw std::out_of_range("trace action outside arm set");
  return env.means[a];
}

inline double true_mean(const LinearEnv& env, const RunRecord& rec, std::size_t s) {
  if (rec.is_default[s]) return env.mu0;
  int a = rec.action[s];
  if (a < 0 || a >= env.arm_count()) throw std::out_of_range("trace action outside arm set");
  return env.means[a];
}

inline double true_mean(const CombEnv& env, const RunRecord& rec, std::size_t s) {
  if (rec.is_default[s]) return env.mu0;
  if (s >= rec.subsets.size()) throw std::out_of_range("trace step lacks a super arm");
  return env.super_mean(rec.subsets[s]);
}

template <class Env>
std::vector<double> pseudo_regret_impl(const RunRecord& rec, const Env& env, double best) {
  std::vector<double> curve(rec.size());
  double cum = 0.0;
  for (std::size_t s = 0; s < rec.size(); ++s) {
    cum += best - true_mean(env, rec, s);
    curve[s] = cum;
  }
  return curve;
}

}  // namespace detail

// Cumulative pseudo-regret: sum of true optimality gaps along the trace, with
// the default arm contributing its constant mean.
inline std::vector<double> pseudo_regret(const RunRecord& rec, const KArmedEnv& env) {
  return detail::pseudo_regret_impl(rec, env, env.best_mean());
}

inline std::vector<double> pseudo_regret(const RunRecord& rec, const LinearEnv& env) {
  return detail::pseudo_regret_impl(rec, env, env.best_mean());
}

inline std::vector<double> pseudo_regret(const RunRecord& rec, const CombEnv& env) {
  return detail::pseudo_regret_impl(rec, env, env.best_super_mean());
}

// Time-averaged mean-variance pseudo-regret at every prefix length:
//   (1/T) sum_{x != x*} N_x Delta^MV_x
//   + (2/T^2) sum_x sum_{y != x} N_x N_y (mu_x - mu_y)^2
// over regular arms plus the default arm (index K, variance 0); x* is the best
// regular arm by true mean-variance. Depends on the trace only through pull
// counts, so the value is recomputed canonically at each prefix.
inline std::vector<double> mv_pseudo_regret(const RunRecord& rec, const KArmedEnv& env,
                                            double rho) {
  int K = env.arm_count();
  std::vector<double> mu(K + 1), mv(K + 1);
  for (int x = 0; x < K; ++x) {
    mu[x] = env.means[x];
    mv[x] = rho * mu[x] - mu[x] * (1.0 - mu[x]);  // Bernoulli variance
  }
  mu[K] = env.mu0;
  mv[K] = rho * env.mu0;  // default arm pays exactly mu0, zero variance
  double best_mv = mv[0];
  for (int x = 1; x < K; ++x)
    if (mv[x] > best_mv) best_mv = mv[x];

  std::vector<long long> counts(K + 1, 0);
  std::vector<double> curve(rec.size());
  for (std::size_t s = 0; s < rec.size(); ++s) {
    int x = rec.is_default[s] ? K : rec.action[s];
    if (x < 0 || x > K) throw std::out_of_range("trace action outside arm set");
    ++counts[x];
    double tt = static_cast<double>(s + 1);
    double gap_term = 0.0;
    for (int a = 0; a <= K; ++a)
      gap_term += static_cast<double>(counts[a]) * (best_mv - mv[a]);
    double risk_term = 0.0;
    for (int a = 0; a <= K; ++a)
      for (int b = 0; b <= K; ++b) {
        if (b == a) continue;
        double gamma = mu[a] - mu[b];
        risk_term += static_cast<double>(counts[a]) * static_cast<double>(counts[b]) *
                     gamma * gamma;
      }
    curve[s] = gap_term / tt + 2.0 * risk_term / (tt * tt);
  }
  return curve;
}

// First timestep (1-based) whose realized cumulative reward drops below
// (1 - alpha) * mu0 * t, with 1e-9 slack for accumulated rounding.
inline std::optional<long long> audit_constraint(const RunRecord& rec,
                                                 const ConservativeConfig& cfg) {
  detail::CompensatedSum cum;
  for (std::size_t s = 0; s < rec.size(); ++s) {
    cum.add(rec.reward[s]);
    double floor_t = (1.0 - cfg.alpha) * cfg.mu0 * static_cast<double>(s + 1);
    if (cum.value() < floor_t - 1e-9) return static_cast<long long>(s + 1);
  }
  return std::nullopt;
}

// First timestep whose trajectory empirical mean-variance drops below
// (1 - alpha) * rho * mu0, recomputed from the raw trace.
inline std::optional<long long> audit_mv_constraint(const RunRecord& rec,
                                                    const ConservativeConfig& cfg, double rho) {
  double floor_mv = (1.0 - cfg.alpha) * rho * cfg.mu0;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < rec.size(); ++s) {
    sum += rec.reward[s];
    sum_sq += rec.reward[s] * rec.reward[s];
    double tt = static_cast<double>(s + 1);
    double mean = sum / tt;
    double var = sum_sq / tt - mean * mean;
    if (var < 0.0 && var > -1e-12) var = 0.0;
    if (rho * mean - var < floor_mv - 1e-9) return static_cast<long long>(s + 1);
  }
  return std::nullopt;
}

// Largest deficit of the audited quantity against its floor over the whole
// trace; positive values are violations, negative values are slack.
inline double max_constraint_deficit(const RunRecord& rec, const ConservativeConfig& cfg) {
  detail::CompensatedSum cum;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < rec.size(); ++s) {
    cum.add(rec.reward[s]);
    double deficit = (1.0 - cfg.alpha) * cfg.mu0 * static_cast<double>(s + 1) - cum.value();
    if (deficit > worst) worst = deficit;
  }
  return worst;
}

inline double max_mv_constraint_deficit(const RunRecord& rec, const ConservativeConfig& cfg,
                                        double rho) {
  double floor_mv = (1.0 - cfg.alpha) * rho * cfg.mu0;
  double sum = 0.0, sum_sq = 0.0;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < rec.size(); ++s) {
    sum += rec.reward[s];
    sum_sq += rec.reward[s] * rec.reward[s];
    double tt = static_cast<double>(s + 1);
    double mean = sum / tt;
    double var = sum_sq / tt - mean * mean;
    if (var < 0.0 && var > -1e-12) var = 0.0;
    double deficit = floor_mv - (rho * mean - var);
    if (deficit > worst) worst = deficit;
  }
  return worst;
}

struct Envelope {
  std::vector<double> mean;
  std::vector<double> max;
  std::vector<double> min;
};

// Pointwise mean/max/min across equal-length curves, accumulated in input
// order so results do not depend on scheduling.
inline Envelope aggregate(const std::vector<std::vector<double>>& curves) {
  if (curves.empty()) throw std::invalid_argument("aggregate needs at least one curve");
  std::size_t T = curves[0].size();
  for (const auto& c : curves)
    if (c.size() != T) throw std::invalid_argument("aggregate needs equal-length curves");
  Envelope env;
  env.mean.assign(T, 0.0);
  env.max = curves[0];
  env.min = curves[0];
  for (const auto& c : curves) {
    for (std::size_t s = 0; s < T; ++s) {
      env.mean[s] += c[s];
      if (c[s] > env.max[s]) env.max[s] = c[s];
      if (c[s] < env.min[s]) env.min[s] = c[s];
    }
  }
  double inv = 1.0 / static_cast<double>(curves.size());
  for (std::size_t s = 0; s < T; ++s) env.mean[s] *= inv;
  return env;
}

}  // namespace conbandit
