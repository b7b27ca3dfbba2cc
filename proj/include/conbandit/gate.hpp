#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "conbandit/env.hpp"
#include "conbandit/policies.hpp"

namespace conbandit {

struct ConservativeConfig {
  double alpha = 0.05;
  double mu0 = 0.7;
  double reward_cap = 1.0;  // 1 for single arms, cardinality for super arms

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    if (!(mu0 > 0.0)) throw std::invalid_argument("mu0 must be positive");
    if (!(reward_cap > 0.0)) throw std::invalid_argument("reward cap must be positive");
  }
};

// Running budget of one conservative run; t counts completed steps.
struct BudgetLedger {
  double r_S = 0.0;  // cumulative reward from regular pulls only
  long long N0 = 0;  // default-arm pulls
  long long m = 0;   // regular pulls
  long long t = 0;   // completed steps, always N0 + m

  void apply_regular(double reward) {
    r_S += reward;
    ++m;
    ++t;
  }

  void apply_default() {
    ++N0;
    ++t;
  }
};

// True iff step t+1 may go to the base policy: even a zero-reward pull keeps
// the running total at or above (1 - alpha) * mu0 * (t + 1).
inline bool gencb_gate(const BudgetLedger& led, const ConservativeConfig& cfg) {
  return led.r_S + static_cast<double>(led.N0) * cfg.mu0 >=
         (1.0 - cfg.alpha) * cfg.mu0 * static_cast<double>(led.t + 1);
}

// Baseline gate in the style of earlier conservative bandit algorithms: the
// realized regular-pull reward is replaced by per-arm lower confidence bounds
// clipped at zero. K-armed setting only.
inline bool lcb_gate(const std::vector<ArmStats>& stats, const BudgetLedger& led,
                     const ConservativeConfig& cfg) {
  double lcb_sum = 0.0;
  for (const ArmStats& s : stats) {
    if (s.count == 0) continue;
    double lcb = s.mean() - std::sqrt(2.0 * std::log(static_cast<double>(led.t)) /
                                      static_cast<double>(s.count));
    if (lcb > 0.0) lcb_sum += static_cast<double>(s.count) * lcb;
  }
  return lcb_sum + static_cast<double>(led.N0) * cfg.mu0 >=
         (1.0 - cfg.alpha) * cfg.mu0 * static_cast<double>(led.t + 1);
}

enum class GateKind { none, gencb, lcb };

// One simulated step of a (possibly gated) run.
struct StepOutcome {
  bool is_default = false;
  int arm = -1;                 // -1 on default pulls and on super-arm steps
  std::vector<int> subset;      // combinatorial steps only
  double reward = 0.0;
};

// Advance one global step: consult the gate, then either play the default arm
// for exactly mu0 or hand control to the base policy. Reward draws are keyed
// by the policy clock m, so runs that share a noise key see the same reward
// function of (m, arm) regardless of how many default pulls interleave.
template <class Policy, class Env>
StepOutcome gencb_step(Policy& pol, BudgetLedger& led, const Env& env,
                       const ConservativeConfig& cfg, GateKind gate, std::uint64_t noise_key) {
  bool open = true;
  if (gate == GateKind::gencb) {
    open = gencb_gate(led, cfg);
  } else if (gate == GateKind::lcb) {
    if constexpr (requires { pol.stats; }) {
      open = lcb_gate(pol.stats, led, cfg);
    } else {
      throw std::logic_error("lcb gate needs per-arm statistics");
    }
  }
  if (!open) {
    double r = sample_default(env);
    led.apply_default();
    return {true, -1, {}, r};
  }
  if constexpr (requires { pol.cardinality; }) {
    std::vector<int> subset = pol.choose();
    SampleOutcome out = sample_super(env, subset, static_cast<std::uint64_t>(pol.m), noise_key);
    pol.update(subset, out.per_base);
    led.apply_regular(out.reward);
    return {false, -1, std::move(subset), out.reward};
  } else {
    int arm = pol.choose();
    SampleOutcome out = sample(env, arm, static_cast<std::uint64_t>(pol.m), noise_key);
    pol.update(arm, out.reward);
    led.apply_regular(out.reward);
    return {false, arm, {}, out.reward};
  }
}

// ---------------------------------------------------------------------------
// Mean-variance gate
// ---------------------------------------------------------------------------

// Sufficient statistics of the whole trajectory (default pulls included).
struct MVLedger {
  double sum = 0.0;
  double sum_sq = 0.0;
  long long t = 0;
  long long N0 = 0;
  long long m = 0;

  double mean() const { return t > 0 ? sum / static_cast<double>(t) : 0.0; }

  double variance() const {
    if (t == 0) return 0.0;
    double mu = sum / static_cast<double>(t);
    double v = sum_sq / static_cast<double>(t) - mu * mu;
    if (v < 0.0 && v > -1e-12) v = 0.0;
    return v;
  }

  double mv_hat(double rho) const { return t > 0 ? rho * mean() - variance() : 0.0; }

  void apply(double reward, bool is_default) {
    sum += reward;
    sum_sq += reward * reward;
    ++t;
    if (is_default) ++N0;
    else ++m;
  }
};

// True iff step t+1 may explore: t * MV_hat_t - 2 >= (1 - alpha) * MV0 * (t + 1),
// where the slack 2 bounds the per-pull exploration risk for rewards in [0, 1].
inline bool mvcucb_gate(const MVLedger& led, const ConservativeConfig& cfg, double rho) {
  double mv0 = rho * cfg.mu0;
  return static_cast<double>(led.t) * led.mv_hat(rho) - 2.0 >=
         (1.0 - cfg.alpha) * mv0 * static_cast<double>(led.t + 1);
}

inline void require_mv_precondition(const ConservativeConfig& cfg, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  if (!(cfg.alpha * rho * cfg.mu0 > 2.0))
    throw std::invalid_argument(
        "mean-variance gate needs alpha * rho * mu0 > 2 (override with unsafe_mv)");
}

// Gated mean-variance bandit; `gated = false` gives the plain index policy
// used as a negative control.
struct MvCucbRunner {
  MvUcbPolicy pol;
  MVLedger led;
  ConservativeConfig cfg;
  bool gated;

  MvCucbRunner(int K, double rho, const ConservativeConfig& cfg_, bool gated_,
               bool unsafe_override = false)
      : pol(K, rho), cfg(cfg_), gated(gated_) {
    cfg.validate();
    if (gated && !unsafe_override) require_mv_precondition(cfg, rho);
  }

  StepOutcome step(const KArmedEnv& env, std::uint64_t noise_key) {
    bool open = gated ? mvcucb_gate(led, cfg, pol.rho) : true;
    if (!open) {
      double r = sample_default(env);
      led.apply(r, true);
      return {true, -1, {}, r};
    }
    int arm = pol.choose();
    SampleOutcome out = sample(env, arm, static_cast<std::uint64_t>(pol.m), noise_key);
    pol.update(arm, out.reward);
    led.apply(out.reward, false);
    return {false, arm, {}, out.reward};
  }
};

}  // namespace conbandit
