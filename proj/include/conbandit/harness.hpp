#pragma once

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "conbandit/metrics.hpp"

namespace conbandit {

enum class Setting { cmab, clb, cccb, mvcbp };
enum class Algorithm { gencb, base, lcb_gate, mvcucb, mvucb };

inline std::string to_string(Setting s) {
  switch (s) {
    case Setting::cmab: return "cmab";
    case Setting::clb: return "clb";
    case Setting::cccb: return "cccb";
    case Setting::mvcbp: return "mvcbp";
  }
  return "?";
}

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::gencb: return "gencb";
    case Algorithm::base: return "base";
    case Algorithm::lcb_gate: return "lcb_gate";
    case Algorithm::mvcucb: return "mvcucb";
    case Algorithm::mvucb: return "mvucb";
  }
  return "?";
}

inline Setting setting_from_string(const std::string& s) {
  if (s == "cmab") return Setting::cmab;
  if (s == "clb") return Setting::clb;
  if (s == "cccb") return Setting::cccb;
  if (s == "mvcbp") return Setting::mvcbp;
  throw std::invalid_argument("unknown setting '" + s + "' (expected cmab|clb|cccb|mvcbp)");
}

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "gencb") return Algorithm::gencb;
  if (s == "base") return Algorithm::base;
  if (s == "lcb_gate") return Algorithm::lcb_gate;
  if (s == "mvcucb") return Algorithm::mvcucb;
  if (s == "mvucb") return Algorithm::mvucb;
  throw std::invalid_argument("unknown algorithm '" + s +
                              "' (expected gencb|base|lcb_gate|mvcucb|mvucb)");
}

struct ExperimentConfig {
  int schema_version = 1;
  Setting setting = Setting::cmab;
  Algorithm algorithm = Algorithm::gencb;
  int K = 24;
  int d = 5;
  int cardinality = 3;
  double alpha = 0.05;
  double mu0 = 0.7;
  double mu_hi = 0.8;
  double mu_lo = 0.2;
  double mu0_fraction = 0.9;
  double rho = 60.0;
  long long T = 100000;
  int runs = 50;
  std::uint64_t master_seed = 1;
  bool unsafe_mv = false;
  bool expect_violations = false;

  bool mv_precondition_holds() const { return alpha * rho * mu0 > 2.0; }

  void validate() const {
    if (schema_version != 1) throw std::invalid_argument("schema_version must be 1");
    if (runs < 1) throw std::invalid_argument("runs must be >= 1");
    if (T < 1) throw std::invalid_argument("T must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    switch (setting) {
      case Setting::cmab:
        if (algorithm != Algorithm::gencb && algorithm != Algorithm::base &&
            algorithm != Algorithm::lcb_gate)
          throw std::invalid_argument("setting cmab supports algorithms gencb|base|lcb_gate");
        break;
      case Setting::clb:
      case Setting::cccb:
        if (algorithm != Algorithm::gencb && algorithm != Algorithm::base)
          throw std::invalid_argument("settings clb|cccb support algorithms gencb|base");
        break;
      case Setting::mvcbp:
        if (algorithm != Algorithm::mvcucb && algorithm != Algorithm::mvucb)
          throw std::invalid_argument("setting mvcbp supports algorithms mvcucb|mvucb");
        break;
    }
    if (setting == Setting::cmab || setting == Setting::mvcbp) {
      if (K < 2) throw std::invalid_argument("K must be >= 2");
      if (!(0.0 < mu_lo && mu_lo < mu_hi && mu_hi <= 1.0))
        throw std::invalid_argument("grid needs 0 < mu_lo < mu_hi <= 1");
      if (!(0.0 < mu0 && mu0 < mu_hi))
        throw std::invalid_argument("grid needs 0 < mu0 < mu_hi (default arm must not dominate)");
    } else {
      if (d < 1) throw std::invalid_argument("d must be >= 1");
      if (K < 2) throw std::invalid_argument("K must be >= 2");
      if (!(mu0_fraction > 0.0 && mu0_fraction < 1.0))
        throw std::invalid_argument("mu0_fraction must lie in (0, 1)");
      if (setting == Setting::cccb && (cardinality < 1 || cardinality > K))
        throw std::invalid_argument("cardinality must lie in [1, K]");
    }
    if (setting == Setting::mvcbp) {
      if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
      if (algorithm == Algorithm::mvcucb && !unsafe_mv && !mv_precondition_holds())
        throw std::invalid_argument(
            "mvcucb needs alpha * rho * mu0 > 2 (set unsafe_mv to run outside the guarantee)");
    }
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known = {
        "schema_version", "setting",      "algorithm",    "K",
        "d",              "cardinality",  "alpha",        "mu0",
        "mu_hi",          "mu_lo",        "mu0_fraction", "rho",
        "T",              "runs",         "master_seed",  "unsafe_mv",
        "expect_violations"};
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const auto& k : known)
        if (it.key() == k) { ok = true; break; }
      if (!ok) throw std::invalid_argument("unknown config key '" + it.key() + "'");
    }
    ExperimentConfig cfg;
    cfg.schema_version = j.value("schema_version", 1);
    if (!j.contains("setting")) throw std::invalid_argument("config is missing 'setting'");
    if (!j.contains("algorithm")) throw std::invalid_argument("config is missing 'algorithm'");
    cfg.setting = setting_from_string(j.at("setting").get<std::string>());
    cfg.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
    cfg.K = j.value("K", cfg.K);
    cfg.d = j.value("d", cfg.d);
    cfg.cardinality = j.value("cardinality", cfg.cardinality);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.mu0 = j.value("mu0", cfg.mu0);
    cfg.mu_hi = j.value("mu_hi", cfg.mu_hi);
    cfg.mu_lo = j.value("mu_lo", cfg.mu_lo);
    cfg.mu0_fraction = j.value("mu0_fraction", cfg.mu0_fraction);
    cfg.rho = j.value("rho", cfg.rho);
    cfg.T = j.value("T", cfg.T);
    cfg.runs = j.value("runs", cfg.runs);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    cfg.unsafe_mv = j.value("unsafe_mv", cfg.unsafe_mv);
    cfg.expect_violations = j.value("expect_violations", cfg.expect_violations);
    return cfg;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = schema_version;
    j["setting"] = to_string(setting);
    j["algorithm"] = to_string(algorithm);
    j["K"] = K;
    j["d"] = d;
    j["cardinality"] = cardinality;
    j["alpha"] = alpha;
    j["mu0"] = mu0;
    j["mu_hi"] = mu_hi;
    j["mu_lo"] = mu_lo;
    j["mu0_fraction"] = mu0_fraction;
    j["rho"] = rho;
    j["T"] = T;
    j["runs"] = runs;
    j["master_seed"] = master_seed;
    j["unsafe_mv"] = unsafe_mv;
    j["expect_violations"] = expect_violations;
    return j;
  }
};

// The environment is built once per experiment from the master seed and shared
// read-only across runs; only the slot matching `setting` is populated.
struct EnvBundle {
  Setting setting = Setting::cmab;
  KArmedEnv karm;
  LinearEnv lin;
  CombEnv comb;

  double mu0() const {
    switch (setting) {
      case Setting::cmab:
      case Setting::mvcbp: return karm.mu0;
      case Setting::clb: return lin.mu0;
      case Setting::cccb: return comb.mu0;
    }
    return 0.0;
  }

  double reward_cap() const {
    return setting == Setting::cccb ? static_cast<double>(comb.cardinality) : 1.0;
  }
};

inline EnvBundle build_env(const ExperimentConfig& cfg) {
  EnvBundle env;
  env.setting = cfg.setting;
  switch (cfg.setting) {
    case Setting::cmab:
    case Setting::mvcbp:
      env.karm = make_cmab_grid(cfg.K, cfg.mu0, cfg.mu_hi, cfg.mu_lo, cfg.master_seed);
      break;
    case Setting::clb:
      env.lin = make_linear_env(cfg.d, cfg.K, cfg.master_seed, cfg.mu0_fraction);
      break;
    case Setting::cccb:
      env.comb = make_comb_env(cfg.d, cfg.K, cfg.cardinality, cfg.master_seed, cfg.mu0_fraction);
      break;
  }
  return env;
}

struct SimulateOptions {
  bool keep_record = false;
  bool want_curve = true;
};

struct RunOutput {
  RunRecord record;  // cleared unless keep_record
  std::vector<double> curve;
  double final_regret = 0.0;
  long long n0_final = 0;
  std::optional<long long> first_violation;
  double max_deficit = 0.0;
};

namespace detail {

template <class Policy, class Env>
void drive_gated(Policy& pol, const Env& env, const ConservativeConfig& ccfg, GateKind gate,
                 std::uint64_t key, long long T, RunRecord& rec) {
  BudgetLedger led;
  for (long long t = 0; t < T; ++t) rec.push(gencb_step(pol, led, env, ccfg, gate, key));
}

}  // namespace detail

inline RunOutput simulate_run(const ExperimentConfig& cfg, const EnvBundle& env, int run_index,
                              const SimulateOptions& opt = {}) {
  std::uint64_t key = rng::run_seed(cfg.master_seed, static_cast<std::uint64_t>(run_index));
  ConservativeConfig ccfg{cfg.alpha, env.mu0(), env.reward_cap()};
  ccfg.validate();
  RunRecord rec;
  rec.noise_key = key;
  rec.reserve(cfg.T);
  GateKind gate = cfg.algorithm == Algorithm::gencb
                      ? GateKind::gencb
                      : (cfg.algorithm == Algorithm::lcb_gate ? GateKind::lcb : GateKind::none);
  switch (cfg.setting) {
    case Setting::cmab: {
      UcbPolicy pol(cfg.K);
      detail::drive_gated(pol, env.karm, ccfg, gate, key, cfg.T, rec);
      break;
    }
    case Setting::clb: {
      double lambda = std::max(1.0, env.lin.feature_bound * env.lin.feature_bound);
      LinUcbPolicy pol(env.lin.arms, lambda, env.lin.feature_bound, env.lin.param_bound);
      detail::drive_gated(pol, env.lin, ccfg, gate, key, cfg.T, rec);
      break;
    }
    case Setting::cccb: {
      double lambda = std::max(1.0, env.comb.feature_bound * env.comb.feature_bound);
      C2UcbPolicy pol(env.comb.base_arms, env.comb.cardinality, lambda, env.comb.feature_bound,
                      env.comb.param_bound);
      detail::drive_gated(pol, env.comb, ccfg, gate, key, cfg.T, rec);
      break;
    }
    case Setting::mvcbp: {
      MvCucbRunner runner(cfg.K, cfg.rho, ccfg, cfg.algorithm == Algorithm::mvcucb,
                          cfg.unsafe_mv);
      for (long long t = 0; t < cfg.T; ++t) rec.push(runner.step(env.karm, key));
      break;
    }
  }

  RunOutput out;
  out.n0_final = 0;
  for (std::uint8_t b : rec.is_default) out.n0_final += b;
  if (cfg.setting == Setting::mvcbp) {
    out.first_violation = audit_mv_constraint(rec, ccfg, cfg.rho);
    out.max_deficit = max_mv_constraint_deficit(rec, ccfg, cfg.rho);
    if (opt.want_curve) {
      out.curve = mv_pseudo_regret(rec, env.karm, cfg.rho);
      for (std::size_t s = 0; s < out.curve.size(); ++s)
        out.curve[s] *= static_cast<double>(s + 1);  // cumulative form t * Rtilde_t
    }
  } else {
    out.first_violation = audit_constraint(rec, ccfg);
    out.max_deficit = max_constraint_deficit(rec, ccfg);
    if (opt.want_curve) {
      switch (cfg.setting) {
        case Setting::cmab: out.curve = pseudo_regret(rec, env.karm); break;
        case Setting::clb: out.curve = pseudo_regret(rec, env.lin); break;
        default: out.curve = pseudo_regret(rec, env.comb); break;
      }
    }
  }
  if (!out.curve.empty()) out.final_regret = out.curve.back();
  if (opt.keep_record) out.record = std::move(rec);
  return out;
}

struct RunOptions {
  int threads = 1;
  bool keep_traces = false;
};

struct RunSummaryRow {
  int run = 0;
  double final_regret = 0.0;
  long long n0_final = 0;
  std::optional<long long> first_violation;
};

struct ExperimentResult {
  ExperimentConfig cfg;
  Envelope envelope;
  std::vector<RunSummaryRow> rows;
  std::vector<RunRecord> traces;  // populated only with RunOptions::keep_traces
  double mean_final_regret = 0.0;
  double mean_n0 = 0.0;
  double max_deficit = 0.0;
  long long violations = 0;

  // Audits are asserted unless the config marks violations as expected or the
  // mean-variance guarantee's own precondition does not hold.
  bool audits_waived() const {
    if (cfg.expect_violations) return true;
    return cfg.setting == Setting::mvcbp && !cfg.mv_precondition_holds();
  }

  bool ok() const { return violations == 0 || audits_waived(); }
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  cfg.validate();
  EnvBundle env = build_env(cfg);
  std::vector<RunOutput> outs(cfg.runs);
  SimulateOptions sim_opt;
  sim_opt.keep_record = opt.keep_traces;

  int workers = opt.threads < 1 ? 1 : opt.threads;
  if (workers > cfg.runs) workers = cfg.runs;
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto body = [&] {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= cfg.runs) return;
      try {
        outs[i] = simulate_run(cfg, env, i, sim_opt);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentResult res;
  res.cfg = cfg;
  std::vector<std::vector<double>> curves;
  curves.reserve(cfg.runs);
  res.max_deficit = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < cfg.runs; ++i) {
    RunOutput& o = outs[i];
    curves.push_back(std::move(o.curve));
    res.rows.push_back({i, o.final_regret, o.n0_final, o.first_violation});
    res.mean_final_regret += o.final_regret;
    res.mean_n0 += static_cast<double>(o.n0_final);
    if (o.max_deficit > res.max_deficit) res.max_deficit = o.max_deficit;
    if (o.first_violation) ++res.violations;
    if (opt.keep_traces) res.traces.push_back(std::move(o.record));
  }
  res.mean_final_regret /= static_cast<double>(cfg.runs);
  res.mean_n0 /= static_cast<double>(cfg.runs);
  res.envelope = aggregate(curves);
  return res;
}

// ---------------------------------------------------------------------------
// Output files: CSV with %.10g numbers, LF line endings, UTF-8.
// ---------------------------------------------------------------------------

inline std::string fmt_g10(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return std::string(buf);
}

inline std::string envelope_csv(const Envelope& env) {
  std::string out = "t,mean,max,min\n";
  for (std::size_t s = 0; s < env.mean.size(); ++s) {
    out += std::to_string(s + 1);
    out += ',';
    out += fmt_g10(env.mean[s]);
    out += ',';
    out += fmt_g10(env.max[s]);
    out += ',';
    out += fmt_g10(env.min[s]);
    out += '\n';
  }
  return out;
}

inline std::string runs_csv(const std::vector<RunSummaryRow>& rows) {
  std::string out = "run,final_regret,N0_final,first_violation\n";
  for (const auto& r : rows) {
    out += std::to_string(r.run);
    out += ',';
    out += fmt_g10(r.final_regret);
    out += ',';
    out += std::to_string(r.n0_final);
    out += ',';
    out += std::to_string(r.first_violation ? *r.first_violation : -1);
    out += '\n';
  }
  return out;
}

inline std::string trace_csv(const RunRecord& rec) {
  std::string out = "t,action,is_default,reward\n";
  for (std::size_t s = 0; s < rec.size(); ++s) {
    out += std::to_string(s + 1);
    out += ',';
    if (s < rec.subsets.size() && !rec.subsets[s].empty()) {
      for (std::size_t k = 0; k < rec.subsets[s].size(); ++k) {
        if (k) out += '|';
        out += std::to_string(rec.subsets[s][k]);
      }
    } else {
      out += std::to_string(rec.action[s]);
    }
    out += ',';
    out += rec.is_default[s] ? '1' : '0';
    out += ',';
    out += fmt_g10(rec.reward[s]);
    out += '\n';
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

inline nlohmann::ordered_json summary_json(const std::vector<ExperimentResult>& results) {
  nlohmann::ordered_json j;
  if (results.size() == 1) {
    j["config_echo"] = results[0].cfg.to_json();
  } else {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : results) arr.push_back(r.cfg.to_json());
    j["config_echo"] = arr;
  }
  nlohmann::ordered_json per;
  for (const auto& r : results) {
    std::string name = to_string(r.cfg.algorithm);
    while (per.contains(name)) name += "#";
    nlohmann::ordered_json row;
    row["final_mean_regret"] = r.mean_final_regret;
    row["mean_N0"] = r.mean_n0;
    row["violations"] = r.violations;
    per[name] = row;
  }
  j["per_algorithm"] = per;
  return j;
}

inline void write_experiment_outputs(const ExperimentResult& res,
                                     const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir / "envelope.csv", envelope_csv(res.envelope));
  write_text_file(out_dir / "runs.csv", runs_csv(res.rows));
  write_text_file(out_dir / "summary.json", summary_json({res}).dump(2) + "\n");
  if (!res.traces.empty()) {
    std::filesystem::create_directories(out_dir / "traces");
    for (std::size_t i = 0; i < res.traces.size(); ++i)
      write_text_file(out_dir / "traces" / ("run_" + std::to_string(i) + ".csv"),
                      trace_csv(res.traces[i]));
  }
}

// ---------------------------------------------------------------------------
// Comparison on common random numbers
// ---------------------------------------------------------------------------

struct CompareResult {
  std::vector<ExperimentResult> results;
  bool gate_dominance_checked = false;
  bool gate_dominance_ok = true;

  bool ok() const {
    if (!gate_dominance_ok) return false;
    for (const auto& r : results)
      if (!r.ok()) return false;
    return true;
  }
};

inline void require_comparable(const ExperimentConfig& a, const ExperimentConfig& b) {
  bool same_env = a.setting == b.setting && a.master_seed == b.master_seed && a.T == b.T &&
                  a.runs == b.runs && a.K == b.K && a.d == b.d &&
                  a.cardinality == b.cardinality && a.mu_hi == b.mu_hi && a.mu_lo == b.mu_lo &&
                  a.mu0 == b.mu0 && a.mu0_fraction == b.mu0_fraction && a.rho == b.rho;
  if (!same_env)
    throw std::invalid_argument(
        "compare requires matching environments (setting, seed, horizon, runs, arm geometry)");
}

inline CompareResult compare_experiments(const ExperimentConfig& a, const ExperimentConfig& b,
                                         const RunOptions& opt = {}) {
  require_comparable(a, b);
  CompareResult cmp;
  cmp.results.push_back(run_experiment(a, opt));
  cmp.results.push_back(run_experiment(b, opt));
  const ExperimentResult* gencb = nullptr;
  const ExperimentResult* lcb = nullptr;
  for (const auto& r : cmp.results) {
    if (r.cfg.algorithm == Algorithm::gencb) gencb = &r;
    if (r.cfg.algorithm == Algorithm::lcb_gate) lcb = &r;
  }
  if (gencb && lcb && gencb->cfg.alpha == lcb->cfg.alpha) {
    cmp.gate_dominance_checked = true;
    cmp.gate_dominance_ok = gencb->mean_n0 <= lcb->mean_n0;
  }
  return cmp;
}

inline std::string comparison_csv(const CompareResult& cmp) {
  std::string out = "algorithm,mean_final_regret,mean_N0,max_slack_deficit\n";
  for (const auto& r : cmp.results) {
    out += to_string(r.cfg.algorithm);
    out += ',';
    out += fmt_g10(r.mean_final_regret);
    out += ',';
    out += fmt_g10(r.mean_n0);
    out += ',';
    out += fmt_g10(r.max_deficit);
    out += '\n';
  }
  return out;
}

inline void write_compare_outputs(const CompareResult& cmp,
                                  const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (std::size_t i = 0; i < cmp.results.size(); ++i) {
    const auto& r = cmp.results[i];
    std::string tag = to_string(r.cfg.algorithm);
    if (i == 1 && cmp.results[0].cfg.algorithm == r.cfg.algorithm) tag += "_b";
    write_text_file(out_dir / ("envelope_" + tag + ".csv"), envelope_csv(r.envelope));
    write_text_file(out_dir / ("runs_" + tag + ".csv"), runs_csv(r.rows));
  }
  write_text_file(out_dir / "comparison.csv", comparison_csv(cmp));
  write_text_file(out_dir / "summary.json", summary_json(cmp.results).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Trace parsing for the audit subcommand
// ---------------------------------------------------------------------------

inline RunRecord parse_trace_csv(std::istream& in) {
  RunRecord rec;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trace is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,action,is_default,reward")
    throw std::runtime_error("trace header must be 't,action,is_default,reward'");
  long long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4)
      throw std::runtime_error("trace line " + std::to_string(line_no) + ": expected 4 columns");
    try {
      StepOutcome s;
      s.is_default = std::stoll(cells[2]) != 0;
      s.reward = std::stod(cells[3]);
      if (cells[1].find('|') != std::string::npos) {
        std::istringstream ss(cells[1]);
        std::string tok;
        while (std::getline(ss, tok, '|')) s.subset.push_back(static_cast<int>(std::stoll(tok)));
        s.arm = -1;
      } else {
        s.arm = static_cast<int>(std::stoll(cells[1]));
      }
      rec.push(s);
    } catch (const std::exception&) {
      throw std::runtime_error("trace line " + std::to_string(line_no) + ": malformed value");
    }
  }
  return rec;
}

}  // namespace conbandit
