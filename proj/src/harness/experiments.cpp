#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "noisygrad/harness.hpp"

namespace noisygrad {

using nlohmann::json;

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  std::size_t w = workers > 0 ? static_cast<std::size_t>(workers)
                              : std::max(1u, std::thread::hardware_concurrency());
  w = std::min(w, std::max<std::size_t>(count, 1));
  if (w <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < w; ++k) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next.store(count);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

std::uint64_t task_stream(std::size_t horizon_index, std::size_t rep) {
  return (static_cast<std::uint64_t>(horizon_index) << 32) | static_cast<std::uint64_t>(rep);
}

HorizonStat summarize(long n, const std::vector<double>& values) {
  const double m = static_cast<double>(values.size());
  double s = 0.0;
  for (double v : values) s += v;
  const double mean = s / m;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {n, mean, m > 1 ? std::sqrt(ss / (m - 1.0) / m) : 0.0};
}

json envelope_json(const OracleEnvelope& e) {
  return {{"C1", e.C1}, {"p", e.p}, {"C2", e.C2}, {"q", e.q}, {"type", to_string(e.type)}};
}

json fit_json(const RateFit& fit) {
  json rows = json::array();
  for (const auto& s : fit.errors) rows.push_back({{"n", s.n}, {"mean", s.mean}, {"se", s.se}});
  return {{"exponent", fit.fitted_exponent}, {"intercept", fit.fitted_intercept},
          {"r_squared", fit.r_squared}, {"per_horizon", rows}};
}

struct Setup {
  ObjectiveFunction f;
  std::unique_ptr<GradientOracle> oracle;
  Regularizer reg;
  double D;
  Vector x1;
};

Setup make_setup(const ExperimentConfig& cfg) {
  ObjectiveFunction f = build_function(cfg.function);
  auto oracle = build_oracle(cfg, f);
  if (oracle->dimension() != f.dimension())
    throw ConfigError("function.dim", "oracle and function dimensions differ");
  Regularizer reg;
  const double D = reg.diameter(f.domain());
  Vector x1 = f.domain().center();
  return {std::move(f), std::move(oracle), reg, D, std::move(x1)};
}

// Runs every (horizon, replication) pair and collects records in index order.
std::vector<RunRecord> run_grid(const ExperimentConfig& cfg, const Setup& s,
                                const std::vector<Schedule>& schedules, RunMode mode,
                                const RunOptions& options) {
  const auto hs = cfg.horizons_or_default();
  const auto reps = static_cast<std::size_t>(cfg.replications_or_default());
  std::vector<RunRecord> records(hs.size() * reps);
  parallel_for(records.size(), cfg.workers, [&](std::size_t idx) {
    const std::size_t h = idx / reps, r = idx % reps;
    RngStream rng(cfg.seed, task_stream(h, r));
    const RunTrace tr = run(*s.oracle, schedules[h], static_cast<std::size_t>(hs[h]), s.f.domain(), s.reg,
                            s.x1, rng, mode, options);
    records[idx] = {cfg.id, hs[h], static_cast<long>(r), tr.optimization_error, tr.cumulative_regret,
                    schedules[h].delta, rng.derived_seed()};
  });
  return records;
}

}  // namespace

ExperimentResult rate_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  Setup s = make_setup(cfg);
  const OracleEnvelope env = s.oracle->envelope();
  const bool sc = cfg.problem_class == "sc";
  if (sc && !(s.f.mu() > 0.0)) throw ConfigError("function", "strongly convex class needs mu > 0");

  const auto hs = cfg.horizons_or_default();
  std::vector<Schedule> schedules;
  for (long n : hs) {
    const double nn = static_cast<double>(n);
    try {
      schedules.push_back(sc ? schedule_opt_sc(env.p, env.q, env.C1, env.C2, s.D, cfg.sc_alpha, s.f.mu(),
                                               s.f.L(), nn, env.type)
                             : schedule_opt_convex(env.p, env.q, env.C1, env.C2, s.D, cfg.alpha, s.f.L(),
                                                   nn, env.type));
    } catch (const PreconditionError& e) {
      throw ConfigError("sc_alpha", e.what());
    }
  }
  RunOptions opts;
  opts.record_path = false;
  ExperimentResult out;
  out.command = "rate";
  out.records = run_grid(cfg, s, schedules, RunMode::optimization, opts);

  const auto reps = static_cast<std::size_t>(cfg.replications_or_default());
  std::vector<HorizonStat> stats;
  for (std::size_t h = 0; h < hs.size(); ++h) {
    std::vector<double> errs;
    for (std::size_t r = 0; r < reps; ++r) errs.push_back(out.records[h * reps + r].error);
    stats.push_back(summarize(hs[h], errs));
  }
  out.fit = fit_rate(stats);
  out.predicted_exponent = sc ? env.p / (env.p + env.q) : env.p / (2.0 * env.p + env.q);
  out.pass = std::fabs(out.fit.fitted_exponent - out.predicted_exponent) <= cfg.tolerance &&
             out.fit.r_squared >= cfg.min_r_squared;
  json sched = json::array();
  for (std::size_t h = 0; h < hs.size(); ++h) {
    const Schedule& sc_h = schedules[h];
    sched.push_back({{"n", hs[h]}, {"mode", to_string(sc_h.mode)}, {"delta", sc_h.delta},
                     {"delta_unclamped", sc_h.delta_unclamped}, {"a", sc_h.a}, {"r", sc_h.r},
                     {"notes", sc_h.notes}});
    for (const auto& note : sc_h.notes) out.notes.push_back("n=" + std::to_string(hs[h]) + ": " + note);
  }
  out.summary = {{"command", "rate"},
                 {"fit", fit_json(out.fit)},
                 {"predicted_exponent", out.predicted_exponent},
                 {"tolerance", cfg.tolerance},
                 {"min_r_squared", cfg.min_r_squared},
                 {"pass", out.pass},
                 {"envelope", envelope_json(env)},
                 {"schedules", sched},
                 {"notes", out.notes},
                 {"config", to_json(cfg)}};
  return out;
}

ExperimentResult regret_experiment(const ExperimentConfig& in) {
  ExperimentConfig cfg = in;
  const double p = cfg.regret.p, q = cfg.regret.q;
  // Estimator realizing the requested envelope exponents.
  if (p == 2.0 && q == 2.0) {
    cfg.oracle.estimator = "smoothing";
    cfg.oracle.noise = "uncontrolled";
  } else if (p == 1.0 && q == 2.0) {
    cfg.oracle.estimator = "one-point";
    cfg.oracle.noise = "uncontrolled";
  } else if (p == 1.0 && q == 0.0) {
    cfg.oracle.estimator = "spsa";
    cfg.oracle.noise = "controlled";
  } else {
    throw ConfigError("regret.p", "no built-in estimator has envelope exponents (p, q) = (" +
                                      format_double(p) + ", " + format_double(q) + ")");
  }
  cfg.oracle.function_class = "convex_smooth";
  validate_config(cfg);
  Setup s = make_setup(cfg);
  const OracleEnvelope env = s.oracle->envelope();
  if (env.p != p || env.q != q) throw ConfigError("regret", "estimator envelope does not match (p, q)");
  const bool sc = cfg.problem_class == "sc";
  if (sc && !(s.f.mu() > 0.0)) throw ConfigError("function", "strongly convex class needs mu > 0");

  const auto hs = cfg.horizons_or_default();
  const double R_sup = s.f.domain().max_norm();
  std::vector<Schedule> schedules;
  for (long n : hs)
    schedules.push_back(schedule_regret(p, q, env.C1, env.C2, s.D, cfg.alpha, s.f.L(), s.f.mu(),
                                        static_cast<double>(n), env.type, R_sup,
                                        sc ? RegretClass::strongly_convex : RegretClass::convex));
  RunOptions opts;
  opts.record_path = false;
  const double M = gradient_bound(s.f, s.f.domain(), s.oracle->norm());
  opts.gradient_bound = M;
  ExperimentResult out;
  out.command = "regret";
  out.records = run_grid(cfg, s, schedules, RunMode::regret, opts);

  const auto reps = static_cast<std::size_t>(cfg.replications_or_default());
  std::vector<HorizonStat> stats;
  for (std::size_t h = 0; h < hs.size(); ++h) {
    std::vector<double> avg;
    for (std::size_t r = 0; r < reps; ++r)
      avg.push_back(out.records[h * reps + r].regret / static_cast<double>(hs[h]));
    stats.push_back(summarize(hs[h], avg));
  }
  out.fit = fit_rate(stats);
  const double ph = std::min(p, 2.0);
  const double avg_pred = sc ? ph / (ph + q) : ph / (2.0 * ph + q);
  out.predicted_exponent = 1.0 - avg_pred;
  const double regret_exponent = 1.0 - out.fit.fitted_exponent;
  out.pass = std::fabs(regret_exponent - out.predicted_exponent) <= cfg.tolerance;
  out.notes.push_back("gradient bound M = " + format_double(M) + " (sup over K of the dual gradient norm)");
  json sched = json::array();
  for (std::size_t h = 0; h < hs.size(); ++h) {
    const Schedule& g = schedules[h];
    sched.push_back({{"n", hs[h]}, {"mode", to_string(g.mode)}, {"delta", g.delta},
                     {"delta_unclamped", g.delta_unclamped}, {"eta_const", g.eta_const},
                     {"p_hat", g.p_hat}, {"C1_hat", g.C1_hat}, {"notes", g.notes}});
    for (const auto& note : g.notes) out.notes.push_back("n=" + std::to_string(hs[h]) + ": " + note);
  }
  out.summary = {{"command", "regret"},
                 {"average_regret_fit", fit_json(out.fit)},
                 {"regret_exponent", regret_exponent},
                 {"predicted_regret_exponent", out.predicted_exponent},
                 {"tolerance", cfg.tolerance},
                 {"pass", out.pass},
                 {"envelope", envelope_json(env)},
                 {"schedules", sched},
                 {"notes", out.notes},
                 {"config", to_json(cfg)}};
  return out;
}

LowerBoundReport lower_bound_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const auto& l = cfg.lowerbound;
  const bool sc = cfg.problem_class == "sc";
  const HardClass cls = sc ? HardClass::strongly_convex : HardClass::convex_smooth;
  const double n = static_cast<double>(l.n);
  LowerBoundReport rep;
  rep.exact_oracle = l.exact_oracle;
  rep.eps = epsilon_star(cls, l.p, l.q, l.c1, l.c2, n);
  if (!sc && !(rep.eps < convex_eps_limit()))
    throw ConfigError("lowerbound.n", "eps* = " + format_double(rep.eps) + " is not below 1/(4 ln 2); increase n");
  if (sc && rep.eps > 1.0) throw ConfigError("lowerbound.n", "eps* exceeds 1; increase n");
  rep.floor = lower_bound_value(cls, l.p, l.q, l.c1, l.c2, n, 1);
  const OracleEnvelope env{l.c1, l.p, l.c2, l.q, OracleType::type_I};

  const Regularizer reg;
  const ConvexBody K = default_box(1);
  const double D = reg.diameter(K);
  // Curvature constants of the hard families: softabs has L = 1/2; the
  // strongly convex pair has L = mu = 1.
  const Schedule schedule = sc ? schedule_opt_sc(l.p, l.q, l.c1, l.c2, D, cfg.sc_alpha, 1.0, 1.0, n)
                               : schedule_opt_convex(l.p, l.q, l.c1, l.c2, D, cfg.alpha, 0.5, n, OracleType::type_I);
  rep.delta = schedule.delta;

  const auto reps = static_cast<std::size_t>(cfg.replications_or_default());
  std::vector<std::unique_ptr<GradientOracle>> oracles;
  for (int v : {1, -1}) {
    HardInstance h(cls, {v}, rep.eps, env);
    if (l.exact_oracle)
      oracles.push_back(std::make_unique<ExactOracle>(h.objective()));
    else
      oracles.push_back(std::make_unique<AdversarialOracle>(std::vector<HardInstance>{h}));
  }
  rep.records.resize(2 * reps);
  RunOptions opts;
  opts.record_path = false;
  const Vector x1 = K.center();
  parallel_for(rep.records.size(), cfg.workers, [&](std::size_t idx) {
    const std::size_t which = idx / reps;
    RngStream rng(cfg.seed, task_stream(which, idx % reps));
    const RunTrace tr = run(*oracles[which], schedule, static_cast<std::size_t>(l.n), K, reg, x1, rng,
                            RunMode::optimization, opts);
    rep.records[idx] = {cfg.id, l.n, static_cast<long>(idx), tr.optimization_error, tr.cumulative_regret,
                        schedule.delta, rng.derived_seed()};
  });
  std::vector<double> errs;
  for (const auto& r : rep.records) errs.push_back(r.error);
  const HorizonStat st = summarize(l.n, errs);
  rep.mean_error = st.mean;
  rep.se = st.se;
  rep.runs = static_cast<long>(errs.size());
  // With exact gradients the floor does not apply; the check is that the
  // solver alone gets well below it.
  rep.pass = l.exact_oracle ? rep.mean_error < rep.floor : rep.mean_error + 3.0 * rep.se >= rep.floor;
  rep.summary = {{"command", "lowerbound"},
                 {"class", to_string(cls)},
                 {"floor", rep.floor},
                 {"eps", rep.eps},
                 {"delta", rep.delta},
                 {"mean_error", rep.mean_error},
                 {"se", rep.se},
                 {"runs", rep.runs},
                 {"exact_oracle", rep.exact_oracle},
                 {"pass", rep.pass},
                 {"notes", schedule.notes},
                 {"config", to_json(cfg)}};
  return rep;
}

ProbeReport probe_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  Setup s = make_setup(cfg);
  if (cfg.probe.x.size() != s.f.dimension()) throw ConfigError("probe.x", "dimension mismatch");
  if (!s.f.domain().contains(cfg.probe.x)) throw ConfigError("probe.x", "point outside K");
  const auto& grid = cfg.probe.delta_grid;
  const OracleEnvelope env = s.oracle->envelope();
  ProbeReport rep;
  rep.rows.resize(grid.size());
  parallel_for(grid.size(), cfg.workers, [&](std::size_t i) {
    RngStream rng(cfg.seed, task_stream(i, 0));
    rep.rows[i] = probe_bias_variance(*s.oracle, cfg.probe.x, grid[i], cfg.replications_or_default(), rng);
  });
  rep.pass = true;
  std::vector<double> ds, bs, vs;
  bool bias_positive = true, var_positive = true;
  json rows = json::array();
  for (const auto& r : rep.rows) {
    const double c1 = env.c1(r.delta), c2 = env.c2(r.delta);
    rep.c1.push_back(c1);
    rep.c2.push_back(c2);
    const bool ok = r.bias_est <= c1 + 5.0 * r.bias_se && r.var_est <= 1.05 * c2 + 5.0 * r.var_se;
    rep.pass = rep.pass && ok;
    ds.push_back(r.delta);
    bs.push_back(r.bias_est);
    vs.push_back(r.var_est);
    bias_positive = bias_positive && r.bias_est > 0.0;
    var_positive = var_positive && r.var_est > 0.0;
    rows.push_back({{"delta", r.delta}, {"bias", r.bias_est}, {"bias_se", r.bias_se}, {"var", r.var_est},
                    {"var_se", r.var_se}, {"c1", c1}, {"c2", c2}, {"within_envelope", ok}});
  }
  json slopes = json::object();
  if (grid.size() >= 2 && bias_positive) slopes["bias"] = rep.bias_slope = loglog_slope(ds, bs);
  if (grid.size() >= 2 && var_positive) slopes["variance"] = rep.var_slope = loglog_slope(ds, vs);
  rep.summary = {{"command", "probe"}, {"envelope", envelope_json(env)}, {"rows", rows},
                 {"slopes", slopes},   {"pass", rep.pass},                {"config", to_json(cfg)}};
  return rep;
}

}  // namespace noisygrad
