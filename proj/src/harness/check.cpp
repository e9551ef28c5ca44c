#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "noisygrad/harness.hpp"
#include "noisygrad/kernels.hpp"

namespace noisygrad {

namespace {

constexpr std::uint64_t kSuiteSeed = 0x6e6f697379ULL;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

class Suite {
 public:
  void add(std::string name, bool pass, std::string detail) {
    results_.push_back({std::move(name), pass, std::move(detail)});
  }
  template <class Fn>
  void guarded(const std::string& name, Fn&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      add(name, false, std::string("exception: ") + e.what());
    }
  }
  std::vector<CheckResult> take() { return std::move(results_); }

 private:
  std::vector<CheckResult> results_;
};

std::vector<ObjectiveFunction> testbeds() {
  std::vector<ObjectiveFunction> fs;
  fs.push_back(quadratic({1.0}, {1.5}));
  fs.push_back(quadratic({1.0, 2.0, 0.5}, {0.3, -0.2, 1.0}));
  fs.push_back(quadratic({1.0, 3.0}, {0.5, -4.0}, ConvexBody::ball({0.0, 0.0}, 1.0)));
  fs.push_back(kinked_quadratic(1.0, 1.0, 0.0));
  fs.push_back(kinked_quadratic(2.0, 0.5, 0.3));
  fs.push_back(exponential_bowl(1));
  fs.push_back(exponential_bowl(3));
  fs.push_back(affine({0.5, -1.0}, 0.2));
  for (int v : {1, -1}) {
    fs.push_back(softabs(v, 0.1));
    fs.push_back(sc_pair(v, 0.2));
  }
  fs.push_back(separable({softabs(1, 0.1), softabs(-1, 0.1), sc_pair(1, 0.3)}));
  return fs;
}

void check_projections(Suite& s) {
  RngStream rng(kSuiteSeed, 1);
  const std::vector<ConvexBody> bodies{ConvexBody::box({-1.0, -2.0, 0.0}, {1.0, 0.5, 3.0}),
                                       ConvexBody::ball({0.5, -0.5, 1.0}, 1.5)};
  double worst = -1.0;
  bool inside = true, idempotent = true;
  for (const auto& K : bodies) {
    const auto big = K.dilate(4.0);
    for (int i = 0; i < 2000; ++i) {
      const Vector x = big.sample_uniform(rng);
      const Vector p = K.project(x);
      inside = inside && K.contains(p, 1e-12);
      const Vector pp = K.project(p);
      idempotent = idempotent && distance(Norm::euclidean(), p, pp) <= 1e-12;
      const Vector z = K.sample_uniform(rng);
      double ip = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) ip += (x[j] - p[j]) * (z[j] - p[j]);
      worst = std::max(worst, ip);
    }
  }
  s.add("projection", inside && idempotent && worst <= 1e-10,
        "max <x - Px, z - Px> = " + fmt(worst));
}

void check_finite_differences(Suite& s) {
  RngStream rng(kSuiteSeed, 2);
  for (const auto& f : testbeds()) {
    const double err = finite_diff_check(f, 200, rng);
    s.add("finite_diff/" + f.name() + "/d" + std::to_string(f.dimension()), err <= 1e-4,
          "relative error " + fmt(err));
  }
}

void check_hard_families(Suite& s) {
  const double eps = 0.1;
  bool curvature = true, separation = true, sc_sep = true;
  for (int v : {1, -1}) {
    const auto f = softabs(v, eps);
    const auto g = sc_pair(v, eps);
    const double h = 1e-4;
    for (int i = 0; i < 10'000; ++i) {
      const double x = -1.0 + 2.0 * i / 9999.0;
      const double xm = x - h, xp = x + h;
      const double d2 = (f.eval({&xp, 1}) - 2.0 * f.eval({&x, 1}) + f.eval({&xm, 1})) / (h * h);
      curvature = curvature && d2 >= -1e-6 && d2 <= 0.5 + 1e-6;
      if (x * v < 0.0) {
        separation = separation && f.eval({&x, 1}) - f.f_star() > eps / 2.0;
        sc_sep = sc_sep && g.eval({&x, 1}) - g.f_star() >= eps * eps / 2.0 - 1e-15;
      }
    }
  }
  s.add("softabs_curvature", curvature, "0 <= f'' <= 1/2 on 10^4 grid points");
  s.add("softabs_separation", separation, "f_v - f_v* > eps/2 where xv < 0");
  s.add("sc_pair_separation", sc_sep, "f_v - f_v* >= eps^2/2 where xv < 0");
}

void check_scheme_moments(Suite& s) {
  for (SchemeKind k : {SchemeKind::spsa, SchemeKind::rdsa, SchemeKind::sf, SchemeKind::surface}) {
    const std::size_t d = 3;
    RngStream rng(kSuiteSeed, 10 + static_cast<std::uint64_t>(k));
    PerturbationScheme sch{k};
    const long reps = 200'000;
    std::vector<double> m(d * d, 0.0);
    Vector U(d), V(d);
    for (long r = 0; r < reps; ++r) {
      sch.sample(d, rng, U.data(), V.data());
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) m[i * d + j] += V[i] * U[j];
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        worst = std::max(worst, std::fabs(m[i * d + j] / reps - (i == j ? 1.0 : 0.0)));
    s.add("scheme_moments/" + to_string(k), worst < 0.03, "max |E[VU^T] - I| = " + fmt(worst));
  }
}

struct EnvelopeCase {
  std::string name;
  EstimatorOracle oracle;
  Vector x;
};

void check_envelopes(Suite& s, const CheckOptions& opt) {
  std::vector<EnvelopeCase> cases;
  const auto q = quadratic({1.0}, {1.5});
  const auto e1 = exponential_bowl(1);
  const auto e2 = exponential_bowl(2);
  const auto k1 = kinked_quadratic(1.0, 1.0, 0.0);
  cases.push_back({"one-point/sf/kinked", EstimatorOracle(k1, {SchemeKind::sf}, NoiseModel::uncontrolled(1.0),
                                                           Feedback::one_point, FunctionClass::convex_smooth),
                   {0.0}});
  cases.push_back({"one-point/spsa/quadratic", EstimatorOracle(q, {SchemeKind::spsa}, NoiseModel::uncontrolled(1.0),
                                                                Feedback::one_point, FunctionClass::convex_smooth),
                   {0.2}});
  cases.push_back({"two-point/spsa/exp", EstimatorOracle(e1, {SchemeKind::spsa}, NoiseModel::uncontrolled(1.0),
                                                          Feedback::two_point, FunctionClass::c3),
                   {0.0}});
  cases.push_back({"two-point/rdsa/exp2", EstimatorOracle(e2, {SchemeKind::rdsa}, NoiseModel::uncontrolled(1.0),
                                                           Feedback::two_point, FunctionClass::convex_smooth),
                   {0.3, -0.4}});
  cases.push_back({"controlled/spsa/exp2",
                   EstimatorOracle(e2, {SchemeKind::spsa}, NoiseModel::controlled(ControlledFamily::tilt, 1.0),
                                   Feedback::two_point, FunctionClass::convex_smooth),
                   {0.1, 0.2}});
  cases.push_back({"smoothing/quadratic", EstimatorOracle(q, {SchemeKind::surface}, NoiseModel::uncontrolled(1.0),
                                                           Feedback::one_point, FunctionClass::convex_smooth),
                   {0.0}});
  std::vector<CheckResult> out(cases.size() * 3);
  const std::vector<double> deltas{0.5, 0.2, 0.1};
  parallel_for(out.size(), opt.workers, [&](std::size_t idx) {
    const auto& c = cases[idx / 3];
    const double delta = deltas[idx % 3];
    RngStream rng(kSuiteSeed, 100 + idx);
    const auto env = c.oracle.envelope();
    const bool type2 = env.type == OracleType::type_II;
    const ProbeResult r = probe_bias_variance(c.oracle, c.x, delta, opt.envelope_reps, rng);
    // Type-II oracles bound the surrogate gap, not the gradient bias; only
    // their variance is compared here.
    const bool bias_ok = type2 || r.bias_est <= env.c1(delta) + 5.0 * r.bias_se;
    const bool var_ok = r.var_est <= 1.05 * env.c2(delta) + 5.0 * r.var_se;
    out[idx] = {"envelope/" + c.name + "/delta=" + format_double(delta), bias_ok && var_ok,
                "bias " + fmt(r.bias_est) + " vs " + fmt(env.c1(delta)) + ", var " + fmt(r.var_est) + " vs " +
                    fmt(env.c2(delta))};
  });
  for (auto& r : out) s.add(r.name, r.pass, r.detail);
}

// Type II: the smoothing estimator is unbiased for the gradient of the
// ball-smoothed function, and the smoothed function is within C1 delta^p.
void check_smoothing_type2(Suite& s) {
  const auto f = exponential_bowl(1);
  EstimatorOracle o(f, {SchemeKind::surface}, NoiseModel::uncontrolled(0.5), Feedback::one_point,
                    FunctionClass::convex_smooth);
  const double delta = 0.3, x0 = 0.1, h = 1e-2;
  RngStream rng(kSuiteSeed, 200);
  const ProbeResult r = probe_bias_variance(o, Vector{x0}, delta, 200'000, rng);
  // Common random numbers across the two finite-difference arms.
  const int m = 2'000'000;
  RngStream a(kSuiteSeed, 201), b(kSuiteSeed, 201);
  const double xp = x0 + h, xm = x0 - h;
  const double fd = (smoothed_eval(f, {&xp, 1}, delta, m, a) - smoothed_eval(f, {&xm, 1}, delta, m, b)) / (2 * h);
  RngStream mrng(kSuiteSeed, 202);
  double mean = 0.0;
  const long reps = 400'000;
  for (long i = 0; i < reps; ++i) mean += o.query({{x0}, delta}, mrng).g[0];
  mean /= reps;
  const double se = std::sqrt(r.var_est / reps);
  const double gap = std::fabs(mean - fd);
  s.add("smoothing_type2/unbiased", gap <= 5.0 * se + 1e-3, "|E G - grad f~| = " + fmt(gap) + ", se " + fmt(se));
  RngStream srng(kSuiteSeed, 203);
  const double sm = smoothed_eval(f, {&x0, 1}, delta, m, srng);
  const double surrogate_gap = std::fabs(sm - f.eval({&x0, 1}));
  const double c1 = o.envelope().c1(delta);
  s.add("smoothing_type2/surrogate_gap", surrogate_gap <= c1, fmt(surrogate_gap) + " <= " + fmt(c1));
}

void check_controlled_cancellation(Suite& s) {
  // Additive controlled noise is shared by both arms and must vanish.
  const auto f = quadratic({1.0}, {0.5});
  EstimatorOracle noisy(f, {SchemeKind::spsa}, NoiseModel::controlled(ControlledFamily::additive, 3.0),
                        Feedback::two_point, FunctionClass::convex_smooth);
  EstimatorOracle clean(f, {SchemeKind::spsa}, NoiseModel::none(), Feedback::two_point, FunctionClass::convex_smooth);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    RngStream a(kSuiteSeed, 300 + i), b(kSuiteSeed, 300 + i);
    const double x = -0.9 + 1.8 * i / 999.0;
    const auto gn = noisy.query({{x}, 0.1}, a);
    const auto gc = clean.query({{x}, 0.1}, b);
    worst = std::max(worst, std::fabs(gn.g[0] - gc.g[0]));
  }
  s.add("controlled_noise_cancellation", worst == 0.0, "max difference " + fmt(worst));
}

void check_adversarial(Suite& s) {
  const std::vector<OracleEnvelope> envs{{1.0, 2.0, 1.0, 2.0, OracleType::type_I},
                                         {0.5, 1.0, 1.0, 2.0, OracleType::type_I},
                                         {2.0, 1.5, 1.0, 0.0, OracleType::type_I}};
  std::size_t violations = 0, points = 0;
  double worst_gap = 0.0, worst_anti = 0.0, worst_convex_gap = -1.0;
  for (const auto& env : envs) {
    for (double eps : {0.05, 0.2, 0.3}) {
      HardInstance hp(HardClass::convex_smooth, {1}, eps, env), hm(HardClass::convex_smooth, {-1}, eps, env);
      HardInstance sp(HardClass::strongly_convex, {1}, eps, env), sm(HardClass::strongly_convex, {-1}, eps, env);
      const auto fp = hp.objective(), fm = hm.objective(), gp = sp.objective(), gm = sm.objective();
      for (int i = 0; i < 401; ++i) {
        const double x = -2.0 + 4.0 * i / 400.0;
        for (int j = 0; j < 25; ++j) {
          const double delta = std::pow(10.0, -3.0 + 3.0 * j / 24.0);
          const double c1 = env.c1(delta);
          const double bound = c1 * (1.0 + 1e-15) + 1e-15;
          const double a = gamma_mean_convex(1, x, delta, env, eps);
          const double b = gamma_mean_convex(-1, x, delta, env, eps);
          const double ga = gamma_mean_sc(1, x, delta, env, eps);
          const double gb = gamma_mean_sc(-1, x, delta, env, eps);
          if (std::fabs(a - fp.grad({&x, 1})[0]) > bound) ++violations;
          if (std::fabs(b - fm.grad({&x, 1})[0]) > bound) ++violations;
          if (std::fabs(ga - gp.grad({&x, 1})[0]) > bound) ++violations;
          if (std::fabs(gb - gm.grad({&x, 1})[0]) > bound) ++violations;
          points += 4;
          const double gap = std::fabs(ga - gb) - 2.0 * std::max(eps - c1, 0.0);
          worst_gap = std::max(worst_gap, std::fabs(gap));
          worst_convex_gap = std::max(worst_convex_gap, std::fabs(a - b) - 2.0 * std::max(eps - c1, 0.0));
          const double mx = -x;
          worst_anti = std::max(worst_anti, std::fabs(a + gamma_mean_convex(-1, mx, delta, env, eps)));
        }
      }
    }
  }
  s.add("adversarial_validity", violations == 0,
        std::to_string(violations) + " violations over " + std::to_string(points) + " grid points");
  s.add("adversarial_convex_gap_bound", worst_convex_gap <= 1e-15,
        "max |g_+ - g_-| - 2(eps - C1 delta^p)+ = " + fmt(worst_convex_gap));
  s.add("adversarial_sc_gap_identity", worst_gap <= 1e-12, "max deviation " + fmt(worst_gap));
  s.add("adversarial_antisymmetry", worst_anti <= 1e-12, "max |g_+(x) + g_-(-x)| = " + fmt(worst_anti));
}

void check_separable_arithmetic(Suite& s) {
  const std::size_t d = 4;
  const OracleEnvelope total{1.0, 2.0, 1.0, 2.0, OracleType::type_I};
  const OracleEnvelope per = per_coordinate_envelope(total, d);
  std::vector<HardInstance> parts;
  for (std::size_t i = 0; i < d; ++i)
    parts.emplace_back(HardClass::strongly_convex, std::vector<int>{i % 2 ? 1 : -1}, 0.5, per);
  const AdversarialOracle o = separable_oracle(parts);
  const auto& env = o.envelope();
  const bool composed = std::fabs(env.C1 - total.C1) <= 1e-15 && std::fabs(env.C2 - total.C2) <= 1e-15 &&
                        env.p == total.p && env.q == total.q;
  // Each coordinate saturates its bias, so the total bias hits C1 delta^p.
  const double delta = 0.3;
  const Vector x(d, 0.1);
  const Vector m = o.mean(x, delta);
  const Vector g = o.reference_gradient(x);
  double sq = 0.0;
  for (std::size_t i = 0; i < d; ++i) sq += (m[i] - g[i]) * (m[i] - g[i]);
  const double bias = std::sqrt(sq);
  const double target = total.c1(delta);
  s.add("separable_envelope_arithmetic", composed && std::fabs(bias - target) <= 1e-14 * target,
        "total bias " + fmt(bias) + " vs C1 delta^p " + fmt(target));
}

void check_delta_star(Suite& s) {
  double worst = 0.0;
  for (double p : {1.0, 2.0}) {
    for (double q : {1.0, 2.0}) {
      for (double eps : {0.1, 1.0}) {
        const double C1 = 1.0;
        const DeltaStar ds = delta_star(eps, C1, p, q);
        const double best = delta_star_objective(ds.value, eps, C1, p, q);
        double grid_best = 0.0;
        for (int i = 1; i <= 100'000; ++i)
          grid_best = std::max(grid_best, delta_star_objective(i / 100'000.0, eps, C1, p, q));
        worst = std::max(worst, (grid_best - best) / std::max(best, 1e-300));
      }
    }
  }
  s.add("delta_star_maximizer", worst <= 1e-9, "grid beats closed form by " + fmt(worst));
}

void check_eps_star(Suite& s) {
  double worst = 0.0;
  for (auto cls : {HardClass::convex_smooth, HardClass::strongly_convex}) {
    for (auto [p, q] : {std::pair{2.0, 2.0}, std::pair{1.0, 2.0}, std::pair{1.0, 1.0}}) {
      for (double n : {1e2, 1e4, 1e6}) {
        const double eps = epsilon_star(cls, p, q, 1.0, 1.0, n);
        const double direct = lower_bound_at_eps(cls, eps, p, q, 1.0, 1.0, n);
        const double closed = lower_bound_value(cls, p, q, 1.0, 1.0, n);
        worst = std::max(worst, std::fabs(direct - closed) / closed);
      }
    }
  }
  s.add("lower_bound_consistency", worst <= 1e-12, "closed form vs eps* evaluation " + fmt(worst));
}

void check_solver(Suite& s) {
  const auto f = exponential_bowl(2);
  EstimatorOracle o(f, {SchemeKind::rdsa}, NoiseModel::uncontrolled(1.0), Feedback::two_point,
                    FunctionClass::convex_smooth);
  const Regularizer reg;
  const auto env = o.envelope();
  const Schedule sch = schedule_opt_convex(env.p, env.q, env.C1, env.C2, reg.diameter(f.domain()), 1.0, f.L(),
                                           2000.0, env.type);
  RngStream rng(kSuiteSeed, 400);
  RunOptions opts;
  opts.check_step_inequality = true;
  const RunTrace tr = run(o, sch, 2000, f.domain(), reg, f.domain().center(), rng, RunMode::optimization, opts);
  s.add("step_inequality", tr.step_violations == 0 && tr.step_checks > 0,
        std::to_string(tr.step_checks) + " checks, max gap " + fmt(tr.max_step_gap));
  bool feasible = true;
  for (const auto& x : tr.iterates) feasible = feasible && f.domain().contains(x, 1e-12);
  s.add("iterates_feasible", feasible, std::to_string(tr.iterates.size()) + " iterates");
  // Jensen: f(mean X) <= mean f(X).
  const double fx = f.eval(tr.x_hat);
  s.add("averaging_jensen", fx <= tr.mean_loss_x + 1e-12, fmt(fx) + " <= " + fmt(tr.mean_loss_x));
}

void check_kernels(Suite& s) {
  using namespace kernels;
  RngStream rng(kSuiteSeed, 500);
  Vector a(1037), b(1037);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  const Table& ref = table(Backend::scalar);
  for (Backend be : {Backend::avx2, Backend::neon}) {
    if (!backend_available(be)) continue;
    const Table& t = table(be);
    const double tol = 1e-12;
    double worst = 0.0;
    auto rel = [&](double x, double y) { worst = std::max(worst, std::fabs(x - y) / std::max(1.0, std::fabs(y))); };
    rel(t.sum(a.data(), a.size()), ref.sum(a.data(), a.size()));
    rel(t.dot(a.data(), b.data(), a.size()), ref.dot(a.data(), b.data(), a.size()));
    rel(t.sum_sq(a.data(), a.size()), ref.sum_sq(a.data(), a.size()));
    rel(t.sum_abs(a.data(), a.size()), ref.sum_abs(a.data(), a.size()));
    rel(t.max_abs(a.data(), a.size()), ref.max_abs(a.data(), a.size()));
    s.add("kernels/" + std::string(backend_name(be)), worst <= tol, "max relative difference " + fmt(worst));
  }
}

}  // namespace

std::vector<CheckResult> run_property_suite(const CheckOptions& options) {
  Suite s;
  s.guarded("projection", [&] { check_projections(s); });
  s.guarded("finite_diff", [&] { check_finite_differences(s); });
  s.guarded("hard_families", [&] { check_hard_families(s); });
  s.guarded("scheme_moments", [&] { check_scheme_moments(s); });
  s.guarded("envelope", [&] { check_envelopes(s, options); });
  s.guarded("smoothing_type2", [&] { check_smoothing_type2(s); });
  s.guarded("controlled_noise_cancellation", [&] { check_controlled_cancellation(s); });
  s.guarded("adversarial", [&] { check_adversarial(s); });
  s.guarded("separable_envelope_arithmetic", [&] { check_separable_arithmetic(s); });
  s.guarded("delta_star_maximizer", [&] { check_delta_star(s); });
  s.guarded("lower_bound_consistency", [&] { check_eps_star(s); });
  s.guarded("solver", [&] { check_solver(s); });
  s.guarded("kernels", [&] { check_kernels(s); });
  return s.take();
}

}  // namespace noisygrad
