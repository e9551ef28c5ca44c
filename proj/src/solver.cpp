#include "noisygrad/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "noisygrad/kernels.hpp"

namespace noisygrad {

double Regularizer::divergence(std::span<const double> x, std::span<const double> y) const {
  const double d = distance(Norm::euclidean(), x, y);
  return 0.5 * d * d;
}

double Regularizer::diameter(const ConvexBody& body) const {
  if (body.kind() == BodyKind::ball) return 2.0 * body.radius() * body.radius();
  return 0.5 * std::pow(distance(Norm::euclidean(), body.upper(), body.lower()), 2);
}

std::string to_string(ScheduleMode m) {
  switch (m) {
    case ScheduleMode::opt_convex: return "opt_convex";
    case ScheduleMode::opt_sc: return "opt_sc";
    case ScheduleMode::regret_convex: return "regret_convex";
    case ScheduleMode::regret_sc: return "regret_sc";
    case ScheduleMode::manual: return "manual";
  }
  return "?";
}

double Schedule::eta(std::size_t t) const {
  if (t == 0) throw DomainError("step index starts at 1");
  const double tt = static_cast<double>(t);
  switch (mode) {
    case ScheduleMode::opt_convex: return alpha / (a * std::pow(tt, r) + L);
    case ScheduleMode::opt_sc:
    case ScheduleMode::regret_sc: return 2.0 / (mu * tt);
    case ScheduleMode::regret_convex: return eta_const;
    case ScheduleMode::manual: return manual_eta(t);
  }
  return 0.0;
}

namespace {

constexpr double kMinDelta = 1e-8;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Brings a closed-form delta into (0, 1], recording any adjustment.
void settle_delta(Schedule& s, double raw, double C1, double C2) {
  s.delta_unclamped = raw;
  if (C1 == 0.0) {
    s.delta = 1.0;
    s.delta_clamped = raw != 1.0;
    if (s.delta_clamped) s.notes.push_back("bias-free envelope: delta set to 1");
    return;
  }
  if (C2 == 0.0 || !(raw > 0.0)) {
    s.delta = kMinDelta;
    s.delta_clamped = true;
    s.notes.push_back("degenerate delta " + fmt(raw) + " raised to " + fmt(kMinDelta));
    return;
  }
  if (raw > 1.0) {
    s.delta = 1.0;
    s.delta_clamped = true;
    s.notes.push_back("delta " + fmt(raw) + " clamped to 1");
    return;
  }
  s.delta = std::max(raw, kMinDelta);
  s.delta_clamped = s.delta != raw;
  if (s.delta_clamped) s.notes.push_back("delta " + fmt(raw) + " raised to " + fmt(kMinDelta));
}

void require_nonneg(std::initializer_list<double> xs, const char* where) {
  for (double x : xs)
    if (!(x >= 0.0)) throw DomainError(std::string(where) + ": inputs must be nonnegative");
}

}  // namespace

Schedule make_manual_schedule(double delta, std::function<double(std::size_t)> eta) {
  validate_delta(delta);
  Schedule s;
  s.mode = ScheduleMode::manual;
  s.delta = s.delta_unclamped = delta;
  s.manual_eta = std::move(eta);
  return s;
}

Schedule schedule_opt_convex(double p, double q, double C1, double C2, double D, double alpha,
                             double L, double n, OracleType type) {
  require_nonneg({q, C1, C2, L}, "schedule_opt_convex");
  if (!(p > 0.0) || !(D > 0.0) || !(alpha > 0.0) || !(n >= 1.0))
    throw DomainError("schedule_opt_convex: need p, D, alpha > 0 and n >= 1");
  const double s = 2.0 * p + q;
  Schedule out;
  out.mode = ScheduleMode::opt_convex;
  out.alpha = alpha;
  out.L = L;
  out.r = (p + q) / s;
  const double c1q = std::pow(C1, q / s), c2p = std::pow(C2, p / s);
  double raw;
  if (type == OracleType::type_I) {
    out.a = std::pow(2.0, q / (2.0 * s)) * std::pow(s / (2.0 * p), p / s) / std::sqrt(D) * c1q * c2p;
    raw = std::pow(alpha, 1.0 / (2.0 * (p + q))) * std::pow(s / (4.0 * p), 1.0 / s) *
          std::pow(C1, -2.0 / s) * std::pow(C2, 1.0 / s) * std::pow(n, -1.0 / s);
  } else {
    const double k = 2.0 + 2.0 / n;
    out.a = std::pow(k, q / s) * std::pow(s / (2.0 * p), p / s) * std::pow(D / alpha, -(p + q) / s) *
            c1q * c2p;
    raw = std::pow(k, -2.0 / s) * std::pow(s / (2.0 * p), 1.0 / s) * std::pow(D / alpha, 1.0 / s) *
          std::pow(C1, -2.0 / s) * std::pow(C2, 1.0 / s) * std::pow(n, -1.0 / s);
  }
  if (out.a == 0.0 && L == 0.0)
    throw DomainError("schedule_opt_convex: zero envelope with L = 0 gives an infinite step");
  settle_delta(out, raw, C1, C2);
  return out;
}

Schedule schedule_opt_sc(double p, double q, double C1, double C2, double D, double alpha,
                         double mu, double L, double n, OracleType type) {
  require_nonneg({q, C1, C2, L}, "schedule_opt_sc");
  if (!(p > 0.0) || !(D > 0.0) || !(alpha > 0.0) || !(mu > 0.0) || !(n >= 1.0))
    throw DomainError("schedule_opt_sc: need p, D, alpha, mu > 0 and n >= 1");
  if (!(alpha * mu > 2.0 * L))
    throw PreconditionError("schedule_opt_sc: requires alpha * mu > 2 L (got alpha mu = " +
                            fmt(alpha * mu) + ", 2L = " + fmt(2.0 * L) + ")");
  Schedule out;
  out.mode = ScheduleMode::opt_sc;
  out.alpha = alpha;
  out.mu = mu;
  out.L = L;
  const double am = alpha * mu;
  const double top = C2 * (std::log(n) + 1.0 + am / (am - 2.0 * L));
  const double bottom = type == OracleType::type_I ? std::sqrt(2.0 * D * alpha) * mu * C1 * n
                                                   : 2.0 * am * C1 * (n + 1.0);
  settle_delta(out, std::pow(top / bottom, 1.0 / (p + q)), C1, C2);
  return out;
}

Schedule schedule_regret(double p, double q, double C1, double C2, double D, double alpha, double L,
                         double mu, double n, OracleType type, double R_sup, RegretClass cls) {
  require_nonneg({p, q, C1, C2, L, R_sup}, "schedule_regret");
  if (!(D > 0.0) || !(alpha > 0.0) || !(n >= 1.0))
    throw DomainError("schedule_regret: need D, alpha > 0 and n >= 1");
  Schedule out;
  out.alpha = alpha;
  out.L = L;
  out.p_hat = std::min(p, 2.0);
  const double scale = type == OracleType::type_I ? R_sup : 1.0;
  out.C1_hat = (p <= 2.0 ? scale * C1 : 0.0) + (p >= 2.0 ? 0.25 * L : 0.0);
  const double ph = out.p_hat, c1h = out.C1_hat;
  if (!(ph > 0.0) || !(c1h > 0.0)) throw DomainError("schedule_regret: need p > 0 and a positive bias coefficient");
  if (cls == RegretClass::convex) {
    out.mode = ScheduleMode::regret_convex;
    const double s = 2.0 * ph + q;
    const double raw = std::pow(q / (2.0 * ph), 2.0 / s) * std::pow(C2 * D / (alpha * c1h * c1h), 1.0 / s) *
                       std::pow(n, -1.0 / s);
    if (C2 == 0.0) {
      if (!(L > 0.0)) throw DomainError("schedule_regret: noiseless envelope needs L > 0");
      out.eta_const = alpha / L;
      out.notes.push_back("noiseless envelope: constant step alpha / L");
      settle_delta(out, raw, c1h, 0.0);
      return out;
    }
    out.eta_const = std::pow(D, (ph + q) / s) * std::pow(q / (2.0 * ph), q / s) *
                    std::pow(C2 / alpha, -ph / s) * std::pow(c1h, -q / s) * std::pow(n, -(ph + q) / s);
    settle_delta(out, raw, c1h, q == 0.0 ? 0.0 : C2);
    return out;
  }
  if (!(mu > 0.0)) throw DomainError("schedule_regret: strongly convex mode needs mu > 0");
  out.mode = ScheduleMode::regret_sc;
  out.mu = mu;
  const double raw = std::pow(C2 * q * (1.0 + std::log(n)) / (alpha * mu * c1h * ph * n), 1.0 / (ph + q));
  settle_delta(out, raw, c1h, q == 0.0 ? 0.0 : C2);
  return out;
}

Vector md_step(std::span<const double> x_t, std::span<const double> g, double eta,
               const Regularizer&, const ConvexBody& body) {
  if (!(eta > 0.0)) throw DomainError("md_step: eta must be positive");
  Vector x(x_t.begin(), x_t.end());
  kernels::axpy(-eta, g, x);
  body.project_inplace(x);
  return x;
}

double step_inequality_gap(std::span<const double> x_t, std::span<const double> x_next,
                           std::span<const double> g, double eta, std::span<const double> x,
                           const Regularizer& reg) {
  Vector diff(x_next.begin(), x_next.end());
  kernels::axpy(-1.0, x, diff);
  const double lhs = dot(g, diff);
  const double rhs =
      (reg.divergence(x, x_t) - reg.divergence(x, x_next) - reg.divergence(x_next, x_t)) / eta;
  return lhs - rhs;
}

RunTrace run(const GradientOracle& oracle, const Schedule& schedule, std::size_t n,
             const ConvexBody& body, const Regularizer& reg, std::span<const double> x1,
             RngStream& rng, RunMode mode, const RunOptions& options) {
  if (n < 1) throw DomainError("run: n must be at least 1");
  if (x1.size() != body.dimension() || oracle.dimension() != body.dimension())
    throw DomainError("run: dimension mismatch");
  if (!body.contains(x1, 1e-12)) throw DomainError("run: x1 must lie in K");
  validate_delta(schedule.delta);

  RunTrace tr;
  tr.notes = schedule.notes;
  if (mode == RunMode::regret) {
    if (!oracle.unbiased())
      tr.notes.push_back("warning: regret run with an oracle whose Y is biased; bound not guaranteed");
    if (options.gradient_bound)
      tr.notes.push_back("gradient bound M = " + fmt(*options.gradient_bound) + " (sup over K)");
  }
  const std::size_t d = body.dimension();
  const std::size_t queries = mode == RunMode::optimization ? n - 1 : n;
  const double f_star = oracle.optimal_loss();
  RngStream check_rng = rng.substream(0x5e9c4ec4ULL);

  Vector x(x1.begin(), x1.end()), sum_x(d, 0.0);
  double sum_fx = 0.0;
  OracleQuery q{x, schedule.delta};
  for (std::size_t t = 1; t <= n; ++t) {
    const double fx = oracle.loss(x);
    sum_fx += fx;
    kernels::axpy(1.0, x, sum_x);
    if (options.record_path) {
      tr.iterates.push_back(x);
      tr.loss_x.push_back(fx);
    }
    if (t > queries) break;

    q.x = x;
    OracleResponse resp = oracle.query(q, rng);
    ++tr.queries;
    const double fy = oracle.loss(resp.y);
    tr.cumulative_regret += fy - f_star;
    if (options.record_path) {
      tr.deltas.push_back(schedule.delta);
      tr.loss_y.push_back(fy);
      tr.eval_points.push_back(resp.y);
      if (resp.y_secondary) {
        tr.loss_y_secondary.push_back(oracle.loss(*resp.y_secondary));
        tr.eval_points_secondary.push_back(std::move(*resp.y_secondary));
      }
    }
    const double eta = schedule.eta(t);
    Vector next = md_step(x, resp.g, eta, reg, body);
    if (options.check_step_inequality) {
      for (int k = 0; k < options.step_check_points; ++k) {
        const Vector z = body.sample_uniform(check_rng);
        const double gap = step_inequality_gap(x, next, resp.g, eta, z, reg);
        ++tr.step_checks;
        tr.max_step_gap = std::max(tr.max_step_gap, gap);
        if (gap > options.step_check_tol) ++tr.step_violations;
      }
    }
    x = std::move(next);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  tr.x_hat = sum_x;
  for (double& v : tr.x_hat) v *= inv_n;
  body.project_inplace(tr.x_hat);
  tr.mean_loss_x = sum_fx * inv_n;
  tr.optimization_error = oracle.loss(tr.x_hat) - f_star;
  return tr;
}

}  // namespace noisygrad
