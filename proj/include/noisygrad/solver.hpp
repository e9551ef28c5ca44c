#pragma once
// Mirror descent driven by a gradient oracle, with closed-form schedules for
// optimization and regret in the convex and strongly convex regimes.

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "noisygrad/core.hpp"

namespace noisygrad {

// R(x) = |x|^2 / 2, so D_R(x, y) = |x - y|^2 / 2 and alpha = 1.
struct Regularizer {
  double alpha() const { return 1.0; }
  double divergence(std::span<const double> x, std::span<const double> y) const;
  // sup over K of D_R: box |upper - lower|^2 / 2, ball 2 r^2.
  double diameter(const ConvexBody& body) const;
};

enum class ScheduleMode { opt_convex, opt_sc, regret_convex, regret_sc, manual };
std::string to_string(ScheduleMode m);

struct Schedule {
  ScheduleMode mode = ScheduleMode::manual;
  double delta = 1.0;
  double delta_unclamped = 1.0;
  bool delta_clamped = false;

  // opt_convex: eta_t = alpha / (a t^r + L)
  double alpha = 1.0, a = 0.0, r = 0.0, L = 0.0;
  // opt_sc, regret_sc: eta_t = 2 / (mu t)
  double mu = 0.0;
  // regret_convex: constant step
  double eta_const = 0.0;
  // regret modes
  double p_hat = 0.0, C1_hat = 0.0;
  std::function<double(std::size_t)> manual_eta;

  std::vector<std::string> notes;

  double eta(std::size_t t) const;
};

Schedule make_manual_schedule(double delta, std::function<double(std::size_t)> eta);

Schedule schedule_opt_convex(double p, double q, double C1, double C2, double D, double alpha,
                             double L, double n, OracleType type);
// Throws PreconditionError unless alpha mu > 2 L.
Schedule schedule_opt_sc(double p, double q, double C1, double C2, double D, double alpha,
                         double mu, double L, double n, OracleType type = OracleType::type_I);

enum class RegretClass { convex, strongly_convex };
Schedule schedule_regret(double p, double q, double C1, double C2, double D, double alpha, double L,
                         double mu, double n, OracleType type, double R_sup, RegretClass cls);

// argmin_{x in K} eta <g, x> + D_R(x, x_t), i.e. project(x_t - eta g).
Vector md_step(std::span<const double> x_t, std::span<const double> g, double eta,
               const Regularizer& reg, const ConvexBody& body);

// <g, x_next - x> - (D(x, x_t) - D(x, x_next) - D(x_next, x_t)) / eta.
// Nonpositive up to rounding for every x in K.
double step_inequality_gap(std::span<const double> x_t, std::span<const double> x_next,
                           std::span<const double> g, double eta, std::span<const double> x,
                           const Regularizer& reg);

enum class RunMode { optimization, regret };

struct RunOptions {
  bool record_path = true;
  // Check the step inequality at every iteration against random points of K.
  bool check_step_inequality = false;
  int step_check_points = 100;
  double step_check_tol = 1e-8;
  // Gradient bound M reported in regret traces when known.
  std::optional<double> gradient_bound;
};

struct RunTrace {
  std::vector<Vector> iterates;       // X_1 .. X_n
  std::vector<Vector> eval_points;    // Y_t
  std::vector<Vector> eval_points_secondary;
  std::vector<double> loss_x;         // f(X_t)
  std::vector<double> loss_y;         // f(Y_t)
  std::vector<double> loss_y_secondary;
  std::vector<double> deltas;         // delta_t
  Vector x_hat;
  double mean_loss_x = 0.0;           // (1/n) sum f(X_t)
  double cumulative_regret = 0.0;     // sum_t f(Y_t) - n f*
  double optimization_error = 0.0;    // f(X_hat) - f*
  std::size_t queries = 0;
  std::size_t step_checks = 0;
  std::size_t step_violations = 0;
  double max_step_gap = -std::numeric_limits<double>::infinity();
  std::vector<std::string> notes;
};

// Optimization mode performs n-1 oracle calls and averages X_1..X_n. Regret
// mode plays n rounds, charging f(Y_t) each round.
RunTrace run(const GradientOracle& oracle, const Schedule& schedule, std::size_t n,
             const ConvexBody& body, const Regularizer& reg, std::span<const double> x1,
             RngStream& rng, RunMode mode, const RunOptions& options = {});

}  // namespace noisygrad
