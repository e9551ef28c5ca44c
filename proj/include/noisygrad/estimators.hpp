#pragma once
// Zeroth-order gradient oracles built from function evaluations.

#include <string>

#include "noisygrad/core.hpp"
#include "noisygrad/testbed.hpp"

namespace noisygrad {

// spsa:    U_i = +-1,               V_i = 1/U_i
// rdsa:    U uniform on sphere of radius sqrt(d), V = U
// sf:      U standard Gaussian,     V = U
// surface: U uniform on the unit sphere, V = d U (smoothing over the unit ball)
enum class SchemeKind { spsa, rdsa, sf, surface };

struct PerturbationScheme {
  SchemeKind kind = SchemeKind::spsa;
  void sample(std::size_t d, RngStream& rng, double* U, double* V) const;
};

std::string to_string(SchemeKind k);
SchemeKind parse_scheme(const std::string& s);

enum class NoiseKind { uncontrolled, controlled };
// additive: F(x, psi) = f(x) + sigma psi_1
// tilt:     F(x, psi) = f(x) + sigma <psi, x>
enum class ControlledFamily { additive, tilt };

struct NoiseModel {
  NoiseKind kind = NoiseKind::uncontrolled;
  double sigma = 0.0;
  ControlledFamily family = ControlledFamily::additive;

  static NoiseModel uncontrolled(double sigma) { return {NoiseKind::uncontrolled, sigma, {}}; }
  static NoiseModel controlled(ControlledFamily fam, double sigma) {
    return {NoiseKind::controlled, sigma, fam};
  }
  static NoiseModel none() { return uncontrolled(0.0); }
};

enum class Feedback { one_point, two_point };
enum class FunctionClass { convex_smooth, c3 };

std::string to_string(Feedback f);
std::string to_string(FunctionClass c);

// Moments of a perturbation scheme, estimated by Monte Carlo with a fixed
// seed and cached per (scheme, dimension, norm).
struct SchemeMoments {
  double v_u2 = 0.0;     // E |V|_* |U|^2
  double v2 = 0.0;       // E |V|_*^2
  double v_u3 = 0.0;     // E |V|_* |U|^3
  double v2_u2 = 0.0;    // E |V|_*^2 |U|^2
  double v2_u4 = 0.0;    // E |V|_*^2 |U|^4
  std::size_t samples = 0;
};

inline constexpr std::size_t kMomentSamples = 1'000'000;

SchemeMoments scheme_moments(SchemeKind kind, std::size_t d, Norm norm = Norm::euclidean());
void save_moment_cache(const std::string& path);
// Returns the number of entries loaded; missing file is not an error.
std::size_t load_moment_cache(const std::string& path);

// E|w|^2 for w uniform in the unit Euclidean ball of R^d.
double ball_second_moment(std::size_t d);

struct ValueRange {
  double min = 0.0;
  double max = 0.0;
  double sup_abs() const;
  double span() const { return max - min; }
};

// Range of f over the margin-dilated domain. Exact decomposition for
// separable box functions, grid search for d <= 2, random search otherwise.
ValueRange value_range(const ObjectiveFunction& f);
// sup of the dual norm of the gradient over a set (grid search as above).
double gradient_bound(const ObjectiveFunction& f, const ConvexBody& over, Norm norm);

OracleEnvelope envelope_for(FunctionClass cls, const NoiseModel& noise, Feedback feedback,
                            SchemeKind scheme, const ObjectiveFunction& f,
                            Norm norm = Norm::euclidean());

class EstimatorOracle final : public GradientOracle {
 public:
  EstimatorOracle(ObjectiveFunction target, PerturbationScheme scheme, NoiseModel noise,
                  Feedback feedback, FunctionClass cls, Norm norm = Norm::euclidean());
  EstimatorOracle(ObjectiveFunction target, PerturbationScheme scheme, NoiseModel noise,
                  Feedback feedback, OracleEnvelope envelope, Norm norm = Norm::euclidean());

  std::size_t dimension() const override { return target_.dimension(); }
  const OracleEnvelope& envelope() const override { return envelope_; }
  Norm norm() const override { return norm_; }
  OracleResponse query(const OracleQuery& q, RngStream& rng) const override;
  Vector reference_gradient(std::span<const double> x) const override { return target_.grad(x); }
  double loss(std::span<const double> x) const override { return target_.eval(x); }
  double optimal_loss() const override { return target_.f_star(); }

  const ObjectiveFunction& target() const { return target_; }
  const PerturbationScheme& scheme() const { return scheme_; }
  const NoiseModel& noise() const { return noise_; }
  Feedback feedback() const { return feedback_; }

  // Observed value at z split as (f(z), noise term); psi is used only by
  // controlled noise. Differences are taken termwise so that a noise term
  // shared by both arms cancels exactly.
  std::pair<double, double> observe(std::span<const double> z, std::span<const double> psi,
                                    RngStream& rng) const;
  void check_query(const OracleQuery& q) const;

 private:
  ObjectiveFunction target_;
  PerturbationScheme scheme_;
  NoiseModel noise_;
  Feedback feedback_;
  OracleEnvelope envelope_;
  Norm norm_;
};

// G = (f(x + delta U) + xi) V / delta
OracleResponse one_point_estimate(const EstimatorOracle& o, const OracleQuery& q, RngStream& rng);
// G = (Z+ - Z-) V / (2 delta), Z+- observed at x +- delta U
OracleResponse two_point_estimate(const EstimatorOracle& o, const OracleQuery& q, RngStream& rng);
// One-point estimate with the surface scheme; unbiased for the ball-smoothed f.
OracleResponse smoothing_estimate(const EstimatorOracle& o, const OracleQuery& q, RngStream& rng);

// Monte Carlo mean of f(x + delta W), W uniform in the unit ball.
double smoothed_eval(const ObjectiveFunction& f, std::span<const double> x, double delta,
                     int samples, RngStream& rng);

// x + delta U min(1, 1/|U|), shrunk if rounding would leave the delta-ball.
Vector vicinity_point(std::span<const double> x, std::span<const double> U, double delta, Norm norm);

}  // namespace noisygrad

namespace noisygrad {

// Returns the exact gradient and Y = x. Envelope is identically zero.
class ExactOracle final : public GradientOracle {
 public:
  explicit ExactOracle(ObjectiveFunction target);
  std::size_t dimension() const override { return target_.dimension(); }
  const OracleEnvelope& envelope() const override { return envelope_; }
  OracleResponse query(const OracleQuery& q, RngStream& rng) const override;
  Vector reference_gradient(std::span<const double> x) const override { return target_.grad(x); }
  double loss(std::span<const double> x) const override { return target_.eval(x); }
  double optimal_loss() const override { return target_.f_star(); }
  const ObjectiveFunction& target() const { return target_; }

 private:
  ObjectiveFunction target_;
  OracleEnvelope envelope_;
};

}  // namespace noisygrad
