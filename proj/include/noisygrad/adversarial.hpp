#pragma once
// Hard instance pairs and the adversarial oracles that make them hard to
// tell apart, plus the closed-form lower-bound values they imply.

#include <vector>

#include "noisygrad/core.hpp"
#include "noisygrad/testbed.hpp"

namespace noisygrad {

enum class HardClass { convex_smooth, strongly_convex };
std::string to_string(HardClass c);

// Largest eps the convex family accepts: 1 / (4 ln 2).
double convex_eps_limit();

// Mean of the convex-family oracle: f'_v shifted toward f'_{-v} by
// min(eps, C1 delta^p), clipped so the two means never cross.
double gamma_mean_convex(int v, double x, double delta, const OracleEnvelope& env, double eps);
// Mean of the strongly convex oracle: x - v eps + v min(eps, C1 delta^p).
double gamma_mean_sc(int v, double x, double delta, const OracleEnvelope& env, double eps);

struct DeltaStar {
  double value = 0.0;
  bool degenerate = false;  // q = 0: the maximizer is the delta -> 0 limit
};

// Maximizer of ((eps - C1 delta^p)^+)^2 delta^q.
DeltaStar delta_star(double eps, double C1, double p, double q);
double delta_star_objective(double delta, double eps, double C1, double p, double q);

// (2n / C2) (eps - C1 delta*^p)^2 delta*^q
double kl_upper_bound(double n, double eps, const OracleEnvelope& env);

double lower_bound_value(HardClass cls, double p, double q, double C1, double C2, double n,
                         std::size_t d = 1);
double epsilon_star(HardClass cls, double p, double q, double C1, double C2, double n);
// The bound before eps is optimized: convex (eps/4)(1 - sqrt(n) K1 eps^a),
// strongly convex (eps^2/2)(1 - sqrt(n) K1 eps^a), a = (2p+q)/(2p).
double lower_bound_at_eps(HardClass cls, double eps, double p, double q, double C1, double C2,
                          double n);
double lower_bound_k1(HardClass cls, double p, double q, double C1, double C2);

struct HardInstance {
  HardClass cls = HardClass::convex_smooth;
  std::vector<int> v;
  double eps = 0.1;
  OracleEnvelope envelope;  // per coordinate, type I

  HardInstance(HardClass cls, std::vector<int> v, double eps, OracleEnvelope per_coordinate);
  std::size_t dimension() const { return v.size(); }
  ObjectiveFunction objective() const;
  // Oracle mean at (x, delta), coordinatewise.
  Vector mean(std::span<const double> x, double delta) const;
};

// Oracle answering G = mean + N(0, c2_i(delta)) per coordinate and Y = x.
class AdversarialOracle final : public GradientOracle {
 public:
  explicit AdversarialOracle(std::vector<HardInstance> coordinates);

  std::size_t dimension() const override { return coords_.size(); }
  const OracleEnvelope& envelope() const override { return envelope_; }
  OracleResponse query(const OracleQuery& q, RngStream& rng) const override;
  Vector reference_gradient(std::span<const double> x) const override { return f_.grad(x); }
  double loss(std::span<const double> x) const override { return f_.eval(x); }
  double optimal_loss() const override { return f_.f_star(); }

  const ObjectiveFunction& objective() const { return f_; }
  Vector mean(std::span<const double> x, double delta) const;
  const std::vector<HardInstance>& coordinates() const { return coords_; }

 private:
  std::vector<HardInstance> coords_;
  OracleEnvelope envelope_;
  ObjectiveFunction f_;
};

// Splits a d-dimensional hard instance into d one-dimensional ones.
std::vector<HardInstance> split_coordinates(const HardInstance& inst);
// Coordinatewise composition; the composed envelope has
// C1 = sqrt(sum C1_i^2) and C2 = sum C2_i.
AdversarialOracle separable_oracle(const std::vector<HardInstance>& instances);
// Per-coordinate envelope (C1/sqrt d, p, C2/d, q) for a d-dim target envelope.
OracleEnvelope per_coordinate_envelope(const OracleEnvelope& total, std::size_t d);

}  // namespace noisygrad
