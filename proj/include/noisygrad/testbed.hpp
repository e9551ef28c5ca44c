#pragma once
// Objective functions with exact gradients, curvature constants and optima.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "noisygrad/core.hpp"

namespace noisygrad {

// Evaluation kernel behind an ObjectiveFunction. Works on raw pointers so
// separable compositions can hand each component its own coordinate.
class FunctionImpl {
 public:
  virtual ~FunctionImpl() = default;
  virtual double eval(const double* x, std::size_t d) const = 0;
  virtual void grad(const double* x, std::size_t d, double* out) const = 0;
};

struct FunctionInfo {
  std::string name;
  double L = 0.0;   // smoothness on the margin-dilated domain
  double mu = 0.0;  // strong convexity w.r.t. the squared-Euclidean regularizer
  double f_star = 0.0;
  std::optional<Vector> x_star;
  std::optional<double> B3;  // sup |f'''| where the family is C^3
};

class ObjectiveFunction {
 public:
  ObjectiveFunction(std::shared_ptr<const FunctionImpl> impl, ConvexBody domain, FunctionInfo info,
                    double margin = 1.0, std::vector<ObjectiveFunction> components = {});

  std::size_t dimension() const { return domain_.dimension(); }
  double eval(std::span<const double> x) const;
  Vector grad(std::span<const double> x) const;
  void grad_into(std::span<const double> x, std::span<double> out) const;

  const std::string& name() const { return info_.name; }
  double L() const { return info_.L; }
  double mu() const { return info_.mu; }
  double f_star() const { return info_.f_star; }
  const std::optional<Vector>& x_star() const { return info_.x_star; }
  const std::optional<double>& B3() const { return info_.B3; }
  const FunctionInfo& info() const { return info_; }

  // The feasible set K.
  const ConvexBody& domain() const { return domain_; }
  // Width of the evaluable band around K.
  double margin() const { return margin_; }
  ConvexBody evaluable_domain() const { return domain_.dilate(margin_); }

  // 1-d components when the function is a coordinatewise sum; empty otherwise.
  const std::vector<ObjectiveFunction>& components() const { return components_; }
  const FunctionImpl& impl() const { return *impl_; }
  const std::shared_ptr<const FunctionImpl>& impl_ptr() const { return impl_; }

 private:
  std::shared_ptr<const FunctionImpl> impl_;
  ConvexBody domain_;
  FunctionInfo info_;
  double margin_;
  std::vector<ObjectiveFunction> components_;
};

ConvexBody default_box(std::size_t d = 1);

// eps (x - v) + 2 eps^2 ln(1 + exp(-(x - v)/eps)) on K = [-1, 1].
ObjectiveFunction softabs(int v, double eps);
// x^2/2 - v eps x on K = [-1, 1].
ObjectiveFunction sc_pair(int v, double eps);
// Coordinatewise sum of 1-d functions; K is the product of component domains.
ObjectiveFunction separable(const std::vector<ObjectiveFunction>& components);
// sum_i a_i x_i^2 / 2 + b.x on the given domain (default box [-1,1]^d).
ObjectiveFunction quadratic(const Vector& a_diag, const Vector& b,
                            std::optional<ConvexBody> domain = std::nullopt);
// a x^2/2 + k max(x - c, 0)^2 / 2 on [-1, 1]. Smooth but not C^2 at x = c.
ObjectiveFunction kinked_quadratic(double a, double k, double c);
// sum_i exp(x_i) - 1 - x_i on [-1, 1]^d. Strictly convex and C^3.
ObjectiveFunction exponential_bowl(std::size_t d = 1);
// c.x + c0 on [-1, 1]^d.
ObjectiveFunction affine(const Vector& c, double c0 = 0.0);

// Worst relative error of the gradient against central differences (step
// 1e-5) at `samples` uniform points of K. Uses an absolute scale when the
// gradient is smaller than 1.
double finite_diff_check(const ObjectiveFunction& f, int samples, RngStream& rng);

}  // namespace noisygrad
