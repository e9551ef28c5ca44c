#include "noisygrad/testbed.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace noisygrad {

ObjectiveFunction::ObjectiveFunction(std::shared_ptr<const FunctionImpl> impl, ConvexBody domain,
                                     FunctionInfo info, double margin,
                                     std::vector<ObjectiveFunction> components)
    : impl_(std::move(impl)),
      domain_(std::move(domain)),
      info_(std::move(info)),
      margin_(margin),
      components_(std::move(components)) {}

double ObjectiveFunction::eval(std::span<const double> x) const {
  if (x.size() != dimension()) throw DomainError(info_.name + ": dimension mismatch");
  return impl_->eval(x.data(), x.size());
}

void ObjectiveFunction::grad_into(std::span<const double> x, std::span<double> out) const {
  if (x.size() != dimension() || out.size() != dimension())
    throw DomainError(info_.name + ": dimension mismatch");
  impl_->grad(x.data(), x.size(), out.data());
}

Vector ObjectiveFunction::grad(std::span<const double> x) const {
  Vector g(dimension());
  grad_into(x, g);
  return g;
}

ConvexBody default_box(std::size_t d) { return ConvexBody::box(Vector(d, -1.0), Vector(d, 1.0)); }

namespace {

// ln(1 + e^{-u}) without overflow for large |u|.
double log1p_exp_neg(double u) { return std::max(-u, 0.0) + std::log1p(std::exp(-std::fabs(u))); }

class SoftAbsImpl final : public FunctionImpl {
 public:
  SoftAbsImpl(double v, double eps) : v_(v), eps_(eps) {}
  double eval(const double* x, std::size_t) const override {
    const double u = (x[0] - v_) / eps_;
    return eps_ * (x[0] - v_) + 2.0 * eps_ * eps_ * log1p_exp_neg(u);
  }
  // eps (1 - e^{-u}) / (1 + e^{-u}) written as eps tanh(u/2).
  void grad(const double* x, std::size_t, double* out) const override {
    out[0] = eps_ * std::tanh(0.5 * (x[0] - v_) / eps_);
  }

 private:
  double v_, eps_;
};

class ScPairImpl final : public FunctionImpl {
 public:
  ScPairImpl(double v, double eps) : ve_(v * eps) {}
  double eval(const double* x, std::size_t) const override { return 0.5 * x[0] * x[0] - ve_ * x[0]; }
  void grad(const double* x, std::size_t, double* out) const override { out[0] = x[0] - ve_; }

 private:
  double ve_;
};

class QuadraticImpl final : public FunctionImpl {
 public:
  QuadraticImpl(Vector a, Vector b) : a_(std::move(a)), b_(std::move(b)) {}
  double eval(const double* x, std::size_t d) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += (0.5 * a_[i] * x[i] + b_[i]) * x[i];
    return s;
  }
  void grad(const double* x, std::size_t d, double* out) const override {
    for (std::size_t i = 0; i < d; ++i) out[i] = a_[i] * x[i] + b_[i];
  }

 private:
  Vector a_, b_;
};

class KinkedImpl final : public FunctionImpl {
 public:
  KinkedImpl(double a, double k, double c) : a_(a), k_(k), c_(c) {}
  double eval(const double* x, std::size_t) const override {
    const double e = std::max(x[0] - c_, 0.0);
    return 0.5 * a_ * x[0] * x[0] + 0.5 * k_ * e * e;
  }
  void grad(const double* x, std::size_t, double* out) const override {
    out[0] = a_ * x[0] + k_ * std::max(x[0] - c_, 0.0);
  }

 private:
  double a_, k_, c_;
};

class ExpImpl final : public FunctionImpl {
 public:
  double eval(const double* x, std::size_t d) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += std::expm1(x[i]) - x[i];
    return s;
  }
  void grad(const double* x, std::size_t d, double* out) const override {
    for (std::size_t i = 0; i < d; ++i) out[i] = std::expm1(x[i]);
  }
};

class AffineImpl final : public FunctionImpl {
 public:
  AffineImpl(Vector c, double c0) : c_(std::move(c)), c0_(c0) {}
  double eval(const double* x, std::size_t d) const override {
    double s = c0_;
    for (std::size_t i = 0; i < d; ++i) s += c_[i] * x[i];
    return s;
  }
  void grad(const double*, std::size_t d, double* out) const override {
    std::copy(c_.begin(), c_.begin() + static_cast<std::ptrdiff_t>(d), out);
  }

 private:
  Vector c_;
  double c0_;
};

class SeparableImpl final : public FunctionImpl {
 public:
  explicit SeparableImpl(std::vector<std::shared_ptr<const FunctionImpl>> parts)
      : parts_(std::move(parts)) {}
  double eval(const double* x, std::size_t) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < parts_.size(); ++i) s += parts_[i]->eval(x + i, 1);
    return s;
  }
  void grad(const double* x, std::size_t, double* out) const override {
    for (std::size_t i = 0; i < parts_.size(); ++i) parts_[i]->grad(x + i, 1, out + i);
  }

 private:
  std::vector<std::shared_ptr<const FunctionImpl>> parts_;
};

// Root of a nondecreasing scalar map on [lo, hi], clamped to the interval.
template <class F>
double monotone_root(F&& g, double lo, double hi) {
  if (g(lo) >= 0.0) return lo;
  if (g(hi) <= 0.0) return hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

Vector quadratic_minimizer(const Vector& a, const Vector& b, const ConvexBody& K) {
  const std::size_t d = a.size();
  Vector x(d);
  if (K.kind() == BodyKind::box) {
    for (std::size_t i = 0; i < d; ++i) {
      if (a[i] > 0.0)
        x[i] = std::clamp(-b[i] / a[i], K.lower()[i], K.upper()[i]);
      else
        x[i] = b[i] > 0.0 ? K.lower()[i] : (b[i] < 0.0 ? K.upper()[i] : K.center()[i]);
    }
    return x;
  }
  // Ball: x(lam) = (lam c - b) / (a + lam), with lam >= 0 chosen so that
  // |x(lam) - c| <= r holds with equality whenever the constraint is active.
  const Vector& c = K.center();
  const double r = K.radius();
  auto point = [&](double lam) {
    Vector z(d);
    for (std::size_t i = 0; i < d; ++i) {
      const double den = a[i] + lam;
      z[i] = den > 0.0 ? (lam * c[i] - b[i]) / den : (b[i] == 0.0 ? c[i] : -b[i] * 1e300);
    }
    return z;
  };
  auto excess = [&](double lam) { return distance(Norm::euclidean(), point(lam), c) - r; };
  if (excess(0.0) <= 0.0) return point(0.0);
  double hi = 1.0;
  while (excess(hi) > 0.0) hi *= 2.0;
  const double lam = monotone_root([&](double l) { return -excess(l); }, 0.0, hi);
  Vector z = point(lam);
  K.project_inplace(z);
  return z;
}

}  // namespace

ObjectiveFunction softabs(int v, double eps) {
  if (v != 1 && v != -1) throw DomainError("softabs: v must be +1 or -1");
  if (!(eps > 0.0)) throw DomainError("softabs: eps must be positive");
  FunctionInfo info;
  info.name = "softabs";
  info.L = 0.5;
  info.mu = 0.0;
  info.f_star = 2.0 * eps * eps * std::numbers::ln2;
  info.x_star = Vector{static_cast<double>(v)};
  // max over u of sech^2(u/2) |tanh(u/2)| / 2 is 1/(3 sqrt 3).
  info.B3 = 1.0 / (3.0 * std::sqrt(3.0) * eps);
  return ObjectiveFunction(std::make_shared<SoftAbsImpl>(v, eps), default_box(1), info);
}

ObjectiveFunction sc_pair(int v, double eps) {
  if (v != 1 && v != -1) throw DomainError("sc_pair: v must be +1 or -1");
  if (!(eps > 0.0)) throw DomainError("sc_pair: eps must be positive");
  FunctionInfo info;
  info.name = "sc_pair";
  info.L = 1.0;
  info.mu = 1.0;
  const double xs = std::clamp(v * eps, -1.0, 1.0);
  info.x_star = Vector{xs};
  info.f_star = 0.5 * xs * xs - v * eps * xs;
  info.B3 = 0.0;
  return ObjectiveFunction(std::make_shared<ScPairImpl>(v, eps), default_box(1), info);
}

ObjectiveFunction separable(const std::vector<ObjectiveFunction>& components) {
  if (components.empty()) throw DomainError("separable: empty component list");
  Vector lo, hi;
  std::vector<std::shared_ptr<const FunctionImpl>> parts;
  std::vector<ObjectiveFunction> flat;
  FunctionInfo info;
  info.name = "separable";
  info.L = 0.0;
  info.mu = std::numeric_limits<double>::infinity();
  bool have_x = true, have_b3 = true;
  Vector xs;
  double b3 = 0.0;
  const double margin = components.front().margin();
  for (const auto& c : components) {
    if (c.dimension() != 1) throw DomainError("separable: components must be one-dimensional");
    if (c.domain().kind() != BodyKind::box) throw DomainError("separable: components need box domains");
    if (c.margin() != margin) throw DomainError("separable: components disagree on margin");
    lo.push_back(c.domain().lower()[0]);
    hi.push_back(c.domain().upper()[0]);
    parts.push_back(c.impl_ptr());
    info.L = std::max(info.L, c.L());
    info.mu = std::min(info.mu, c.mu());
    info.f_star += c.f_star();
    if (c.x_star()) xs.push_back((*c.x_star())[0]); else have_x = false;
    if (c.B3()) b3 = std::max(b3, *c.B3()); else have_b3 = false;
    flat.push_back(c);
  }
  if (have_x) info.x_star = xs;
  if (have_b3) info.B3 = b3;
  auto impl = std::make_shared<SeparableImpl>(std::move(parts));
  return ObjectiveFunction(impl, ConvexBody::box(lo, hi), info, margin, std::move(flat));
}

ObjectiveFunction quadratic(const Vector& a_diag, const Vector& b, std::optional<ConvexBody> domain) {
  if (a_diag.empty() || a_diag.size() != b.size())
    throw DomainError("quadratic: a and b must be nonempty and of equal length");
  for (double a : a_diag)
    if (!(a >= 0.0)) throw DomainError("quadratic: a entries must be nonnegative");
  ConvexBody K = domain ? *domain : default_box(a_diag.size());
  if (K.dimension() != a_diag.size()) throw DomainError("quadratic: domain dimension mismatch");
  FunctionInfo info;
  info.name = "quadratic";
  info.L = *std::max_element(a_diag.begin(), a_diag.end());
  info.mu = *std::min_element(a_diag.begin(), a_diag.end());
  info.B3 = 0.0;
  info.x_star = quadratic_minimizer(a_diag, b, K);
  auto impl = std::make_shared<QuadraticImpl>(a_diag, b);
  info.f_star = impl->eval(info.x_star->data(), a_diag.size());
  std::vector<ObjectiveFunction> comps;
  if (K.kind() == BodyKind::box) {
    for (std::size_t i = 0; i < a_diag.size(); ++i) {
      ConvexBody Ki = ConvexBody::box({K.lower()[i]}, {K.upper()[i]});
      FunctionInfo ci;
      ci.name = "quadratic";
      ci.L = ci.mu = a_diag[i];
      ci.B3 = 0.0;
      ci.x_star = quadratic_minimizer({a_diag[i]}, {b[i]}, Ki);
      auto cimpl = std::make_shared<QuadraticImpl>(Vector{a_diag[i]}, Vector{b[i]});
      ci.f_star = cimpl->eval(ci.x_star->data(), 1);
      comps.emplace_back(cimpl, Ki, ci);
    }
  }
  return ObjectiveFunction(impl, K, info, 1.0, std::move(comps));
}

ObjectiveFunction kinked_quadratic(double a, double k, double c) {
  if (!(a > 0.0) || !(k >= 0.0)) throw DomainError("kinked_quadratic: need a > 0, k >= 0");
  auto impl = std::make_shared<KinkedImpl>(a, k, c);
  FunctionInfo info;
  info.name = "kinked_quadratic";
  info.L = a + k;
  info.mu = a;
  auto fprime = [&](double x) {
    double g;
    impl->grad(&x, 1, &g);
    return g;
  };
  const double xs = monotone_root(fprime, -1.0, 1.0);
  info.x_star = Vector{xs};
  info.f_star = impl->eval(&xs, 1);
  return ObjectiveFunction(impl, default_box(1), info);
}

ObjectiveFunction exponential_bowl(std::size_t d) {
  if (d == 0) throw DomainError("exponential_bowl: d must be positive");
  FunctionInfo info;
  info.name = "exponential_bowl";
  // Curvature e^x over the evaluable band [-2, 2].
  info.L = std::exp(2.0);
  info.mu = std::exp(-2.0);
  info.B3 = std::exp(2.0);
  info.x_star = Vector(d, 0.0);
  info.f_star = 0.0;
  auto impl = std::make_shared<ExpImpl>();
  std::vector<ObjectiveFunction> comps;
  FunctionInfo ci = info;
  ci.x_star = Vector{0.0};
  for (std::size_t i = 0; i < d; ++i) comps.emplace_back(impl, default_box(1), ci);
  return ObjectiveFunction(impl, default_box(d), info, 1.0, std::move(comps));
}

ObjectiveFunction affine(const Vector& c, double c0) {
  if (c.empty()) throw DomainError("affine: empty coefficient vector");
  FunctionInfo info;
  info.name = "affine";
  info.B3 = 0.0;
  Vector xs(c.size());
  double fs = c0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    xs[i] = c[i] > 0.0 ? -1.0 : (c[i] < 0.0 ? 1.0 : 0.0);
    fs -= std::fabs(c[i]);
  }
  info.x_star = xs;
  info.f_star = fs;
  std::vector<ObjectiveFunction> comps;
  for (std::size_t i = 0; i < c.size(); ++i) {
    FunctionInfo ci = info;
    ci.x_star = Vector{xs[i]};
    ci.f_star = -std::fabs(c[i]) + (i == 0 ? c0 : 0.0);
    comps.emplace_back(std::make_shared<AffineImpl>(Vector{c[i]}, i == 0 ? c0 : 0.0), default_box(1), ci);
  }
  return ObjectiveFunction(std::make_shared<AffineImpl>(c, c0), default_box(c.size()), info, 1.0,
                           std::move(comps));
}

double finite_diff_check(const ObjectiveFunction& f, int samples, RngStream& rng) {
  if (samples < 1) throw DomainError("finite_diff_check: samples must be >= 1");
  constexpr double h = 1e-5;
  const std::size_t d = f.dimension();
  double worst = 0.0;
  Vector g(d);
  for (int s = 0; s < samples; ++s) {
    Vector x = f.domain().sample_uniform(rng);
    f.grad_into(x, g);
    double err = 0.0, scale = 1.0;
    for (std::size_t i = 0; i < d; ++i) {
      Vector xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (f.eval(xp) - f.eval(xm)) / (2.0 * h);
      err = std::max(err, std::fabs(fd - g[i]));
      scale = std::max(scale, std::fabs(g[i]));
    }
    worst = std::max(worst, err / scale);
  }
  return worst;
}

}  // namespace noisygrad
