#include "noisygrad/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "noisygrad/kernels.hpp"

namespace noisygrad {

double Norm::operator()(std::span<const double> x) const {
  switch (kind_) {
    case NormKind::max: return kernels::max_abs(x);
    case NormKind::one: return kernels::sum_abs(x);
    default: return std::sqrt(kernels::sum_sq(x));
  }
}

double dual_norm(Norm norm, std::span<const double> g) { return norm.dual()(g); }

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("dot: dimension mismatch");
  return kernels::dot(a, b);
}

double distance(Norm norm, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("distance: dimension mismatch");
  Vector d(a.begin(), a.end());
  kernels::axpy(-1.0, b, d);
  return norm(d);
}

std::string to_string(NormKind k) {
  switch (k) {
    case NormKind::max: return "max";
    case NormKind::one: return "one";
    default: return "euclidean";
  }
}

// ---------------------------------------------------------------- RngStream

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed),
      stream_id_(stream_id),
      derived_(mix64(mix64(master_seed) ^ mix64(stream_id + 0x632be59bd9b4e019ULL))),
      engine_(derived_) {}

RngStream RngStream::substream(std::uint64_t k) const {
  return RngStream(derived_, mix64(k) ^ 0xd1b54a32d192ed03ULL);
}

double RngStream::uniform() { return unif_(engine_); }
double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * unif_(engine_); }
double RngStream::normal() { return normal_(engine_); }
double RngStream::rademacher() { return (engine_() >> 63) ? 1.0 : -1.0; }

// ---------------------------------------------------------------- ConvexBody

ConvexBody ConvexBody::box(Vector lower, Vector upper) {
  if (lower.empty() || lower.size() != upper.size())
    throw DomainError("box: bounds must be nonempty and of equal dimension");
  for (std::size_t i = 0; i < lower.size(); ++i)
    if (!(lower[i] < upper[i])) throw DomainError("box: empty interior (need lower < upper)");
  ConvexBody b;
  b.kind_ = BodyKind::box;
  b.dim_ = lower.size();
  b.center_.resize(b.dim_);
  for (std::size_t i = 0; i < b.dim_; ++i) b.center_[i] = 0.5 * (lower[i] + upper[i]);
  b.lower_ = std::move(lower);
  b.upper_ = std::move(upper);
  return b;
}

ConvexBody ConvexBody::ball(Vector center, double radius) {
  if (center.empty()) throw DomainError("ball: empty center");
  if (!(radius > 0.0)) throw DomainError("ball: radius must be positive");
  ConvexBody b;
  b.kind_ = BodyKind::ball;
  b.dim_ = center.size();
  b.radius_ = radius;
  b.lower_.resize(b.dim_);
  b.upper_.resize(b.dim_);
  for (std::size_t i = 0; i < b.dim_; ++i) {
    b.lower_[i] = center[i] - radius;
    b.upper_[i] = center[i] + radius;
  }
  b.center_ = std::move(center);
  return b;
}

void ConvexBody::project_inplace(std::span<double> x) const {
  if (x.size() != dim_) throw DomainError("project: dimension mismatch");
  if (kind_ == BodyKind::box) {
    kernels::clamp(x, lower_, upper_);
    return;
  }
  Vector u(x.begin(), x.end());
  kernels::axpy(-1.0, center_, u);
  const double r = std::sqrt(kernels::sum_sq(u));
  if (r <= radius_) return;
  // Shrink until the rounded result lies inside, so projection is idempotent.
  for (double s = radius_ / r;; s = std::nextafter(s, 0.0) * (1.0 - 1e-15)) {
    for (std::size_t i = 0; i < dim_; ++i) x[i] = center_[i] + s * u[i];
    if (distance(Norm::euclidean(), x, center_) <= radius_) return;
  }
}

Vector ConvexBody::project(std::span<const double> x) const {
  Vector out(x.begin(), x.end());
  project_inplace(out);
  return out;
}

bool ConvexBody::contains(std::span<const double> x, double tol) const {
  if (x.size() != dim_) return false;
  if (kind_ == BodyKind::box) {
    for (std::size_t i = 0; i < dim_; ++i)
      if (x[i] < lower_[i] - tol || x[i] > upper_[i] + tol) return false;
    return true;
  }
  return distance(Norm::euclidean(), x, center_) <= radius_ + tol;
}

ConvexBody ConvexBody::dilate(double margin) const {
  if (kind_ == BodyKind::ball) return ball(center_, radius_ + margin);
  Vector lo = lower_, hi = upper_;
  for (std::size_t i = 0; i < dim_; ++i) {
    lo[i] -= margin;
    hi[i] += margin;
  }
  return box(lo, hi);
}

double ConvexBody::max_norm() const {
  if (kind_ == BodyKind::ball) return std::sqrt(kernels::sum_sq(center_)) + radius_;
  double s = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    const double m = std::max(std::fabs(lower_[i]), std::fabs(upper_[i]));
    s += m * m;
  }
  return std::sqrt(s);
}

Vector ConvexBody::sample_uniform(RngStream& rng) const {
  Vector x(dim_);
  if (kind_ == BodyKind::box) {
    for (std::size_t i = 0; i < dim_; ++i) x[i] = rng.uniform(lower_[i], upper_[i]);
    return x;
  }
  for (double& v : x) v = rng.normal();
  const double n = std::sqrt(kernels::sum_sq(x));
  const double r = radius_ * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim_));
  for (std::size_t i = 0; i < dim_; ++i) x[i] = center_[i] + r * x[i] / n;
  project_inplace(x);
  return x;
}

Vector project(const ConvexBody& body, std::span<const double> x) { return body.project(x); }

// ---------------------------------------------------------------- oracle contract

void validate_delta(double delta) {
  if (!(delta > 0.0 && delta <= 1.0))
    throw DomainError("delta must lie in (0, 1], got " + std::to_string(delta));
}

OracleResponse make_response(const OracleQuery& q, Vector g, Vector y, Norm norm,
                             std::optional<Vector> y_secondary) {
  if (distance(norm, q.x, y) > q.delta)
    throw std::logic_error("oracle response violates |x - y| <= delta");
  if (y_secondary && distance(norm, q.x, *y_secondary) > q.delta)
    throw std::logic_error("oracle response violates |x - y'| <= delta");
  return OracleResponse{std::move(g), std::move(y), std::move(y_secondary)};
}

std::string to_string(OracleType t) { return t == OracleType::type_I ? "type_I" : "type_II"; }

double OracleEnvelope::c1(double delta) const { return C1 * std::pow(delta, p); }
double OracleEnvelope::c2(double delta) const { return C2 * std::pow(delta, -q); }

std::pair<double, double> envelope_check(const OracleEnvelope& env, double delta) {
  validate_delta(delta);
  return {env.c1(delta), env.c2(delta)};
}

}  // namespace noisygrad
