#include "noisygrad/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <tuple>

#include "json.hpp"
#include "noisygrad/kernels.hpp"

namespace noisygrad {

// ---------------------------------------------------------------- names

std::string to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::spsa: return "spsa";
    case SchemeKind::rdsa: return "rdsa";
    case SchemeKind::sf: return "sf";
    case SchemeKind::surface: return "surface";
  }
  return "?";
}

SchemeKind parse_scheme(const std::string& s) {
  if (s == "spsa") return SchemeKind::spsa;
  if (s == "rdsa") return SchemeKind::rdsa;
  if (s == "sf") return SchemeKind::sf;
  if (s == "surface") return SchemeKind::surface;
  throw DomainError("unknown perturbation scheme '" + s + "'");
}

std::string to_string(Feedback f) { return f == Feedback::one_point ? "one_point" : "two_point"; }
std::string to_string(FunctionClass c) { return c == FunctionClass::c3 ? "c3" : "convex_smooth"; }

// ---------------------------------------------------------------- perturbations

void PerturbationScheme::sample(std::size_t d, RngStream& rng, double* U, double* V) const {
  switch (kind) {
    case SchemeKind::spsa:
      for (std::size_t i = 0; i < d; ++i) {
        U[i] = rng.rademacher();
        V[i] = 1.0 / U[i];
      }
      return;
    case SchemeKind::sf:
      for (std::size_t i = 0; i < d; ++i) V[i] = U[i] = rng.normal();
      return;
    case SchemeKind::rdsa:
    case SchemeKind::surface: {
      if (d == 1) {
        U[0] = rng.rademacher();
      } else {
        for (std::size_t i = 0; i < d; ++i) U[i] = rng.normal();
        const double n = std::sqrt(kernels::sum_sq({U, d}));
        for (std::size_t i = 0; i < d; ++i) U[i] /= n;
      }
      const double dd = static_cast<double>(d);
      if (kind == SchemeKind::rdsa) {
        const double s = std::sqrt(dd);
        for (std::size_t i = 0; i < d; ++i) V[i] = U[i] = U[i] * s;
      } else {
        for (std::size_t i = 0; i < d; ++i) V[i] = dd * U[i];
      }
      return;
    }
  }
}

// ---------------------------------------------------------------- moments

namespace {

using MomentKey = std::tuple<int, std::size_t, int>;

struct MomentCache {
  std::mutex mu;
  std::map<MomentKey, SchemeMoments> entries;
};

MomentCache& moment_cache() {
  static MomentCache c;
  return c;
}

SchemeMoments compute_moments(SchemeKind kind, std::size_t d, Norm norm) {
  // Per-sample norms are collected into columns and reduced with the vector
  // kernels.
  constexpr std::size_t kChunk = 4096;
  PerturbationScheme scheme{kind};
  RngStream rng(0x6d6f6d656e7473ULL, static_cast<std::uint64_t>(kind) * 1000003ULL + d * 31ULL +
                                         static_cast<std::uint64_t>(norm.kind()));
  Vector U(d), V(d), nu(kChunk), nv(kChunk), tmp(kChunk);
  double s_vu2 = 0, s_v2 = 0, s_vu3 = 0, s_v2u2 = 0, s_v2u4 = 0;
  const Norm dual = norm.dual();
  for (std::size_t done = 0; done < kMomentSamples; done += kChunk) {
    const std::size_t m = std::min(kChunk, kMomentSamples - done);
    for (std::size_t j = 0; j < m; ++j) {
      scheme.sample(d, rng, U.data(), V.data());
      nu[j] = norm(U);
      nv[j] = dual(V);
    }
    const std::span<const double> u(nu.data(), m), v(nv.data(), m);
    for (std::size_t j = 0; j < m; ++j) tmp[j] = u[j] * u[j];
    s_vu2 += kernels::dot(v, {tmp.data(), m});
    s_v2 += kernels::sum_sq(v);
    for (std::size_t j = 0; j < m; ++j) tmp[j] = v[j] * u[j] * u[j] * u[j];
    s_vu3 += kernels::sum({tmp.data(), m});
    for (std::size_t j = 0; j < m; ++j) tmp[j] = v[j] * u[j];
    s_v2u2 += kernels::sum_sq({tmp.data(), m});
    for (std::size_t j = 0; j < m; ++j) tmp[j] = v[j] * u[j] * u[j];
    s_v2u4 += kernels::sum_sq({tmp.data(), m});
  }
  const double n = static_cast<double>(kMomentSamples);
  return {s_vu2 / n, s_v2 / n, s_vu3 / n, s_v2u2 / n, s_v2u4 / n, kMomentSamples};
}

}  // namespace

SchemeMoments scheme_moments(SchemeKind kind, std::size_t d, Norm norm) {
  if (d == 0) throw DomainError("scheme_moments: d must be positive");
  const MomentKey key{static_cast<int>(kind), d, static_cast<int>(norm.kind())};
  auto& cache = moment_cache();
  {
    std::lock_guard lock(cache.mu);
    if (auto it = cache.entries.find(key); it != cache.entries.end()) return it->second;
  }
  SchemeMoments m = compute_moments(kind, d, norm);
  std::lock_guard lock(cache.mu);
  return cache.entries.emplace(key, m).first->second;
}

void save_moment_cache(const std::string& path) {
  auto& cache = moment_cache();
  nlohmann::json out = nlohmann::json::array();
  {
    std::lock_guard lock(cache.mu);
    for (const auto& [k, m] : cache.entries) {
      out.push_back({{"scheme", std::get<0>(k)}, {"d", std::get<1>(k)}, {"norm", std::get<2>(k)},
                     {"v_u2", m.v_u2}, {"v2", m.v2}, {"v_u3", m.v_u3}, {"v2_u2", m.v2_u2},
                     {"v2_u4", m.v2_u4}, {"samples", m.samples}});
    }
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write moment cache " + path);
  f << out.dump(2) << '\n';
}

std::size_t load_moment_cache(const std::string& path) {
  std::ifstream f(path);
  if (!f) return 0;
  const auto in = nlohmann::json::parse(f);
  auto& cache = moment_cache();
  std::lock_guard lock(cache.mu);
  std::size_t n = 0;
  for (const auto& e : in) {
    const MomentKey key{e.at("scheme").get<int>(), e.at("d").get<std::size_t>(), e.at("norm").get<int>()};
    cache.entries[key] = {e.at("v_u2"), e.at("v2"), e.at("v_u3"), e.at("v2_u2"), e.at("v2_u4"),
                          e.at("samples").get<std::size_t>()};
    ++n;
  }
  return n;
}

double ball_second_moment(std::size_t d) {
  const double dd = static_cast<double>(d);
  return dd / (dd + 2.0);
}

// ---------------------------------------------------------------- function bounds

double ValueRange::sup_abs() const { return std::max(std::fabs(min), std::fabs(max)); }

namespace {

constexpr int kGridPerAxis = 10'000;
constexpr int kRandomSearch = 100'000;

// Visits points of `body` on a regular grid (d <= 2) or by random search.
template <class Visit>
void scan_body(const ConvexBody& body, Visit&& visit) {
  const std::size_t d = body.dimension();
  Vector x(d);
  if (d <= 2) {
    const auto& lo = body.lower();
    const auto& hi = body.upper();
    auto coord = [&](std::size_t i, int k) {
      return lo[i] + (hi[i] - lo[i]) * static_cast<double>(k) / kGridPerAxis;
    };
    for (int a = 0; a <= kGridPerAxis; ++a) {
      x[0] = coord(0, a);
      if (d == 1) {
        if (body.contains(x)) visit(x);
        continue;
      }
      for (int b = 0; b <= kGridPerAxis; ++b) {
        x[1] = coord(1, b);
        if (body.contains(x)) visit(x);
      }
    }
    return;
  }
  RngStream rng(0x7363616eULL, d);
  for (int k = 0; k < kRandomSearch; ++k) visit(body.sample_uniform(rng));
}

}  // namespace

ValueRange value_range(const ObjectiveFunction& f) {
  const ConvexBody E = f.evaluable_domain();
  if (!f.components().empty() && E.kind() == BodyKind::box && f.components().size() > 1) {
    ValueRange r;
    for (const auto& c : f.components()) {
      const ValueRange rc = value_range(c);
      r.min += rc.min;
      r.max += rc.max;
    }
    return r;
  }
  ValueRange r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  scan_body(E, [&](const Vector& x) {
    const double v = f.eval(x);
    r.min = std::min(r.min, v);
    r.max = std::max(r.max, v);
  });
  return r;
}

double gradient_bound(const ObjectiveFunction& f, const ConvexBody& over, Norm norm) {
  const Norm dual = norm.dual();
  if (f.components().size() > 1 && over.kind() == BodyKind::box) {
    // Separable: the supremum is attained coordinatewise.
    Vector per(f.dimension());
    for (std::size_t i = 0; i < per.size(); ++i) {
      const ConvexBody Ki = ConvexBody::box({over.lower()[i]}, {over.upper()[i]});
      per[i] = gradient_bound(f.components()[i], Ki, Norm::euclidean());
    }
    return dual(per);
  }
  double best = 0.0;
  Vector g(f.dimension());
  scan_body(over, [&](const Vector& x) {
    f.grad_into(x, g);
    best = std::max(best, dual(g));
  });
  return best;
}

// ---------------------------------------------------------------- envelopes

OracleEnvelope envelope_for(FunctionClass cls, const NoiseModel& noise, Feedback feedback,
                            SchemeKind scheme, const ObjectiveFunction& f, Norm norm) {
  const std::size_t d = f.dimension();
  const double L = f.L();
  const double sigma2 = noise.sigma * noise.sigma;
  if (cls == FunctionClass::c3 && !f.B3())
    throw DomainError("envelope_for: c3 class needs a third-derivative bound");

  if (scheme == SchemeKind::surface) {
    if (feedback != Feedback::one_point || noise.kind != NoiseKind::uncontrolled)
      throw DomainError("envelope_for: surface scheme supports one-point uncontrolled feedback only");
    const SchemeMoments m = scheme_moments(scheme, d, norm);
    const double B0 = value_range(f).sup_abs();
    return {0.5 * L * ball_second_moment(d), 2.0, 4.0 * m.v2 * (sigma2 + B0 * B0), 2.0,
            OracleType::type_II};
  }

  const SchemeMoments m = scheme_moments(scheme, d, norm);
  OracleEnvelope env;
  env.type = OracleType::type_I;
  if (cls == FunctionClass::convex_smooth) {
    env.p = 1.0;
    env.C1 = 0.5 * L * m.v_u2;
  } else {
    env.p = 2.0;
    env.C1 = (*f.B3() / 6.0) * m.v_u3;
  }

  if (noise.kind == NoiseKind::controlled) {
    if (feedback != Feedback::two_point)
      throw DomainError("envelope_for: controlled noise needs two-point feedback");
    // Second-moment bound of the gradient of F(., psi) in the dual norm.
    double b1sq = std::pow(gradient_bound(f, f.evaluable_domain(), norm), 2);
    if (noise.family == ControlledFamily::tilt) {
      const double dd = static_cast<double>(d);
      const double psi_dual = norm.kind() == NormKind::max ? dd * dd : dd;
      b1sq += sigma2 * psi_dual;
    }
    env.q = 0.0;
    env.C2 = 2.0 * m.v2_u2 * b1sq + 0.5 * L * L * m.v2_u4;
    return env;
  }

  env.q = 2.0;
  if (feedback == Feedback::one_point) {
    const double B0 = value_range(f).sup_abs();
    env.C2 = 4.0 * m.v2 * (sigma2 + B0 * B0);
  } else {
    const double span = value_range(f).span();
    env.C2 = 4.0 * m.v2 * (2.0 * sigma2 + span * span);
  }
  return env;
}

// ---------------------------------------------------------------- oracle

EstimatorOracle::EstimatorOracle(ObjectiveFunction target, PerturbationScheme scheme,
                                 NoiseModel noise, Feedback feedback, FunctionClass cls, Norm norm)
    : EstimatorOracle(target, scheme, noise, feedback,
                      envelope_for(cls, noise, feedback, scheme.kind, target, norm), norm) {}

EstimatorOracle::EstimatorOracle(ObjectiveFunction target, PerturbationScheme scheme,
                                 NoiseModel noise, Feedback feedback, OracleEnvelope envelope,
                                 Norm norm)
    : target_(std::move(target)),
      scheme_(scheme),
      noise_(noise),
      feedback_(feedback),
      envelope_(envelope),
      norm_(norm) {
  if (noise_.sigma < 0.0) throw DomainError("noise sigma must be nonnegative");
  if (noise_.kind == NoiseKind::controlled && feedback_ != Feedback::two_point)
    throw DomainError("controlled noise needs two-point feedback");
}

void EstimatorOracle::check_query(const OracleQuery& q) const {
  validate_delta(q.delta);
  if (q.x.size() != dimension()) throw DomainError("query dimension mismatch");
  if (!target_.domain().contains(q.x, 1e-12)) throw DomainError("query point outside the domain");
}

std::pair<double, double> EstimatorOracle::observe(std::span<const double> z,
                                                   std::span<const double> psi,
                                                   RngStream& rng) const {
  const double fz = target_.eval(z);
  if (noise_.kind == NoiseKind::uncontrolled)
    return {fz, noise_.sigma > 0.0 ? noise_.sigma * rng.normal() : 0.0};
  if (noise_.family == ControlledFamily::additive) return {fz, noise_.sigma * psi[0]};
  return {fz, noise_.sigma * kernels::dot(psi, z)};
}

OracleResponse EstimatorOracle::query(const OracleQuery& q, RngStream& rng) const {
  if (feedback_ == Feedback::two_point) return two_point_estimate(*this, q, rng);
  if (scheme_.kind == SchemeKind::surface) return smoothing_estimate(*this, q, rng);
  return one_point_estimate(*this, q, rng);
}

Vector vicinity_point(std::span<const double> x, std::span<const double> U, double delta, Norm norm) {
  const double nu = norm(U);
  double s = delta * (nu > 1.0 ? 1.0 / nu : 1.0);
  Vector y(x.begin(), x.end());
  for (int attempt = 0; attempt < 64; ++attempt) {
    std::copy(x.begin(), x.end(), y.begin());
    kernels::axpy(s, U, y);
    if (distance(norm, x, y) <= delta) return y;
    s *= 1.0 - 4.0 * std::numeric_limits<double>::epsilon();
  }
  return Vector(x.begin(), x.end());
}

namespace {

OracleResponse one_point_impl(const EstimatorOracle& o, const OracleQuery& q, RngStream& rng) {
  o.check_query(q);
  const std::size_t d = o.dimension();
  Vector U(d), V(d), z(q.x);
  o.scheme().sample(d, rng, U.data(), V.data());
  kernels::axpy(q.delta, U, z);
  const auto [fz, noise] = o.observe(z, {}, rng);
  Vector g(d);
  kernels::axpy((fz + noise) / q.delta, V, g);
  return make_response(q, std::move(g), vicinity_point(q.x, U, q.delta, o.norm()), o.norm());
}

}  // namespace

OracleResponse one_point_estimate(const EstimatorOracle& o, const OracleQuery& q, RngStream& rng) {
  if (o.feedback() != Feedback::one_point) throw DomainError("one_point_estimate: wrong feedback");
  return one_point_impl(o, q, rng);
}

OracleResponse smoothing_estimate(const EstimatorOracle& o, const OracleQuery& q, RngStream& rng) {
  if (o.feedback() != Feedback::one_point || o.scheme().kind != SchemeKind::surface)
    throw DomainError("smoothing_estimate: needs one-point feedback with the surface scheme");
  return one_point_impl(o, q, rng);
}

OracleResponse two_point_estimate(const EstimatorOracle& o, const OracleQuery& q, RngStream& rng) {
  if (o.feedback() != Feedback::two_point) throw DomainError("two_point_estimate: wrong feedback");
  o.check_query(q);
  const std::size_t d = o.dimension();
  Vector U(d), V(d), zp(q.x), zm(q.x), psi;
  o.scheme().sample(d, rng, U.data(), V.data());
  kernels::axpy(q.delta, U, zp);
  kernels::axpy(-q.delta, U, zm);
  if (o.noise().kind == NoiseKind::controlled) {
    // One draw shared by both arms.
    psi.resize(o.noise().family == ControlledFamily::additive ? 1 : d);
    for (double& v : psi) v = rng.normal();
  }
  const auto [fp, np] = o.observe(zp, psi, rng);
  const auto [fm, nm] = o.observe(zm, psi, rng);
  Vector g(d);
  kernels::axpy(((fp - fm) + (np - nm)) / (2.0 * q.delta), V, g);
  Vector Um(U);
  for (double& v : Um) v = -v;
  return make_response(q, std::move(g), vicinity_point(q.x, U, q.delta, o.norm()), o.norm(),
                       vicinity_point(q.x, Um, q.delta, o.norm()));
}

ExactOracle::ExactOracle(ObjectiveFunction target) : target_(std::move(target)) {}

OracleResponse ExactOracle::query(const OracleQuery& q, RngStream&) const {
  validate_delta(q.delta);
  if (!target_.domain().contains(q.x, 1e-12)) throw DomainError("exact oracle: query outside K");
  return make_response(q, target_.grad(q.x), q.x, Norm::euclidean());
}

double smoothed_eval(const ObjectiveFunction& f, std::span<const double> x, double delta,
                     int samples, RngStream& rng) {
  if (samples < 1) throw DomainError("smoothed_eval: samples must be >= 1");
  const std::size_t d = f.dimension();
  const ConvexBody unit = ConvexBody::ball(Vector(d, 0.0), 1.0);
  Vector z(d);
  double s = 0.0;
  for (int k = 0; k < samples; ++k) {
    const Vector w = unit.sample_uniform(rng);
    std::copy(x.begin(), x.end(), z.begin());
    kernels::axpy(delta, w, z);
    s += f.eval(z);
  }
  return s / samples;
}

}  // namespace noisygrad
