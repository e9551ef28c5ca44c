#include <cmath>

#include "doctest.h"
#include "noisygrad/estimators.hpp"
#include "noisygrad/harness.hpp"

using namespace noisygrad;

namespace {

struct Mean {
  double sum = 0, sum2 = 0;
  long n = 0;
  void add(double v) {
    sum += v;
    sum2 += v * v;
    ++n;
  }
  double mean() const { return sum / n; }
  double se() const { return std::sqrt((sum2 / n - mean() * mean()) / (n - 1)); }
};

EstimatorOracle make(const ObjectiveFunction& f, SchemeKind s, NoiseModel noise, Feedback fb,
                     FunctionClass cls = FunctionClass::convex_smooth) {
  return EstimatorOracle(f, PerturbationScheme{s}, noise, fb, cls);
}

}  // namespace

TEST_CASE("perturbation schemes satisfy E[V U^T] = I and E[V] = 0") {
  for (SchemeKind k : {SchemeKind::spsa, SchemeKind::rdsa, SchemeKind::sf, SchemeKind::surface}) {
    CAPTURE(to_string(k));
    const std::size_t d = 2;
    RngStream rng(1, static_cast<std::uint64_t>(k));
    PerturbationScheme sch{k};
    std::vector<Mean> vu(d * d), v(d);
    Vector U(d), V(d);
    for (long r = 0; r < 1'000'000; ++r) {
      sch.sample(d, rng, U.data(), V.data());
      for (std::size_t i = 0; i < d; ++i) {
        v[i].add(V[i]);
        for (std::size_t j = 0; j < d; ++j) vu[i * d + j].add(V[i] * U[j]);
      }
    }
    for (std::size_t i = 0; i < d; ++i) {
      CHECK(std::fabs(v[i].mean()) <= 5 * v[i].se());
      for (std::size_t j = 0; j < d; ++j) {
        const auto& m = vu[i * d + j];
        CHECK(std::fabs(m.mean() - (i == j ? 1.0 : 0.0)) <= 5 * m.se() + 1e-15);
      }
    }
  }
}

TEST_CASE("scheme sample shapes") {
  RngStream rng(2, 0);
  Vector U(3), V(3);
  PerturbationScheme{SchemeKind::spsa}.sample(3, rng, U.data(), V.data());
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::fabs(U[i]) == 1.0);
    CHECK(V[i] == 1.0 / U[i]);
  }
  PerturbationScheme{SchemeKind::rdsa}.sample(3, rng, U.data(), V.data());
  CHECK(std::hypot(U[0], U[1], U[2]) == doctest::Approx(std::sqrt(3.0)));
  PerturbationScheme{SchemeKind::surface}.sample(3, rng, U.data(), V.data());
  CHECK(std::hypot(U[0], U[1], U[2]) == doctest::Approx(1.0));
  CHECK(V[0] == doctest::Approx(3.0 * U[0]));
  Vector u1(1), v1(1);
  PerturbationScheme{SchemeKind::surface}.sample(1, rng, u1.data(), v1.data());
  CHECK(std::fabs(u1[0]) == 1.0);
  CHECK(v1[0] == u1[0]);
  CHECK(parse_scheme("rdsa") == SchemeKind::rdsa);
  CHECK_THROWS(parse_scheme("nope"));
}

TEST_CASE("envelope cells") {
  const auto q = quadratic({1.0}, {0.5});
  const auto e = exponential_bowl(1);
  const auto unc = NoiseModel::uncontrolled(1.0);
  auto env = envelope_for(FunctionClass::convex_smooth, unc, Feedback::one_point, SchemeKind::sf, q);
  CHECK(env.p == 1.0);
  CHECK(env.q == 2.0);
  CHECK(env.type == OracleType::type_I);
  env = envelope_for(FunctionClass::c3, unc, Feedback::two_point, SchemeKind::spsa, e);
  CHECK(env.p == 2.0);
  CHECK(env.q == 2.0);
  env = envelope_for(FunctionClass::convex_smooth, NoiseModel::controlled(ControlledFamily::additive, 1.0),
                     Feedback::two_point, SchemeKind::spsa, q);
  CHECK(env.p == 1.0);
  CHECK(env.q == 0.0);
  env = envelope_for(FunctionClass::convex_smooth, unc, Feedback::one_point, SchemeKind::surface, q);
  CHECK(env.p == 2.0);
  CHECK(env.q == 2.0);
  CHECK(env.type == OracleType::type_II);
  // Smoothing gap constant in one dimension: (L/2) E|W|^2 = (1/2)(1/3).
  CHECK(env.C1 == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK_THROWS_AS(envelope_for(FunctionClass::convex_smooth, NoiseModel::controlled(ControlledFamily::tilt, 1.0),
                               Feedback::one_point, SchemeKind::spsa, q),
                  DomainError);
  CHECK_THROWS_AS(envelope_for(FunctionClass::convex_smooth, unc, Feedback::two_point, SchemeKind::surface, q),
                  DomainError);
  CHECK_THROWS_AS(envelope_for(FunctionClass::c3, unc, Feedback::two_point, SchemeKind::spsa,
                               kinked_quadratic(1.0, 1.0, 0.0)),
                  DomainError);
}

TEST_CASE("scheme moments have closed forms for Rademacher and sphere draws") {
  // SPSA in d dims, Euclidean: |V| = |U| = sqrt d exactly.
  const auto m = scheme_moments(SchemeKind::spsa, 3);
  CHECK(m.v2 == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(m.v_u2 == doctest::Approx(std::pow(3.0, 1.5)).epsilon(1e-12));
  CHECK(m.v2_u4 == doctest::Approx(27.0).epsilon(1e-12));
  const auto s = scheme_moments(SchemeKind::surface, 2);
  CHECK(s.v2 == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(ball_second_moment(1) == doctest::Approx(1.0 / 3.0));
  CHECK(ball_second_moment(3) == doctest::Approx(0.6));
  // Gaussian: E|U|^2 = d within Monte Carlo error.
  CHECK(scheme_moments(SchemeKind::sf, 2).v2 == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("one-point estimator examples") {
  const auto zero = affine({0.0}, 0.0);
  const auto cst = affine({0.0}, 2.0);
  RngStream rng(3, 0);
  for (SchemeKind k : {SchemeKind::spsa, SchemeKind::rdsa, SchemeKind::sf}) {
    const auto o = make(zero, k, NoiseModel::none(), Feedback::one_point);
    for (int i = 0; i < 100; ++i) CHECK(o.query({{0.3}, 0.2}, rng).g[0] == 0.0);
  }
  const auto o = make(cst, SchemeKind::spsa, NoiseModel::none(), Feedback::one_point);
  Mean m;
  for (int i = 0; i < 100'000; ++i) {
    const auto r = o.query({{0.0}, 0.5}, rng);
    CHECK(std::fabs(r.g[0]) == doctest::Approx(4.0));
    m.add(r.g[0]);
  }
  CHECK(std::fabs(m.mean()) <= 5 * m.se());
  // Quadratic at the origin with Gaussian perturbations: bias within C1 delta.
  const auto q = quadratic({1.0}, {0.0});
  const auto sf = make(q, SchemeKind::sf, NoiseModel::none(), Feedback::one_point);
  RngStream prng(3, 1);
  const auto pr = probe_bias_variance(sf, Vector{0.0}, 0.1, 1'000'000, prng);
  CHECK(pr.bias_est <= sf.envelope().c1(0.1) + 5 * pr.bias_se);
}

TEST_CASE("two-point estimator examples") {
  RngStream rng(4, 0);
  const auto lin = affine({2.5}, 1.0);
  const auto o = make(lin, SchemeKind::spsa, NoiseModel::none(), Feedback::two_point);
  for (int i = 0; i < 100; ++i) CHECK(o.query({{0.1}, 0.3}, rng).g[0] == doctest::Approx(2.5).epsilon(1e-14));
  const auto q = quadratic({1.0, 1.0}, {0.0, 0.0});
  for (SchemeKind k : {SchemeKind::spsa, SchemeKind::rdsa, SchemeKind::sf}) {
    const auto o2 = make(q, k, NoiseModel::none(), Feedback::two_point);
    for (int i = 0; i < 100; ++i) {
      const auto r = o2.query({{0.0, 0.0}, 0.4}, rng);
      CHECK(r.g[0] == 0.0);
      CHECK(r.g[1] == 0.0);
      REQUIRE(r.y_secondary);
      CHECK(r.y[0] == -(*r.y_secondary)[0]);
    }
  }
}

TEST_CASE("controlled additive noise cancels exactly") {
  const auto f = exponential_bowl(2);
  const auto clean = make(f, SchemeKind::spsa, NoiseModel::none(), Feedback::two_point);
  for (double sigma : {0.1, 1.0, 50.0}) {
    const auto noisy = make(f, SchemeKind::spsa, NoiseModel::controlled(ControlledFamily::additive, sigma),
                            Feedback::two_point);
    for (int i = 0; i < 200; ++i) {
      RngStream a(5, i), b(5, i);
      const auto rn = noisy.query({{0.2, -0.1}, 0.3}, a);
      const auto rc = clean.query({{0.2, -0.1}, 0.3}, b);
      CHECK(rn.g == rc.g);
    }
  }
}

TEST_CASE("smoothing estimator examples") {
  const auto cst = affine({0.0}, 1.7);
  const auto o = make(cst, SchemeKind::surface, NoiseModel::none(), Feedback::one_point);
  RngStream rng(6, 0);
  Mean m;
  for (int i = 0; i < 100'000; ++i) m.add(o.query({{0.0}, 0.5}, rng).g[0]);
  CHECK(std::fabs(m.mean()) <= 5 * m.se());
  // f = x^2/2: E[G] at 0.3 equals the smoothed derivative 0.3.
  const auto q = quadratic({1.0}, {0.0});
  const auto s = make(q, SchemeKind::surface, NoiseModel::none(), Feedback::one_point);
  Mean g;
  for (int i = 0; i < 400'000; ++i) g.add(s.query({{0.3}, 0.1}, rng).g[0]);
  CHECK(std::fabs(g.mean() - 0.3) <= 5 * g.se() + 1e-12);
}

TEST_CASE("smoothed evaluation") {
  const auto q = quadratic({1.0}, {0.0});
  RngStream rng(7, 0);
  const double x = 0.4;
  const double fs = smoothed_eval(q, Vector{x}, 0.3, 2'000'000, rng);
  CHECK(fs - q.eval(Vector{x}) == doctest::Approx(0.015).epsilon(0.02));
  const auto lin = affine({1.0, -2.0}, 0.5);
  const double fl = smoothed_eval(lin, Vector{0.1, 0.2}, 0.5, 100'000, rng);
  // Var of c.(delta W) with W uniform in the unit disc is delta^2 |c|^2 / 4.
  const double se = 0.5 * std::sqrt(5.0) / 2.0 / std::sqrt(100'000.0);
  CHECK(std::fabs(fl - lin.eval(Vector{0.1, 0.2})) <= 5 * se);
  for (const auto& f : {quadratic({1.0, 2.0}, {0.3, 0.3}), exponential_bowl(2)}) {
    const Vector x0{0.1, -0.2};
    const double gap = std::fabs(smoothed_eval(f, x0, 1e-3, 10'000, rng) - f.eval(x0));
    CHECK(gap <= 1e-6 * f.L());
  }
}

TEST_CASE("evaluation points stay in the delta-vicinity") {
  const auto f = exponential_bowl(3);
  RngStream rng(8, 0);
  for (SchemeKind k : {SchemeKind::spsa, SchemeKind::rdsa, SchemeKind::sf, SchemeKind::surface}) {
    for (Norm n : {Norm::euclidean(), Norm::max()}) {
      const Feedback fb = k == SchemeKind::surface ? Feedback::one_point : Feedback::two_point;
      const EstimatorOracle o(f, PerturbationScheme{k}, NoiseModel::uncontrolled(1.0), fb,
                              FunctionClass::convex_smooth, n);
      for (int i = 0; i < 2000; ++i) {
        const double delta = 0.01 + 0.99 * rng.uniform();
        const Vector x = f.domain().sample_uniform(rng);
        const auto r = o.query({x, delta}, rng);
        CHECK(distance(n, x, r.y) <= delta);
        if (r.y_secondary) CHECK(distance(n, x, *r.y_secondary) <= delta);
      }
    }
  }
  // Vicinity point is unbiased about x.
  Mean m;
  PerturbationScheme sf{SchemeKind::sf};
  Vector U(1), V(1);
  for (int i = 0; i < 200'000; ++i) {
    sf.sample(1, rng, U.data(), V.data());
    m.add(vicinity_point(Vector{0.2}, U, 0.5, Norm::euclidean())[0]);
  }
  CHECK(std::fabs(m.mean() - 0.2) <= 5 * m.se());
}

TEST_CASE("invalid queries are rejected") {
  const auto f = quadratic({1.0}, {0.0});
  const auto o = make(f, SchemeKind::spsa, NoiseModel::none(), Feedback::one_point);
  RngStream rng(9, 0);
  CHECK_THROWS_AS(o.query({{0.0}, 0.0}, rng), DomainError);
  CHECK_THROWS_AS(o.query({{0.0}, 1.5}, rng), DomainError);
  CHECK_THROWS_AS(o.query({{2.0}, 0.5}, rng), DomainError);
  CHECK_THROWS_AS(o.query({{0.0, 0.0}, 0.5}, rng), DomainError);
  CHECK_THROWS_AS(make(f, SchemeKind::spsa, NoiseModel::controlled(ControlledFamily::tilt, 1.0), Feedback::one_point),
                  DomainError);
}

TEST_CASE("queries are deterministic given the stream") {
  const auto f = exponential_bowl(2);
  const auto o = make(f, SchemeKind::rdsa, NoiseModel::uncontrolled(2.0), Feedback::two_point);
  RngStream a(10, 1), b(10, 1);
  for (int i = 0; i < 50; ++i) {
    const auto ra = o.query({{0.1, 0.1}, 0.2}, a), rb = o.query({{0.1, 0.1}, 0.2}, b);
    CHECK(ra.g == rb.g);
    CHECK(ra.y == rb.y);
  }
}

TEST_CASE("exact oracle returns the gradient") {
  const auto f = exponential_bowl(2);
  const ExactOracle o(f);
  RngStream rng(11, 0);
  const auto r = o.query({{0.3, -0.2}, 0.5}, rng);
  CHECK(r.g == f.grad(Vector{0.3, -0.2}));
  CHECK(r.y == Vector{0.3, -0.2});
  CHECK(o.envelope().C1 == 0.0);
  CHECK(o.envelope().C2 == 0.0);
}

TEST_CASE("value range and gradient bound") {
  const auto q = quadratic({1.0}, {1.5});
  const auto vr = value_range(q);
  // Evaluable band [-2, 2]: min at -1.5, max at 2.
  CHECK(vr.min == doctest::Approx(-1.125).epsilon(1e-6));
  CHECK(vr.max == doctest::Approx(5.0));
  CHECK(vr.span() == doctest::Approx(6.125).epsilon(1e-6));
  CHECK(gradient_bound(q, q.domain(), Norm::euclidean()) == doctest::Approx(2.5));
}

TEST_CASE("moment cache persists") {
  const auto before = scheme_moments(SchemeKind::rdsa, 2);
  const std::string path = "moment_cache_test.json";
  save_moment_cache(path);
  CHECK(load_moment_cache(path) >= 1);
  const auto after = scheme_moments(SchemeKind::rdsa, 2);
  CHECK(after.v2 == before.v2);
  CHECK(after.v2_u4 == before.v2_u4);
  std::remove(path.c_str());
}
