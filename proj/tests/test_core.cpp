#include <cmath>

#include "doctest.h"
#include "noisygrad/core.hpp"

using namespace noisygrad;

TEST_CASE("box projection clamps componentwise") {
  const auto K = ConvexBody::box({-1.0, -1.0}, {1.0, 1.0});
  CHECK(project(K, Vector{0.5, 2.0}) == Vector{0.5, 1.0});
  CHECK(project(K, Vector{0.0, 0.0}) == Vector{0.0, 0.0});
  CHECK(project(K, Vector{-7.0, -0.25}) == Vector{-1.0, -0.25});
}

TEST_CASE("ball projection scales radially") {
  const auto B = ConvexBody::ball({0.0, 0.0}, 1.0);
  const Vector p = project(B, Vector{3.0, 4.0});
  CHECK(p[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.8).epsilon(1e-15));
  const auto B2 = ConvexBody::ball({1.0, 1.0}, 2.0);
  const Vector q = project(B2, Vector{1.0, 5.0});
  CHECK(q[0] == 1.0);
  CHECK(q[1] == doctest::Approx(3.0));
  CHECK(project(B2, Vector{1.5, 1.5}) == Vector{1.5, 1.5});
}

TEST_CASE("projection is idempotent, feasible and nonexpansive") {
  RngStream rng(42, 0);
  const std::vector<ConvexBody> bodies{ConvexBody::box({-1.0, 0.0, -3.0}, {1.0, 2.0, -1.0}),
                                       ConvexBody::ball({0.2, -0.3, 0.0}, 0.7)};
  for (const auto& K : bodies) {
    const auto big = K.dilate(5.0);
    for (int i = 0; i < 1000; ++i) {
      const Vector x = big.sample_uniform(rng), y = big.sample_uniform(rng);
      const Vector px = K.project(x), py = K.project(y);
      CHECK(K.contains(px, 1e-12));
      CHECK(K.project(px) == px);
      CHECK(distance(Norm::euclidean(), px, py) <= distance(Norm::euclidean(), x, y) + 1e-12);
    }
  }
}

TEST_CASE("bodies reject empty interiors") {
  CHECK_THROWS_AS(ConvexBody::box({0.0}, {0.0}), DomainError);
  CHECK_THROWS_AS(ConvexBody::box({0.0, 1.0}, {1.0}), DomainError);
  CHECK_THROWS_AS(ConvexBody::ball({0.0}, 0.0), DomainError);
  CHECK_THROWS_AS(ConvexBody::ball({}, 1.0), DomainError);
}

TEST_CASE("body geometry") {
  const auto K = ConvexBody::box({-1.0, -2.0}, {3.0, 1.0});
  CHECK(K.center() == Vector{1.0, -0.5});
  CHECK(K.max_norm() == doctest::Approx(std::sqrt(9.0 + 4.0)));
  const auto D = K.dilate(1.0);
  CHECK(D.lower() == Vector{-2.0, -3.0});
  CHECK(D.upper() == Vector{4.0, 2.0});
  const auto B = ConvexBody::ball({3.0, 4.0}, 1.0);
  CHECK(B.max_norm() == doctest::Approx(6.0));
  CHECK(B.dilate(0.5).radius() == 1.5);
  RngStream rng(1, 2);
  for (int i = 0; i < 200; ++i) CHECK(B.contains(B.sample_uniform(rng), 1e-12));
}

TEST_CASE("dual norms") {
  CHECK(dual_norm(Norm::euclidean(), Vector{3.0, 4.0}) == 5.0);
  CHECK(dual_norm(Norm::max(), Vector{1.0, -2.0, 3.0}) == 6.0);
  CHECK(dual_norm(Norm::one(), Vector{1.0, -2.0, 3.0}) == 3.0);
  for (Norm n : {Norm::euclidean(), Norm::max()}) {
    CHECK(dual_norm(n, Vector{0.0, 0.0}) == 0.0);
    CHECK(n.dual().dual() == n);
  }
  CHECK(Norm::max().dual() == Norm::one());
  CHECK(to_string(NormKind::max) == "max");
}

TEST_CASE("Hoelder inequality on samples") {
  RngStream rng(9, 9);
  for (Norm n : {Norm::euclidean(), Norm::max(), Norm::one()}) {
    for (int i = 0; i < 500; ++i) {
      Vector g(4), x(4);
      for (auto& v : g) v = rng.normal();
      for (auto& v : x) v = rng.normal();
      CHECK(std::fabs(dot(g, x)) <= dual_norm(n, g) * n(x) * (1.0 + 1e-14));
    }
  }
}

TEST_CASE("envelope values") {
  const OracleEnvelope a{1.0, 2.0, 1.0, 2.0, OracleType::type_I};
  auto [c1, c2] = envelope_check(a, 0.1);
  CHECK(c1 == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(c2 == doctest::Approx(100.0).epsilon(1e-14));
  const OracleEnvelope b{0.0, 1.0, 1.0, 0.0, OracleType::type_I};
  CHECK(envelope_check(b, 0.5) == std::pair{0.0, 1.0});
  const OracleEnvelope c{2.0, 1.0, 3.0, 2.0, OracleType::type_II};
  CHECK(envelope_check(c, 1.0) == std::pair{2.0, 3.0});
  CHECK_THROWS_AS(envelope_check(a, 0.0), DomainError);
  CHECK_THROWS_AS(envelope_check(a, 1.5), DomainError);
  CHECK_THROWS_AS(envelope_check(a, -0.1), DomainError);
  CHECK_THROWS_AS(validate_delta(std::nan("")), DomainError);
  // Monotonicity on (0, 1].
  double prev1 = 0.0, prev2 = 1e300;
  for (int i = 1; i <= 100; ++i) {
    const double d = i / 100.0;
    CHECK(a.c1(d) >= prev1);
    CHECK(a.c2(d) <= prev2);
    prev1 = a.c1(d);
    prev2 = a.c2(d);
  }
}

TEST_CASE("responses enforce the delta-vicinity") {
  const OracleQuery q{{0.0, 0.0}, 0.5};
  CHECK_NOTHROW(make_response(q, {1.0, 1.0}, {0.3, 0.4}, Norm::euclidean()));
  CHECK_THROWS_AS(make_response(q, {1.0, 1.0}, {0.4, 0.4}, Norm::euclidean()), std::logic_error);
  CHECK_NOTHROW(make_response(q, {1.0, 1.0}, {0.5, 0.5}, Norm::max()));
  CHECK_THROWS_AS(make_response(q, {0.0, 0.0}, {0.0, 0.0}, Norm::euclidean(), Vector{0.0, 0.6}),
                  std::logic_error);
}

TEST_CASE("mixing function matches the splitmix64 reference output") {
  // First output of splitmix64 seeded with 0.
  CHECK(mix64(0) == 0xe220a8397b1dcdafULL);
}

TEST_CASE("streams are deterministic and distinct ids differ") {
  RngStream a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  CHECK(a.derived_seed() == b.derived_seed());
  CHECK(a.derived_seed() != c.derived_seed());
  CHECK(a.derived_seed() != d.derived_seed());
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal(), y = b.normal();
    CHECK(x == y);
  }
  CHECK(a.uniform() == b.uniform());
  CHECK(a.rademacher() == b.rademacher());
  CHECK(a.substream(5).derived_seed() == b.substream(5).derived_seed());
  CHECK(a.substream(5).derived_seed() != a.substream(6).derived_seed());
}

TEST_CASE("stream draws have the advertised moments") {
  RngStream r(11, 0);
  const int n = 200'000;
  double su = 0, sn = 0, sn2 = 0, sr = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    su += u;
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
    sr += r.rademacher();
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::fabs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(std::fabs(sr / n) < 0.01);
  // Independent ids are uncorrelated.
  RngStream s(11, 1), t(11, 2);
  double cross = 0;
  for (int i = 0; i < n; ++i) cross += s.normal() * t.normal();
  CHECK(std::fabs(cross / n) < 0.01);
}
