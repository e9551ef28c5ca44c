#include <cmath>

#include "doctest.h"
#include "noisygrad/testbed.hpp"

using namespace noisygrad;

namespace {

double at(const ObjectiveFunction& f, double x) { return f.eval(Vector{x}); }
double dat(const ObjectiveFunction& f, double x) { return f.grad(Vector{x})[0]; }

std::vector<ObjectiveFunction> all_testbeds() {
  return {quadratic({1.0}, {1.5}),
          quadratic({2.0, 0.5}, {0.1, -0.3}),
          quadratic({1.0, 4.0}, {2.0, 2.0}, ConvexBody::ball({0.0, 0.0}, 1.0)),
          kinked_quadratic(1.0, 1.0, 0.0),
          exponential_bowl(2),
          affine({1.0, -2.0}, 0.5),
          softabs(1, 0.1),
          softabs(-1, 0.3),
          sc_pair(1, 0.2),
          separable({softabs(1, 0.1), sc_pair(-1, 0.2)})};
}

}  // namespace

TEST_CASE("softabs closed forms") {
  const auto f = softabs(1, 0.1);
  CHECK(at(f, 1.0) == doctest::Approx(2 * 0.01 * std::log(2.0)).epsilon(1e-14));
  CHECK(at(f, 1.0) == doctest::Approx(0.013863).epsilon(1e-4));
  CHECK(f.f_star() == doctest::Approx(2 * 0.01 * std::log(2.0)).epsilon(1e-14));
  CHECK((*f.x_star())[0] == 1.0);
  CHECK(f.L() == 0.5);
  CHECK(f.mu() == 0.0);
  for (double eps : {0.05, 0.1, 0.7}) CHECK(dat(softabs(1, eps), 1.0) == 0.0);
  CHECK(dat(f, 50.0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(dat(f, -50.0) == doctest::Approx(-0.1).epsilon(1e-12));
  // Stable far outside the logistic range.
  CHECK(std::isfinite(at(f, -500.0)));
  CHECK(at(f, -500.0) == doctest::Approx(0.1 * 501.0).epsilon(1e-12));
  // Mirror symmetry between the two members.
  const auto g = softabs(-1, 0.1);
  for (double x : {-0.9, -0.2, 0.0, 0.4}) CHECK(at(g, x) == doctest::Approx(at(f, -x)).epsilon(1e-14));
  CHECK(*f.B3() == doctest::Approx(1.0 / (3.0 * std::sqrt(3.0) * 0.1)));
}

TEST_CASE("softabs curvature and separation") {
  for (int v : {1, -1}) {
    const double eps = 0.2;
    const auto f = softabs(v, eps);
    const double h = 1e-4;
    for (int i = 0; i < 10'000; ++i) {
      const double x = -1.0 + 2.0 * i / 9999.0;
      const double d2 = (at(f, x + h) - 2 * at(f, x) + at(f, x - h)) / (h * h);
      CHECK(d2 >= -1e-6);
      CHECK(d2 <= 0.5 + 1e-6);
      if (x * v <= 0.0) CHECK(at(f, x) - f.f_star() > eps / 2.0);
    }
  }
}

TEST_CASE("sc_pair closed forms and separation") {
  const auto f = sc_pair(1, 0.2);
  CHECK(at(f, 0.2) == doctest::Approx(-0.02).epsilon(1e-14));
  CHECK(f.f_star() == doctest::Approx(-0.02).epsilon(1e-14));
  CHECK(dat(sc_pair(-1, 0.2), 0.0) == doctest::Approx(0.2));
  CHECK(dat(f, 0.2) == doctest::Approx(0.0));
  CHECK(f.L() == 1.0);
  CHECK(f.mu() == 1.0);
  for (int v : {1, -1}) {
    const auto g = sc_pair(v, 0.3);
    for (int i = 0; i <= 1000; ++i) {
      const double x = -1.0 + 2.0 * i / 1000.0;
      if (x * v < 0.0) CHECK(at(g, x) - g.f_star() >= 0.045 - 1e-15);
    }
  }
}

TEST_CASE("separable composition") {
  const auto a = softabs(1, 0.1), b = softabs(-1, 0.1);
  const auto f = separable({a, b});
  CHECK(f.dimension() == 2);
  CHECK(f.eval(Vector{1.0, -1.0}) == doctest::Approx(4 * 0.01 * std::log(2.0)).epsilon(1e-14));
  CHECK(f.f_star() == doctest::Approx(4 * 0.01 * std::log(2.0)).epsilon(1e-14));
  const auto same = separable({a, a});
  CHECK(same.eval(Vector{0.0, 0.0}) == 2 * at(a, 0.0));
  const auto s3 = separable({sc_pair(1, 0.2), sc_pair(-1, 0.2), sc_pair(1, 0.5)});
  const Vector g = s3.grad(*s3.x_star());
  for (double gi : g) CHECK(gi == doctest::Approx(0.0));
  CHECK(s3.L() == 1.0);
  CHECK(separable({softabs(1, 0.1), sc_pair(1, 0.1)}).mu() == 0.0);
  const Vector x{0.3, -0.7};
  const Vector gx = f.grad(x);
  CHECK(gx[0] == dat(a, 0.3));
  CHECK(gx[1] == dat(b, -0.7));
  CHECK_THROWS_AS(separable({}), DomainError);
  CHECK(f.components().size() == 2);
}

TEST_CASE("quadratic constants and constrained minimizer") {
  const auto f = quadratic({1.0, 1.0}, {0.0, 0.0});
  CHECK(f.eval(Vector{1.0, 1.0}) == 1.0);
  const auto g = quadratic({2.0, 0.5}, {0.0, 0.0});
  CHECK(g.L() == 2.0);
  CHECK(g.mu() == 0.5);
  const auto h = quadratic({1.0}, {-1.0}, ConvexBody::box({-2.0}, {2.0}));
  CHECK((*h.x_star())[0] == doctest::Approx(1.0));
  CHECK(h.f_star() == doctest::Approx(-0.5));
  // Boundary optimum of the calibrated rate testbed.
  const auto r = quadratic({1.0}, {1.5});
  CHECK((*r.x_star())[0] == -1.0);
  CHECK(r.f_star() == doctest::Approx(-1.0));
  // Ball constraint: KKT point on the sphere.
  const auto bq = quadratic({1.0, 4.0}, {2.0, 2.0}, ConvexBody::ball({0.0, 0.0}, 1.0));
  const Vector xs = *bq.x_star();
  CHECK(std::hypot(xs[0], xs[1]) == doctest::Approx(1.0));
  RngStream rng(3, 3);
  for (int i = 0; i < 2000; ++i) CHECK(bq.eval(bq.domain().sample_uniform(rng)) >= bq.f_star() - 1e-12);
}

TEST_CASE("kinked quadratic and exponential bowl") {
  const auto k = kinked_quadratic(1.0, 1.0, 0.0);
  CHECK(k.L() == 2.0);
  CHECK(k.mu() == 1.0);
  CHECK(at(k, 0.5) == doctest::Approx(0.25));
  CHECK(at(k, -0.5) == doctest::Approx(0.125));
  const auto e = exponential_bowl(1);
  CHECK(at(e, 0.0) == 0.0);
  CHECK(e.f_star() == 0.0);
  CHECK(at(e, 1.0) == doctest::Approx(std::exp(1.0) - 2.0));
  CHECK(e.L() == doctest::Approx(std::exp(2.0)));
  CHECK(*e.B3() == doctest::Approx(std::exp(2.0)));
}

TEST_CASE("gradients match finite differences on all testbeds") {
  RngStream rng(5, 0);
  for (const auto& f : all_testbeds()) {
    CAPTURE(f.name());
    CHECK(finite_diff_check(f, 100, rng) <= 1e-5);
  }
  CHECK(finite_diff_check(quadratic({1.0, 2.0}, {0.5, 0.5}), 100, rng) <= 1e-6);
  CHECK(finite_diff_check(softabs(1, 0.1), 100, rng) <= 1e-4);
  CHECK(finite_diff_check(affine({0.0}, 3.0), 100, rng) == 0.0);
}

TEST_CASE("convexity and smoothness on samples") {
  RngStream rng(6, 0);
  for (const auto& f : all_testbeds()) {
    CAPTURE(f.name());
    const auto E = f.evaluable_domain();
    for (int i = 0; i < 500; ++i) {
      const Vector x = E.sample_uniform(rng), y = E.sample_uniform(rng);
      const Vector g = f.grad(x);
      double lin = f.eval(x), sq = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) {
        lin += g[j] * (y[j] - x[j]);
        sq += (y[j] - x[j]) * (y[j] - x[j]);
      }
      CHECK(f.eval(y) >= lin - 1e-9);
      CHECK(f.eval(y) <= lin + 0.5 * f.L() * sq + 1e-9);
      CHECK(f.eval(y) >= lin + 0.5 * f.mu() * sq - 1e-9);
    }
  }
}

TEST_CASE("optimum values are attained and minimal") {
  RngStream rng(8, 0);
  for (const auto& f : all_testbeds()) {
    CAPTURE(f.name());
    if (f.x_star()) CHECK(f.eval(*f.x_star()) == doctest::Approx(f.f_star()).epsilon(1e-12));
    for (int i = 0; i < 500; ++i) CHECK(f.eval(f.domain().sample_uniform(rng)) >= f.f_star() - 1e-12);
  }
}
