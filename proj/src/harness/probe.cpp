#include <algorithm>
#include <cmath>

#include "noisygrad/harness.hpp"
#include "noisygrad/kernels.hpp"

namespace noisygrad {

namespace {

double batch_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = kernels::sum(v) / n;
  return std::sqrt(kernels::centered_sum_sq(v, mean) / (n - 1.0) / n);
}

}  // namespace

ProbeResult probe_bias_variance(const GradientOracle& oracle, std::span<const double> x,
                                double delta, long reps, RngStream& rng) {
  if (reps < 1000) throw DomainError("probe_bias_variance: reps must be at least 1000");
  const std::size_t d = oracle.dimension();
  const std::size_t R = static_cast<std::size_t>(reps);
  const Norm dual = oracle.norm().dual();

  // Column-major sample store: G[i * R + k] is coordinate i of draw k.
  std::vector<double> G(d * R);
  OracleQuery q{Vector(x.begin(), x.end()), delta};
  for (std::size_t k = 0; k < R; ++k) {
    const OracleResponse r = oracle.query(q, rng);
    for (std::size_t i = 0; i < d; ++i) G[i * R + k] = r.g[i];
  }

  const std::size_t B = kBatches;
  auto batch_begin = [&](std::size_t b) { return b * R / B; };
  Vector mean(d), bias_vec(d), se_vec(d);
  const Vector grad = oracle.reference_gradient(x);
  std::vector<double> bm(B);
  for (std::size_t i = 0; i < d; ++i) {
    const std::span<const double> col(G.data() + i * R, R);
    mean[i] = kernels::sum(col) / static_cast<double>(R);
    bias_vec[i] = mean[i] - grad[i];
    for (std::size_t b = 0; b < B; ++b) {
      const auto lo = batch_begin(b), hi = batch_begin(b + 1);
      bm[b] = kernels::sum(col.subspan(lo, hi - lo)) / static_cast<double>(hi - lo);
    }
    se_vec[i] = batch_se(bm);
  }

  // Per-draw squared dual deviation from the overall mean.
  std::vector<double> dev(R);
  if (d == 1 && dual.kind() != NormKind::max) {
    for (std::size_t k = 0; k < R; ++k) {
      const double e = G[k] - mean[0];
      dev[k] = e * e;
    }
  } else {
    Vector e(d);
    for (std::size_t k = 0; k < R; ++k) {
      for (std::size_t i = 0; i < d; ++i) e[i] = G[i * R + k] - mean[i];
      const double n = dual(e);
      dev[k] = n * n;
    }
  }
  for (std::size_t b = 0; b < B; ++b) {
    const auto lo = batch_begin(b), hi = batch_begin(b + 1);
    bm[b] = kernels::sum(std::span<const double>(dev).subspan(lo, hi - lo)) / static_cast<double>(hi - lo);
  }

  ProbeResult out;
  out.delta = delta;
  out.replications = reps;
  out.bias_est = dual(bias_vec);
  out.bias_se = dual(se_vec);
  out.var_est = kernels::sum(dev) / static_cast<double>(R);
  out.var_se = batch_se(bm);
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("loglog_slope: need >= 2 paired points");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("loglog_slope: values must be positive");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const double mx = kernels::sum(lx) / lx.size(), my = kernels::sum(ly) / ly.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
  std::vector<HorizonStat> stats;
  for (const auto& [n, e] : points) stats.push_back({static_cast<long>(std::llround(n)), e, 0.0});
  return fit_rate(stats);
}

RateFit fit_rate(const std::vector<HorizonStat>& stats) {
  if (stats.size() < 3) throw DomainError("fit_rate: need at least 3 horizons");
  RateFit fit;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    if (!(stats[i].mean > 0.0)) throw DomainError("fit_rate: errors must be positive");
    if (i > 0 && !(stats[i].n > stats[i - 1].n)) throw DomainError("fit_rate: horizons must increase");
    fit.horizons.push_back(stats[i].n);
    lx.push_back(std::log(static_cast<double>(stats[i].n)));
    ly.push_back(std::log(stats[i].mean));
  }
  fit.errors = stats;
  const double m = static_cast<double>(lx.size());
  const double mx = kernels::sum(lx) / m, my = kernels::sum(ly) / m;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  const double slope = sxy / sxx;
  const double icpt = my - slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (icpt + slope * lx[i]);
    ss_res += r * r;
  }
  const double ss_tot = kernels::centered_sum_sq(ly, my);
  fit.fitted_exponent = -slope;
  fit.fitted_intercept = icpt;
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

}  // namespace noisygrad
