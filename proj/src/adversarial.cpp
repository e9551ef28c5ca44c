#include "noisygrad/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace noisygrad {

std::string to_string(HardClass c) {
  return c == HardClass::convex_smooth ? "convex_smooth" : "strongly_convex";
}

double convex_eps_limit() { return 1.0 / (4.0 * std::numbers::ln2); }

namespace {

double softabs_slope(int v, double x, double eps) { return eps * std::tanh(0.5 * (x - v) / eps); }

double shift(double delta, const OracleEnvelope& env, double eps) {
  return std::min(eps, env.C1 * std::pow(delta, env.p));
}

void check_positive(double value, const char* what) {
  if (!(value > 0.0)) throw DomainError(std::string(what) + " must be positive");
}

}  // namespace

double gamma_mean_convex(int v, double x, double delta, const OracleEnvelope& env, double eps) {
  const double m = shift(delta, env, eps);
  const double up = softabs_slope(+1, x, eps) + m;    // f'_+ moved up
  const double down = softabs_slope(-1, x, eps) - m;  // f'_- moved down
  // Both clipped branches apply at the origin; meet in the middle rather than cross.
  if (x == 0.0 && up > down) return 0.5 * (up + down);
  if (v > 0) return x < 0.0 ? up : std::min(up, down);
  return x > 0.0 ? down : std::max(down, up);
}

double gamma_mean_sc(int v, double x, double delta, const OracleEnvelope& env, double eps) {
  return x - v * eps + v * shift(delta, env, eps);
}

DeltaStar delta_star(double eps, double C1, double p, double q) {
  check_positive(eps, "delta_star: eps");
  check_positive(C1, "delta_star: C1");
  check_positive(p, "delta_star: p");
  if (q < 0.0) throw DomainError("delta_star: q must be nonnegative");
  if (q == 0.0) return {0.0, true};
  return {std::pow(eps * q / (C1 * (2.0 * p + q)), 1.0 / p), false};
}

double delta_star_objective(double delta, double eps, double C1, double p, double q) {
  const double gap = std::max(eps - C1 * std::pow(delta, p), 0.0);
  return gap * gap * std::pow(delta, q);
}

double kl_upper_bound(double n, double eps, const OracleEnvelope& env) {
  if (n == 0.0) return 0.0;
  const DeltaStar ds = delta_star(eps, env.C1, env.p, env.q);
  return (2.0 * n / env.C2) * delta_star_objective(ds.value, eps, env.C1, env.p, env.q);
}

double lower_bound_k1(HardClass, double p, double q, double C1, double C2) {
  // Identical for both families once p + q/2 is written as (2p + q)/2.
  return (2.0 * p / (std::sqrt(C2) * (2.0 * p + q))) * std::pow(q / (C1 * (2.0 * p + q)), q / (2.0 * p));
}

double epsilon_star(HardClass cls, double p, double q, double C1, double C2, double n) {
  check_positive(p, "epsilon_star: p");
  check_positive(C1, "epsilon_star: C1");
  check_positive(C2, "epsilon_star: C2");
  check_positive(n, "epsilon_star: n");
  const double k1 = lower_bound_k1(cls, p, q, C1, C2);
  const double num = cls == HardClass::convex_smooth ? 2.0 * p : 4.0 * p;
  const double den = cls == HardClass::convex_smooth ? 4.0 * p + q : 6.0 * p + q;
  return std::pow(num / (std::sqrt(n) * k1 * den), 2.0 * p / (2.0 * p + q));
}

double lower_bound_at_eps(HardClass cls, double eps, double p, double q, double C1, double C2,
                          double n) {
  const double a = (2.0 * p + q) / (2.0 * p);
  const double tail = 1.0 - std::sqrt(n) * lower_bound_k1(cls, p, q, C1, C2) * std::pow(eps, a);
  return cls == HardClass::convex_smooth ? 0.25 * eps * tail : 0.5 * eps * eps * tail;
}

double lower_bound_value(HardClass cls, double p, double q, double C1, double C2, double n,
                         std::size_t d) {
  check_positive(p, "lower_bound_value: p");
  if (q < 0.0) throw DomainError("lower_bound_value: q must be nonnegative");
  if (d == 0) throw DomainError("lower_bound_value: d must be positive");
  const double s = 2.0 * p + q;
  if (cls == HardClass::convex_smooth) {
    const double k = (s * s) / (4.0 * std::pow(q, q / s) * std::pow(4.0 * p + q, (4.0 * p + q) / s));
    return std::sqrt(static_cast<double>(d)) * k * std::pow(C1, q / s) * std::pow(C2, p / s) *
           std::pow(n, -p / s);
  }
  const double k = std::pow(2.0, (2.0 * p - q) / s) * s * s * s /
                   (std::pow(q, 2.0 * q / s) * std::pow(6.0 * p + q, (6.0 * p + q) / s));
  return k * std::pow(C1, 2.0 * q / s) * std::pow(C2, 2.0 * p / s) * std::pow(n, -2.0 * p / s);
}

// ---------------------------------------------------------------- instances

HardInstance::HardInstance(HardClass c, std::vector<int> vv, double e, OracleEnvelope per_coordinate)
    : cls(c), v(std::move(vv)), eps(e), envelope(per_coordinate) {
  if (v.empty()) throw DomainError("hard instance: empty sign vector");
  for (int s : v)
    if (s != 1 && s != -1) throw DomainError("hard instance: signs must be +1 or -1");
  check_positive(eps, "hard instance: eps");
  if (!(envelope.p > 0.0)) throw DomainError("hard instance: p must be positive");
  if (envelope.q < 0.0 || envelope.C1 < 0.0 || envelope.C2 < 0.0)
    throw DomainError("hard instance: envelope constants must be nonnegative");
  if (envelope.type != OracleType::type_I) throw DomainError("hard instance: envelope must be type I");
  if (cls == HardClass::convex_smooth && !(eps < convex_eps_limit()))
    throw DomainError("hard instance: convex family needs eps < 1/(4 ln 2)");
  if (cls == HardClass::strongly_convex && eps > 1.0)
    throw DomainError("hard instance: strongly convex family needs eps <= 1");
}

ObjectiveFunction HardInstance::objective() const {
  std::vector<ObjectiveFunction> parts;
  for (int s : v) parts.push_back(cls == HardClass::convex_smooth ? softabs(s, eps) : sc_pair(s, eps));
  return parts.size() == 1 ? parts.front() : separable(parts);
}

Vector HardInstance::mean(std::span<const double> x, double delta) const {
  if (x.size() != v.size()) throw DomainError("hard instance: dimension mismatch");
  Vector m(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    m[i] = cls == HardClass::convex_smooth ? gamma_mean_convex(v[i], x[i], delta, envelope, eps)
                                           : gamma_mean_sc(v[i], x[i], delta, envelope, eps);
  return m;
}

std::vector<HardInstance> split_coordinates(const HardInstance& inst) {
  std::vector<HardInstance> out;
  for (int s : inst.v) out.emplace_back(inst.cls, std::vector<int>{s}, inst.eps, inst.envelope);
  return out;
}

OracleEnvelope per_coordinate_envelope(const OracleEnvelope& total, std::size_t d) {
  OracleEnvelope e = total;
  e.C1 = total.C1 / std::sqrt(static_cast<double>(d));
  e.C2 = total.C2 / static_cast<double>(d);
  return e;
}

namespace {

std::vector<HardInstance> flatten(const std::vector<HardInstance>& in) {
  if (in.empty()) throw DomainError("adversarial oracle: no instances");
  std::vector<HardInstance> out;
  for (const auto& h : in) {
    if (h.cls != in.front().cls) throw DomainError("adversarial oracle: mixed instance classes");
    if (h.envelope.p != in.front().envelope.p || h.envelope.q != in.front().envelope.q)
      throw DomainError("adversarial oracle: mixed envelope exponents");
    for (auto& c : split_coordinates(h)) out.push_back(std::move(c));
  }
  return out;
}

ObjectiveFunction compose_objective(const std::vector<HardInstance>& coords) {
  std::vector<ObjectiveFunction> parts;
  for (const auto& c : coords) parts.push_back(c.objective());
  return parts.size() == 1 ? parts.front() : separable(parts);
}

OracleEnvelope compose_envelope(const std::vector<HardInstance>& coords) {
  OracleEnvelope e = coords.front().envelope;
  double c1sq = 0.0, c2 = 0.0;
  for (const auto& c : coords) {
    c1sq += c.envelope.C1 * c.envelope.C1;
    c2 += c.envelope.C2;
  }
  e.C1 = std::sqrt(c1sq);
  e.C2 = c2;
  return e;
}

}  // namespace

AdversarialOracle::AdversarialOracle(std::vector<HardInstance> coordinates)
    : coords_(flatten(coordinates)), envelope_(compose_envelope(coords_)), f_(compose_objective(coords_)) {}

Vector AdversarialOracle::mean(std::span<const double> x, double delta) const {
  if (x.size() != coords_.size()) throw DomainError("adversarial oracle: dimension mismatch");
  Vector m(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) m[i] = coords_[i].mean(x.subspan(i, 1), delta)[0];
  return m;
}

OracleResponse AdversarialOracle::query(const OracleQuery& q, RngStream& rng) const {
  validate_delta(q.delta);
  if (!f_.domain().contains(q.x, 1e-12)) throw DomainError("adversarial oracle: query outside K");
  Vector g = mean(q.x, q.delta);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double sd = std::sqrt(coords_[i].envelope.c2(q.delta));
    g[i] += sd * rng.normal();
  }
  return make_response(q, std::move(g), q.x, Norm::euclidean());
}

AdversarialOracle separable_oracle(const std::vector<HardInstance>& instances) {
  return AdversarialOracle(instances);
}

}  // namespace noisygrad
