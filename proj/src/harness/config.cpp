#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "noisygrad/harness.hpp"

namespace noisygrad {

using nlohmann::json;

std::vector<long> default_horizons() { return {1000, 3000, 10000, 30000, 100000, 300000, 1000000}; }

std::vector<long> ExperimentConfig::horizons_or_default() const {
  return horizons ? *horizons : default_horizons();
}

long ExperimentConfig::replications_or_default() const {
  if (replications) return *replications;
  if (command == "lowerbound") return 64;
  if (command == "probe") return 100'000;
  return 16;
}

double ExperimentConfig::sigma_or_default() const {
  if (oracle.sigma) return *oracle.sigma;
  return oracle.noise == "controlled" ? 1.0 : 5.0;
}

// ---------------------------------------------------------------- JSON

namespace {

template <class T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

// Strict reader: every key must be known, every value well typed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(field(key), std::string("invalid value (") + e.what() + ")");
    }
  }

  template <class T>
  void get(const char* key, std::optional<T>& out) {
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      seen_.insert(key);
      out.reset();
      return;
    }
    T tmp{};
    get(key, tmp);
    out = tmp;
  }

  Reader child(const char* key) {
    seen_.insert(key);
    return Reader(j_.at(key), field(key) + ".");
  }
  bool has(const char* key) const { return j_.contains(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(path_ + k, "unknown field");
  }

 private:
  std::string field(const char* key) const { return path_ + key; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

json to_json(const ExperimentConfig& c) {
  const auto& f = c.function;
  const auto& o = c.oracle;
  return json{
      {"id", c.id},
      {"command", c.command},
      {"problem_class", c.problem_class},
      {"function",
       {{"family", f.family}, {"a", f.a}, {"b", f.b}, {"k", f.k}, {"c", f.c}, {"v", f.v},
        {"eps", f.eps}, {"dim", f.dim}}},
      {"oracle",
       {{"estimator", o.estimator}, {"scheme", o.scheme}, {"noise", o.noise},
        {"sigma", opt_json(o.sigma)}, {"controlled_family", o.controlled_family},
        {"function_class", o.function_class}, {"norm", o.norm}, {"v", o.v}, {"eps", o.eps},
        {"c1", o.c1}, {"p", o.p}, {"c2", o.c2}, {"q", o.q}}},
      {"alpha", c.alpha},
      {"sc_alpha", c.sc_alpha},
      {"horizons", opt_json(c.horizons)},
      {"replications", opt_json(c.replications)},
      {"seed", c.seed},
      {"workers", c.workers},
      {"output", c.output},
      {"tolerance", c.tolerance},
      {"min_r_squared", c.min_r_squared},
      {"lowerbound",
       {{"p", c.lowerbound.p}, {"q", c.lowerbound.q}, {"c1", c.lowerbound.c1},
        {"c2", c.lowerbound.c2}, {"n", c.lowerbound.n}, {"exact_oracle", c.lowerbound.exact_oracle}}},
      {"regret", {{"p", c.regret.p}, {"q", c.regret.q}}},
      {"probe", {{"x", c.probe.x}, {"delta_grid", c.probe.delta_grid}}},
  };
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Reader r(j, "");
  r.get("id", c.id);
  r.get("command", c.command);
  r.get("problem_class", c.problem_class);
  if (r.has("function")) {
    Reader f = r.child("function");
    f.get("family", c.function.family);
    f.get("a", c.function.a);
    f.get("b", c.function.b);
    f.get("k", c.function.k);
    f.get("c", c.function.c);
    f.get("v", c.function.v);
    f.get("eps", c.function.eps);
    f.get("dim", c.function.dim);
    f.finish();
  }
  if (r.has("oracle")) {
    Reader o = r.child("oracle");
    o.get("estimator", c.oracle.estimator);
    o.get("scheme", c.oracle.scheme);
    o.get("noise", c.oracle.noise);
    o.get("sigma", c.oracle.sigma);
    o.get("controlled_family", c.oracle.controlled_family);
    o.get("function_class", c.oracle.function_class);
    o.get("norm", c.oracle.norm);
    o.get("v", c.oracle.v);
    o.get("eps", c.oracle.eps);
    o.get("c1", c.oracle.c1);
    o.get("p", c.oracle.p);
    o.get("c2", c.oracle.c2);
    o.get("q", c.oracle.q);
    o.finish();
  }
  r.get("alpha", c.alpha);
  r.get("sc_alpha", c.sc_alpha);
  r.get("horizons", c.horizons);
  r.get("replications", c.replications);
  r.get("seed", c.seed);
  r.get("workers", c.workers);
  r.get("output", c.output);
  r.get("tolerance", c.tolerance);
  r.get("min_r_squared", c.min_r_squared);
  if (r.has("lowerbound")) {
    Reader l = r.child("lowerbound");
    l.get("p", c.lowerbound.p);
    l.get("q", c.lowerbound.q);
    l.get("c1", c.lowerbound.c1);
    l.get("c2", c.lowerbound.c2);
    l.get("n", c.lowerbound.n);
    l.get("exact_oracle", c.lowerbound.exact_oracle);
    l.finish();
  }
  if (r.has("regret")) {
    Reader g = r.child("regret");
    g.get("p", c.regret.p);
    g.get("q", c.regret.q);
    g.finish();
  }
  if (r.has("probe")) {
    Reader p = r.child("probe");
    p.get("x", c.probe.x);
    p.get("delta_grid", c.probe.delta_grid);
    p.finish();
  }
  r.finish();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("<file>", "cannot open config file " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError("<file>", std::string("parse error: ") + e.what());
  }
  return config_from_json(j);
}

void save_config(const std::string& path, const ExperimentConfig& cfg) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << to_json(cfg).dump(2) << '\n';
}

// ---------------------------------------------------------------- validation

namespace {

void require(bool ok, const char* field, const std::string& msg) {
  if (!ok) throw ConfigError(field, msg);
}

bool one_of(const std::string& s, std::initializer_list<const char*> options) {
  return std::any_of(options.begin(), options.end(), [&](const char* o) { return s == o; });
}

}  // namespace

void validate_config(const ExperimentConfig& c) {
  require(one_of(c.command, {"rate", "regret", "lowerbound", "probe"}), "command",
          "expected rate, regret, lowerbound or probe");
  require(one_of(c.problem_class, {"convex", "sc"}), "problem_class", "expected convex or sc");
  require(one_of(c.function.family, {"quadratic", "kinked", "exponential", "softabs", "sc_pair", "affine"}),
          "function.family", "unknown function family '" + c.function.family + "'");
  require(one_of(c.oracle.estimator, {"smoothing", "one-point", "spsa", "rdsa", "sf", "exact",
                                      "adversarial-convex", "adversarial-sc"}),
          "oracle.estimator", "unknown estimator '" + c.oracle.estimator + "'");
  require(one_of(c.oracle.scheme, {"spsa", "rdsa", "sf"}), "oracle.scheme", "expected spsa, rdsa or sf");
  require(one_of(c.oracle.noise, {"controlled", "uncontrolled"}), "oracle.noise",
          "expected controlled or uncontrolled");
  require(one_of(c.oracle.controlled_family, {"additive", "tilt"}), "oracle.controlled_family",
          "expected additive or tilt");
  require(one_of(c.oracle.function_class, {"convex_smooth", "c3"}), "oracle.function_class",
          "expected convex_smooth or c3");
  require(one_of(c.oracle.norm, {"euclidean", "max"}), "oracle.norm", "expected euclidean or max");
  require(!c.oracle.sigma || *c.oracle.sigma >= 0.0, "oracle.sigma", "must be nonnegative");
  if (c.oracle.noise == "controlled")
    require(one_of(c.oracle.estimator, {"spsa", "rdsa", "sf"}), "oracle.noise",
            "controlled noise needs a two-point estimator (spsa, rdsa or sf)");
  require(c.alpha > 0.0, "alpha", "must be positive");
  require(c.sc_alpha > 0.0, "sc_alpha", "must be positive");
  require(c.workers >= 0, "workers", "must be nonnegative");
  require(c.tolerance > 0.0, "tolerance", "must be positive");
  if (c.function.family == "quadratic") {
    require(!c.function.a.empty(), "function.a", "must be nonempty");
    require(c.function.a.size() == c.function.b.size(), "function.b", "must match the length of function.a");
  }
  require(c.function.dim >= 1, "function.dim", "must be at least 1");
  require(c.function.v == 1 || c.function.v == -1, "function.v", "must be +1 or -1");
  require(c.oracle.v == 1 || c.oracle.v == -1, "oracle.v", "must be +1 or -1");

  const auto hs = c.horizons_or_default();
  const long reps = c.replications_or_default();
  if (c.command == "rate" || c.command == "regret") {
    require(hs.size() >= 3, "horizons", "need at least 3 horizons");
    for (std::size_t i = 0; i < hs.size(); ++i) {
      require(hs[i] >= 2, "horizons", "every horizon must be at least 2");
      require(i == 0 || hs[i] > hs[i - 1], "horizons", "must be strictly increasing");
    }
    require(reps >= 2, "replications", "need at least 2 replications");
  }
  if (c.command == "regret") {
    require(c.regret.p > 0.0, "regret.p", "must be positive");
    require(c.regret.q >= 0.0, "regret.q", "must be nonnegative");
  }
  if (c.command == "lowerbound") {
    const auto& l = c.lowerbound;
    require(l.p > 0.0, "lowerbound.p", "must be positive");
    require(l.q >= 0.0, "lowerbound.q", "must be nonnegative");
    require(l.c1 > 0.0, "lowerbound.c1", "must be positive");
    require(l.c2 > 0.0, "lowerbound.c2", "must be positive");
    require(l.n >= 2, "lowerbound.n", "must be at least 2");
    require(reps >= 2, "replications", "need at least 2 replications");
  }
  if (c.command == "probe") {
    require(reps >= 1000, "replications", "probes need at least 1000 replications");
    require(!c.probe.delta_grid.empty(), "probe.delta_grid", "must be nonempty");
    for (double d : c.probe.delta_grid) require(d > 0.0 && d <= 1.0, "probe.delta_grid", "entries must lie in (0, 1]");
  }
}

// ---------------------------------------------------------------- spec strings

namespace {

Vector parse_list(const std::string& s, const std::string& field) {
  Vector out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ';')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError(field, "bad number '" + tok + "'");
    }
  }
  return out;
}

double parse_num(const std::string& s, const std::string& field) {
  const Vector v = parse_list(s, field);
  if (v.size() != 1) throw ConfigError(field, "expected one number");
  return v[0];
}

}  // namespace

void apply_oracle_spec(const std::string& spec, ExperimentConfig& cfg) {
  const auto colon = spec.find(':');
  cfg.oracle.estimator = spec.substr(0, colon);
  if (colon == std::string::npos) return;
  std::stringstream ss(spec.substr(colon + 1));
  std::string kv;
  while (std::getline(ss, kv, ',')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("oracle", "expected key=value, got '" + kv + "'");
    const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
    const std::string field = "oracle." + k;
    auto& o = cfg.oracle;
    auto& f = cfg.function;
    if (k == "noise") o.noise = v;
    else if (k == "sigma") o.sigma = parse_num(v, field);
    else if (k == "family") o.controlled_family = v;
    else if (k == "class") o.function_class = v;
    else if (k == "scheme") o.scheme = v;
    else if (k == "norm") o.norm = v;
    else if (k == "v") o.v = static_cast<int>(parse_num(v, field));
    else if (k == "eps") o.eps = parse_num(v, field);
    else if (k == "c1") o.c1 = parse_num(v, field);
    else if (k == "p") o.p = parse_num(v, field);
    else if (k == "c2") o.c2 = parse_num(v, field);
    else if (k == "q") o.q = parse_num(v, field);
    else if (k == "f") f.family = v;
    else if (k == "a") f.a = parse_list(v, "function.a");
    else if (k == "b") f.b = parse_list(v, "function.b");
    else if (k == "k") f.k = parse_num(v, "function.k");
    else if (k == "c") f.c = parse_num(v, "function.c");
    else if (k == "fv") f.v = static_cast<int>(parse_num(v, "function.v"));
    else if (k == "feps") f.eps = parse_num(v, "function.eps");
    else if (k == "dim") f.dim = static_cast<std::size_t>(parse_num(v, "function.dim"));
    else throw ConfigError(field, "unknown oracle spec key");
  }
}

// ---------------------------------------------------------------- builders

ObjectiveFunction build_function(const FunctionSpec& s) {
  if (s.family == "quadratic") return quadratic(s.a, s.b);
  if (s.family == "kinked") return kinked_quadratic(s.a.empty() ? 1.0 : s.a[0], s.k, s.c);
  if (s.family == "exponential") return exponential_bowl(s.dim);
  if (s.family == "affine") return affine(s.b, 0.0);
  if (s.family != "softabs" && s.family != "sc_pair")
    throw ConfigError("function.family", "unknown function family '" + s.family + "'");
  std::vector<ObjectiveFunction> parts;
  for (std::size_t i = 0; i < s.dim; ++i)
    parts.push_back(s.family == "softabs" ? softabs(s.v, s.eps) : sc_pair(s.v, s.eps));
  return parts.size() == 1 ? parts.front() : separable(parts);
}

std::unique_ptr<GradientOracle> build_oracle(const ExperimentConfig& cfg, const ObjectiveFunction& f) {
  const auto& o = cfg.oracle;
  if (o.estimator == "exact") return std::make_unique<ExactOracle>(f);
  if (o.estimator == "adversarial-convex" || o.estimator == "adversarial-sc") {
    const HardClass cls = o.estimator == "adversarial-sc" ? HardClass::strongly_convex : HardClass::convex_smooth;
    const std::size_t d = cfg.function.dim;
    const OracleEnvelope total{o.c1, o.p, o.c2, o.q, OracleType::type_I};
    try {
      HardInstance h(cls, std::vector<int>(d, o.v), o.eps, per_coordinate_envelope(total, d));
      return std::make_unique<AdversarialOracle>(std::vector<HardInstance>{h});
    } catch (const DomainError& e) {
      throw ConfigError("oracle", e.what());
    }
  }
  const Norm norm = o.norm == "max" ? Norm::max() : Norm::euclidean();
  const FunctionClass cls = o.function_class == "c3" ? FunctionClass::c3 : FunctionClass::convex_smooth;
  const double sigma = cfg.sigma_or_default();
  NoiseModel noise = NoiseModel::uncontrolled(sigma);
  if (o.noise == "controlled")
    noise = NoiseModel::controlled(
        o.controlled_family == "additive" ? ControlledFamily::additive : ControlledFamily::tilt, sigma);
  try {
    if (o.estimator == "smoothing")
      return std::make_unique<EstimatorOracle>(f, PerturbationScheme{SchemeKind::surface}, noise,
                                               Feedback::one_point, cls, norm);
    if (o.estimator == "one-point")
      return std::make_unique<EstimatorOracle>(f, PerturbationScheme{parse_scheme(o.scheme)}, noise,
                                               Feedback::one_point, cls, norm);
    return std::make_unique<EstimatorOracle>(f, PerturbationScheme{parse_scheme(o.estimator)}, noise,
                                             Feedback::two_point, cls, norm);
  } catch (const DomainError& e) {
    throw ConfigError("oracle", e.what());
  }
}

}  // namespace noisygrad
