#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "noisygrad/harness.hpp"

using namespace noisygrad;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(NOISYGRAD_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

using Pts = std::vector<std::pair<double, double>>;

ExperimentConfig small_rate() {
  ExperimentConfig c;
  c.id = "small";
  c.command = "rate";
  c.horizons = std::vector<long>{200, 400, 800, 1600};
  c.replications = 6;
  c.workers = 1;
  return c;
}

}  // namespace

TEST_CASE("probe on an exact oracle") {
  const auto f = exponential_bowl(2);
  const ExactOracle o(f);
  RngStream rng(1, 0);
  const auto r = probe_bias_variance(o, Vector{0.1, -0.3}, 0.5, 1000, rng);
  CHECK(r.bias_est <= 1e-14);
  CHECK(r.var_est <= 1e-14);
  CHECK(r.replications == 1000);
  CHECK_THROWS_AS(probe_bias_variance(o, Vector{0.1, -0.3}, 0.5, 999, rng), DomainError);
}

TEST_CASE("probe on the strongly convex adversarial oracle") {
  const OracleEnvelope env{1.0, 1.0, 1.0, 2.0, OracleType::type_I};
  const AdversarialOracle o({HardInstance(HardClass::strongly_convex, {1}, 0.3, env)});
  RngStream rng(2, 0);
  for (double delta : {0.1, 0.5}) {
    const auto r = probe_bias_variance(o, Vector{0.2}, delta, 100'000, rng);
    CHECK(std::fabs(r.bias_est - std::min(0.3, delta)) <= 5 * r.bias_se);
    CHECK(r.bias_se >= 0.0);
    CHECK(r.var_se >= 0.0);
  }
  // Variance within 5% at 10^6 draws.
  const auto r = probe_bias_variance(o, Vector{0.0}, 0.25, 1'000'000, rng);
  CHECK(r.var_est == doctest::Approx(env.c2(0.25)).epsilon(0.05));
}

TEST_CASE("rate fits") {
  std::vector<std::pair<double, double>> pts;
  for (double n : {1e3, 1e4, 1e5}) pts.emplace_back(n, 2.0 * std::pow(n, -1.0 / 3.0));
  auto fit = fit_rate(pts);
  CHECK(fit.fitted_exponent == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.fitted_intercept == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  pts.clear();
  for (double n : {1e3, 1e4, 1e5, 1e6}) pts.emplace_back(n, 0.7 / std::sqrt(n));
  CHECK(fit_rate(pts).fitted_exponent == doctest::Approx(0.5).epsilon(1e-12));
  // One outlier scaled by 1.1 moves the exponent only slightly.
  pts.clear();
  const std::vector<double> ns{1e3, 3e3, 1e4, 3e4, 1e5, 3e5, 1e6};
  for (std::size_t i = 0; i < ns.size(); ++i)
    pts.emplace_back(ns[i], (i == 3 ? 1.1 : 1.0) * std::pow(ns[i], -0.25));
  CHECK(std::fabs(fit_rate(pts).fitted_exponent - 0.25) <= 0.03);
  CHECK_THROWS_AS(fit_rate(Pts{{1e3, 1.0}, {1e4, 0.0}, {1e5, 0.1}}), DomainError);
  CHECK_THROWS_AS(fit_rate(Pts{{1e3, 1.0}, {1e4, 0.5}}), DomainError);
  CHECK_THROWS_AS(fit_rate(Pts{{1e3, 1.0}, {1e3, 0.5}, {1e5, 0.1}}), DomainError);
  CHECK(loglog_slope({0.5, 0.2, 0.1}, {0.25, 0.04, 0.01}) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("CSV round trip") {
  std::vector<RunRecord> recs{{"a,b \"q\"", 1000, 0, 0.1, 12.5, 0.3, 0xffffffffffffffffULL},
                              {"plain", 3, 7, 1.0 / 3.0, 0.0, 1e-300, 42},
                              {"neg", 10, 1, -2.5e-17, 6.02214076e23, 1.0, 0}};
  const std::string text = records_to_csv(recs);
  CHECK(text.rfind("experiment_id,n,replication,error,regret,delta,seed\n", 0) == 0);
  CHECK(records_from_csv(text) == recs);
  const std::string path = "roundtrip_test.csv";
  write_records(path, recs);
  CHECK(read_records(path) == recs);
  std::remove(path.c_str());
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 5e-324, 1.7976931348623157e308, -0.0})
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  CHECK_THROWS(records_from_csv("bad header\n"));
  CHECK(summary_path_for("out/run.csv") == "out/run.json");
  CHECK(summary_path_for("out.d/run") == "out.d/run.json");
}

TEST_CASE("config JSON round trip") {
  ExperimentConfig c = small_rate();
  c.oracle.sigma = 2.5;
  c.function.a = {1.0, 2.0};
  c.function.b = {0.1, 1.0 / 3.0};
  c.probe.delta_grid = {0.7, 0.07};
  c.lowerbound.exact_oracle = true;
  c.seed = 0xfedcba9876543210ULL;
  const auto j = to_json(c);
  const auto back = config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.seed == c.seed);
  CHECK(*back.oracle.sigma == 2.5);
  CHECK(back.function.b[1] == 1.0 / 3.0);
  const std::string path = "config_test.json";
  save_config(path, c);
  CHECK(to_json(load_config(path)) == j);
  std::remove(path.c_str());
}

TEST_CASE("config errors name the field") {
  auto field_of = [](const nlohmann::json& j) {
    try {
      validate_config(config_from_json(j));
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of({{"oracle", {{"estimator", "magic"}}}}) == "oracle.estimator");
  CHECK(field_of({{"oracle", {{"sigma", "loud"}}}}) == "oracle.sigma");
  CHECK(field_of({{"function", {{"colour", 1}}}}) == "function.colour");
  CHECK(field_of({{"horizons", {100, 50, 200}}}) == "horizons");
  CHECK(field_of({{"lowerbound", {{"c1", -1}}}, {"command", "lowerbound"}}) == "lowerbound.c1");
  CHECK(field_of({{"problem_class", "weird"}}) == "problem_class");
  CHECK(field_of({{"command", "probe"}, {"probe", {{"delta_grid", {0.5, 2.0}}}}}) == "probe.delta_grid");
  CHECK(field_of({{"id", "fine"}}) == "<none>");
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("oracle spec strings") {
  ExperimentConfig c;
  apply_oracle_spec("spsa:noise=controlled,sigma=1,family=additive", c);
  CHECK(c.oracle.estimator == "spsa");
  CHECK(c.oracle.noise == "controlled");
  CHECK(*c.oracle.sigma == 1.0);
  CHECK(c.oracle.controlled_family == "additive");
  apply_oracle_spec("one-point:scheme=rdsa,f=quadratic,a=1;2,b=0;0.5", c);
  CHECK(c.oracle.scheme == "rdsa");
  CHECK(c.function.a == Vector{1.0, 2.0});
  CHECK_THROWS_AS(apply_oracle_spec("spsa:colour=red", c), ConfigError);
  CHECK_THROWS_AS(apply_oracle_spec("spsa:sigma=abc", c), ConfigError);
  ExperimentConfig bad;
  apply_oracle_spec("adversarial-convex:eps=0.9", bad);
  const auto f = build_function(bad.function);
  CHECK_THROWS_AS(build_oracle(bad, f), ConfigError);
}

TEST_CASE("rate experiment is reproducible across worker counts") {
  ExperimentConfig c = small_rate();
  const auto a = rate_experiment(c);
  c.workers = 3;
  const auto b = rate_experiment(c);
  CHECK(records_to_csv(a.records) == records_to_csv(b.records));
  CHECK(a.records.size() == 4 * 6);
  CHECK(a.fit.fitted_exponent == b.fit.fitted_exponent);
  CHECK(a.summary["fit"]["exponent"] == a.fit.fitted_exponent);
  CHECK(a.summary.contains("config"));
  c.seed += 1;
  CHECK(records_to_csv(rate_experiment(c).records) != records_to_csv(a.records));
}

TEST_CASE("lower-bound experiment floor values") {
  ExperimentConfig c;
  c.command = "lowerbound";
  c.replications = 4;
  c.lowerbound = {2.0, 2.0, 1.0, 1.0, 10'000, false};
  const auto r = lower_bound_experiment(c);
  CHECK(r.floor == doctest::Approx(0.45 * std::cbrt(1.0 / 25.0) * std::pow(1e4, -1.0 / 3.0)).epsilon(1e-12));
  CHECK(r.runs == 8);
  c.problem_class = "sc";
  c.lowerbound = {1.0, 2.0, 1.0, 1.0, 10'000, true};
  const auto e = lower_bound_experiment(c);
  CHECK(e.floor == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(e.mean_error < e.floor);
  CHECK(e.pass);
  // eps* too large for the convex family.
  c.problem_class = "convex";
  c.lowerbound = {2.0, 2.0, 1.0, 1.0, 2, false};
  CHECK_THROWS_AS(lower_bound_experiment(c), ConfigError);
}

TEST_CASE("regret experiment rejects unsupported exponents") {
  ExperimentConfig c = small_rate();
  c.command = "regret";
  c.regret = {3.0, 1.0};
  CHECK_THROWS_AS(regret_experiment(c), ConfigError);
}

TEST_CASE("parallel_for visits every index once and propagates errors") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
}

TEST_CASE("command-line interface") {
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") != 0);
  CHECK(run_cli("rate --estimator magic") != 0);
  CHECK(run_cli("lowerbound --class convex --p 2 --q 2 --c1 1 --c2 1 --n 2 --reps 2") == 2);
  const std::string out1 = "cli_test_1.csv", out2 = "cli_test_2.csv";
  const std::string args = "rate --horizons 200,400,800 --reps 4 --seed 5 --tolerance 10";
  // Short horizons may FAIL the fit; only the run itself has to succeed.
  CHECK(run_cli(args + " --workers 1 --out " + out1) <= 1);
  CHECK(run_cli(args + " --workers 2 --out " + out2) <= 1);
  CHECK(slurp(out1) == slurp(out2));
  CHECK(!slurp(out1).empty());
  CHECK(slurp("cli_test_1.json").find("\"exponent\"") != std::string::npos);
  // Config file values are overridden by flags.
  ExperimentConfig c = small_rate();
  c.seed = 5;
  c.tolerance = 10.0;
  c.horizons = std::vector<long>{200, 400, 800};
  c.replications = 9;
  c.id = "rate";
  save_config("cli_test_cfg.json", c);
  CHECK(run_cli("--config cli_test_cfg.json rate --reps 4 --out cli_test_3.csv") <= 1);
  CHECK(slurp("cli_test_3.csv") == slurp(out1));
  std::ofstream("cli_test_bad.json") << R"({"oracle": {"estimator": 3}})";
  CHECK(run_cli("--config cli_test_bad.json rate") == 2);
  for (const char* p : {"cli_test_1.csv", "cli_test_2.csv", "cli_test_3.csv", "cli_test_1.json", "cli_test_2.json",
                        "cli_test_3.json", "cli_test_cfg.json", "cli_test_bad.json"})
    std::remove(p);
}
