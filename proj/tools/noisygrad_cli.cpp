// Command-line front end for the experiment harness.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "noisygrad/harness.hpp"
#include "noisygrad/kernels.hpp"

namespace ng = noisygrad;

namespace {

struct Common {
  std::string config_path;
  std::optional<int> workers;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<long> reps;
  std::optional<std::string> id;
  std::optional<double> tolerance;
  bool quiet = false;
};

struct Flags {
  std::optional<std::string> cls, estimator, noise, oracle, scheme, family;
  std::optional<std::vector<long>> horizons;
  std::optional<double> sigma, p, q, c1, c2;
  std::optional<long> n;
  std::optional<std::vector<double>> delta_grid, x;
  bool exact_oracle = false;
};

template <class T>
void set_if(std::optional<T>& dst, const std::optional<T>& src) {
  if (src) dst = src;
}
template <class T>
void set_if(T& dst, const std::optional<T>& src) {
  if (src) dst = *src;
}

ng::ExperimentConfig assemble(const std::string& command, const Common& c, const Flags& f) {
  ng::ExperimentConfig cfg = c.config_path.empty() ? ng::ExperimentConfig{} : ng::load_config(c.config_path);
  cfg.command = command;
  if (c.config_path.empty()) cfg.id = command;
  set_if(cfg.id, c.id);
  set_if(cfg.workers, c.workers);
  set_if(cfg.output, c.out);
  set_if(cfg.seed, c.seed);
  set_if(cfg.replications, c.reps);
  set_if(cfg.tolerance, c.tolerance);
  set_if(cfg.problem_class, f.cls);
  if (f.oracle) ng::apply_oracle_spec(*f.oracle, cfg);
  set_if(cfg.oracle.estimator, f.estimator);
  set_if(cfg.oracle.noise, f.noise);
  set_if(cfg.oracle.scheme, f.scheme);
  set_if(cfg.function.family, f.family);
  if (f.sigma) cfg.oracle.sigma = f.sigma;
  set_if(cfg.horizons, f.horizons);
  if (command == "lowerbound") {
    set_if(cfg.lowerbound.p, f.p);
    set_if(cfg.lowerbound.q, f.q);
    set_if(cfg.lowerbound.c1, f.c1);
    set_if(cfg.lowerbound.c2, f.c2);
    set_if(cfg.lowerbound.n, f.n);
    if (f.exact_oracle) cfg.lowerbound.exact_oracle = true;
  }
  if (command == "regret") {
    set_if(cfg.regret.p, f.p);
    set_if(cfg.regret.q, f.q);
  }
  if (command == "probe") {
    set_if(cfg.probe.delta_grid, f.delta_grid);
    set_if(cfg.probe.x, f.x);
  }
  return cfg;
}

void write_probe_csv(const std::string& path, const ng::ProbeReport& rep) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "delta,bias,bias_se,variance,variance_se,c1,c2,replications\n";
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& r = rep.rows[i];
    out << ng::format_double(r.delta) << ',' << ng::format_double(r.bias_est) << ','
        << ng::format_double(r.bias_se) << ',' << ng::format_double(r.var_est) << ','
        << ng::format_double(r.var_se) << ',' << ng::format_double(rep.c1[i]) << ','
        << ng::format_double(rep.c2[i]) << ',' << r.replications << '\n';
  }
  std::ofstream s(ng::summary_path_for(path));
  s << rep.summary.dump(2) << '\n';
}

void print_fit(const ng::ExperimentResult& r, const char* label) {
  for (const auto& h : r.fit.errors)
    std::printf("  n=%-9ld mean=%.6e se=%.2e\n", h.n, h.mean, h.se);
  std::printf("%s exponent %.4f (predicted %.4f), r^2 %.4f\n", label,
              r.command == "regret" ? 1.0 - r.fit.fitted_exponent : r.fit.fitted_exponent,
              r.predicted_exponent, r.fit.r_squared);
}

int run_command(const std::string& command, const Common& c, const Flags& f) {
  if (command == "check") {
    ng::CheckOptions opt;
    if (c.workers) opt.workers = *c.workers;
    const auto results = ng::run_property_suite(opt);
    bool all = true;
    for (const auto& r : results) {
      all = all && r.pass;
      if (!c.quiet || !r.pass)
        std::printf("%s %s: %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    }
    std::printf("%zu checks, %s (kernels: %s)\n", results.size(), all ? "all passed" : "FAILURES",
                std::string(ng::kernels::backend_name(ng::kernels::active_backend())).c_str());
    return all ? 0 : 1;
  }
  const ng::ExperimentConfig cfg = assemble(command, c, f);
  bool pass = false;
  if (command == "rate" || command == "regret") {
    const auto r = command == "rate" ? ng::rate_experiment(cfg) : ng::regret_experiment(cfg);
    if (!cfg.output.empty()) ng::write_outputs(cfg.output, r.records, r.summary);
    if (!c.quiet) print_fit(r, command == "rate" ? "error" : "regret");
    for (const auto& note : r.notes)
      if (!c.quiet) std::printf("  note: %s\n", note.c_str());
    pass = r.pass;
  } else if (command == "lowerbound") {
    const auto r = ng::lower_bound_experiment(cfg);
    if (!cfg.output.empty()) ng::write_outputs(cfg.output, r.records, r.summary);
    if (!c.quiet)
      std::printf("eps %.6g delta %.6g: mean error %.6e +- %.2e over %ld runs, floor %.6e\n", r.eps, r.delta,
                  r.mean_error, r.se, r.runs, r.floor);
    pass = r.pass;
  } else {
    const auto r = ng::probe_experiment(cfg);
    if (!cfg.output.empty()) write_probe_csv(cfg.output, r);
    if (!c.quiet) {
      for (std::size_t i = 0; i < r.rows.size(); ++i) {
        const auto& row = r.rows[i];
        std::printf("  delta=%-8g bias=%.4e (c1 %.4e) var=%.4e (c2 %.4e)\n", row.delta, row.bias_est, r.c1[i],
                    row.var_est, r.c2[i]);
      }
      std::printf("bias slope %.3f, variance slope %.3f\n", r.bias_slope, r.var_slope);
    }
    pass = r.pass;
  }
  std::printf("%s\n", pass ? "PASS" : "FAIL");
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mirror descent with biased noisy gradient oracles: experiments and checks"};
  app.require_subcommand(1);
  app.fallthrough();
  Common c;
  Flags f;
  app.add_option("--config", c.config_path, "JSON experiment config; flags override its fields")
      ->check(CLI::ExistingFile);
  app.add_option("--workers", c.workers, "worker threads (0: hardware concurrency)");
  app.add_option("--out", c.out, "CSV output path; the JSON summary goes next to it");
  app.add_option("--seed", c.seed, "master seed");
  app.add_option("--reps", c.reps, "replications");
  app.add_option("--id", c.id, "experiment id written to the CSV");
  app.add_option("--tolerance", c.tolerance, "allowed exponent deviation");
  app.add_flag("--quiet", c.quiet, "print only the verdict");

  auto common = [&](CLI::App* s) {
    s->add_option("--class", f.cls, "problem class")->check(CLI::IsMember({"convex", "sc"}));
    s->add_option("--horizons", f.horizons, "comma-separated horizons")->delimiter(',');
  };
  auto* rate = app.add_subcommand("rate", "fit the optimization error exponent");
  common(rate);
  rate->add_option("--estimator", f.estimator, "gradient estimator")
      ->check(CLI::IsMember({"one-point", "smoothing", "spsa", "rdsa", "sf"}));
  rate->add_option("--noise", f.noise, "noise model")->check(CLI::IsMember({"controlled", "uncontrolled"}));
  rate->add_option("--sigma", f.sigma, "noise scale");
  rate->add_option("--scheme", f.scheme, "perturbation of the one-point estimator");
  rate->add_option("--oracle", f.oracle, "oracle spec, e.g. spsa:noise=controlled,sigma=1");

  auto* lb = app.add_subcommand("lowerbound", "compare mirror descent against the minimax floor");
  lb->add_option("--class", f.cls, "hard family")->check(CLI::IsMember({"convex", "sc"}));
  lb->add_option("--p", f.p, "bias exponent");
  lb->add_option("--q", f.q, "variance exponent");
  lb->add_option("--c1", f.c1, "bias constant");
  lb->add_option("--c2", f.c2, "variance constant");
  lb->add_option("--n", f.n, "horizon");
  lb->add_flag("--exact-oracle", f.exact_oracle, "use exact gradients instead of the adversarial oracle");

  auto* rg = app.add_subcommand("regret", "fit the regret exponent");
  common(rg);
  rg->add_option("--p", f.p, "bias exponent");
  rg->add_option("--q", f.q, "variance exponent");
  rg->add_option("--sigma", f.sigma, "noise scale");

  auto* pr = app.add_subcommand("probe", "estimate bias and variance over a delta grid");
  pr->add_option("--oracle", f.oracle, "oracle spec");
  pr->add_option("--delta-grid", f.delta_grid, "comma-separated tolerances")->delimiter(',');
  pr->add_option("--x", f.x, "query point, comma-separated")->delimiter(',');

  app.add_subcommand("check", "run the property suite");

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run_command(command, c, f);
  } catch (const ng::ConfigError& e) {
    std::fprintf(stderr, "config error at '%s': %s\n", e.field().c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
