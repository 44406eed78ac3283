// loggas command line front end.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "loggas/batch_io.hpp"
#include "loggas/clt_engine.hpp"
#include "loggas/equilibrium.hpp"
#include "loggas/errors.hpp"
#include "loggas/experiment.hpp"
#include "loggas/master_operator.hpp"
#include "loggas/metrics.hpp"
#include "loggas/sampler.hpp"

using namespace loggas;
namespace fs = std::filesystem;

namespace {

struct Globals
{
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string out;
};

void emit(const Globals& g, const nlohmann::json& j)
{
  if (g.out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json_file(g.out, j);
  }
}

Equilibrium load_eq(const std::string& path)
{
  return equilibrium_from_json(read_json_file(path));
}

std::vector<ChebSeries> load_xis(const std::vector<std::string>& specs, const Equilibrium& eq, double mollify_eps)
{
  std::vector<ChebSeries> xis;
  for (const auto& s : specs) {
    xis.push_back(build_test_function(s, eq, mollify_eps));
  }
  return xis;
}

std::set<std::string> split_set(const std::string& csv)
{
  std::set<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) {
      out.insert(item);
    }
  }
  return out;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Numerical laboratory for central limit theorems of one-dimensional log-gases"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0: all cores)");
  app.add_option("--out", g.out, "Output file or directory");

  // equilibrium
  auto* eq_cmd = app.add_subcommand("equilibrium", "Equilibrium measure of a one-cut potential");
  std::string potential;
  double delta = kDefaultDelta;
  bool normalize = false;
  eq_cmd->add_option("--potential", potential, "Potential spec, e.g. poly:0,0,1")->required();
  eq_cmd->add_option("--delta", delta, "Margin of U = [-1-delta, 1+delta]");
  eq_cmd->add_flag("--normalize", normalize, "Rescale the potential so its support is [-1, 1]");

  // invert
  auto* inv_cmd = app.add_subcommand("invert", "Solve Theta_V psi = xi + c_xi");
  std::string eq_path;
  std::string xi_spec;
  double mollify_eps = 0.0;
  inv_cmd->add_option("--eq", eq_path, "Equilibrium JSON")->required();
  inv_cmd->add_option("--xi", xi_spec, "Test function spec")->required();
  inv_cmd->add_option("--mollify-eps", mollify_eps, "Bump-kernel smoothing scale");

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "Draw a batch of ensemble configurations");
  std::size_t n = 0, reps = 0;
  double beta = 2.0;
  std::string method = "gbe";
  MalaBatchConfig mala;
  sample_cmd->add_option("--n", n, "Number of particles")->required();
  sample_cmd->add_option("--beta", beta, "Inverse temperature")->required();
  sample_cmd->add_option("--reps", reps, "Replicates")->required();
  sample_cmd->add_option("--method", method, "gbe or mala");
  sample_cmd->add_option("--eq", eq_path, "Equilibrium JSON (mala)");
  sample_cmd->add_option("--step-size", mala.step_size, "MALA step size (0: default)");
  sample_cmd->add_option("--burn-in", mala.burn_in_sweeps_per_n, "MALA burn-in sweeps per n");
  sample_cmd->add_option("--thin", mala.thinning_per_n, "MALA thinning sweeps per n");
  sample_cmd->add_option("--chains", mala.chains, "MALA chains");

  // clt
  auto* clt_cmd = app.add_subcommand("clt", "Prediction, Stein decomposition and distances for a batch");
  std::vector<std::string> xi_specs;
  std::string batch_path;
  double p = 1.0, rig_eps = 0.1;
  std::string metrics = "w1,tv";
  std::size_t resamples = 100;
  clt_cmd->add_option("--eq", eq_path, "Equilibrium JSON")->required();
  clt_cmd->add_option("--xi", xi_specs, "Test function spec (repeatable)")->required();
  clt_cmd->add_option("--beta", beta, "Inverse temperature")->required();
  clt_cmd->add_option("--batch", batch_path, "BELS batch")->required();
  clt_cmd->add_option("--p", p, "Moment order of the bound");
  clt_cmd->add_option("--eps", rig_eps, "Rigidity envelope exponent slack");
  clt_cmd->add_option("--metrics", metrics, "Comma-separated subset of w1,wp,tv,density_sup");
  clt_cmd->add_option("--mollify-eps", mollify_eps, "Bump-kernel smoothing scale");
  clt_cmd->add_option("--bootstrap", resamples, "Bootstrap resamples for standard errors");

  // rates
  auto* rates_cmd = app.add_subcommand("rates", "Fit log-log rates across reports");
  std::vector<std::string> report_paths;
  std::string kind = "w1";
  rates_cmd->add_option("--reports", report_paths, "Report JSON files")->required();
  rates_cmd->add_option("--kind", kind, "w1, wp, tv, density_sup_r0, density_sup_r1");

  // super
  auto* super_cmd = app.add_subcommand("super", "Density and density-derivative distances");
  std::vector<int> orders{0, 1};
  super_cmd->add_option("--eq", eq_path, "Equilibrium JSON")->required();
  super_cmd->add_option("--xi", xi_spec, "Test function spec")->required();
  super_cmd->add_option("--beta", beta, "Inverse temperature")->required();
  super_cmd->add_option("--batch", batch_path, "BELS batch")->required();
  super_cmd->add_option("--orders", orders, "Derivative orders (0..3)")->delimiter(',');
  super_cmd->add_option("--mollify-eps", mollify_eps, "Bump-kernel smoothing scale");
  super_cmd->add_option("--bootstrap", resamples, "Bootstrap resamples");

  // probe
  auto* probe_cmd = app.add_subcommand("probe", "Negative-moment and alpha-regularity probes");
  std::vector<double> eps_grid{1e-3, 1e-2, 1e-1};
  probe_cmd->add_option("--eq", eq_path, "Equilibrium JSON")->required();
  probe_cmd->add_option("--xi", xi_spec, "Test function spec")->required();
  probe_cmd->add_option("--batch", batch_path, "BELS batch (negative-moment probe)");
  probe_cmd->add_option("--eps-grid", eps_grid, "Positive increasing eps values")->delimiter(',');
  probe_cmd->add_option("--mollify-eps", mollify_eps, "Bump-kernel smoothing scale");

  // run
  auto* run_cmd = app.add_subcommand("run", "Run an experiment from a JSON config");
  std::string config_path;
  run_cmd->add_option("--config", config_path, "Experiment config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorKind::validation);
  }

  try {
    set_default_threads(g.threads);

    if (*eq_cmd) {
      auto pot = potential_from_spec(potential);
      nlohmann::json out;
      if (normalize) {
        const auto np = normalize_support(pot);
        const auto eq = build_equilibrium(np.potential, delta);
        out = to_json(eq);
        out["normalization"] = {{"scale", np.scale}, {"center", np.center}, {"iterations", np.iterations}};
      } else {
        out = to_json(build_equilibrium(pot, delta));
      }
      emit(g, out);
    } else if (*inv_cmd) {
      const auto eq = load_eq(eq_path);
      const auto xi = build_test_function(xi_spec, eq, mollify_eps);
      emit(g, to_json(invert_theta(eq, xi)));
    } else if (*sample_cmd) {
      if (g.out.empty()) {
        throw rejected_input("sample needs --out for the batch file");
      }
      const auto m = sampler_method_from_string(method);
      SampleBatch batch;
      if (m == SamplerMethod::tridiagonal) {
        batch = sample_gbe_batch(n, beta, reps, g.seed, g.threads);
      } else {
        if (eq_path.empty()) {
          throw rejected_input("mala sampling needs --eq");
        }
        batch = sample_mala_batch(load_eq(eq_path), n, beta, reps, g.seed, mala, g.threads);
      }
      write_bels(g.out, batch);
      nlohmann::json info{{"file", g.out}, {"n", n}, {"beta", beta}, {"reps", reps}, {"method", to_string(m)}, {"seed", g.seed}};
      if (batch.mala_meta) {
        info["mala"] = {{"steps", batch.mala_meta->steps},
                        {"step_size", batch.mala_meta->step_size},
                        {"acceptance_rate", batch.mala_meta->acceptance_rate},
                        {"low_acceptance", batch.mala_meta->low_acceptance}};
        if (batch.mala_meta->low_acceptance) {
          std::cerr << "warning: MALA acceptance below 0.1, reduce --step-size\n";
        }
      }
      std::cout << info.dump() << '\n';
    } else if (*clt_cmd) {
      const auto eq = load_eq(eq_path);
      const auto xis = load_xis(xi_specs, eq, mollify_eps);
      const auto batch = read_bels(batch_path);
      const auto pred = predict(xis, eq, beta, p);
      const auto ctx = make_stein_context(xis, eq, beta);
      ReportOptions opts;
      opts.p = p;
      opts.rigidity_eps = rig_eps;
      opts.metrics = split_set(metrics);
      opts.bootstrap_resamples = resamples;
      opts.seed = g.seed;
      auto rep = clt_report(ctx, pred, batch, opts);
      rep["n"] = batch.n;
      emit(g, rep);
    } else if (*rates_cmd) {
      std::vector<fs::path> paths(report_paths.begin(), report_paths.end());
      const auto r = rates_from_reports(paths, kind);
      if (g.out.empty()) {
        std::cout << to_json(r).dump(2) << '\n';
      } else {
        write_rates_csv(g.out, r);
      }
    } else if (*super_cmd) {
      const auto eq = load_eq(eq_path);
      const auto xi = build_test_function(xi_spec, eq, mollify_eps);
      const auto batch = read_bels(batch_path);
      const auto pred = predict({xi}, eq, beta);
      const auto ctx = make_stein_context({xi}, eq, beta);
      std::vector<double> xs;
      std::size_t outliers = 0;
      for (std::size_t r = 0; r < batch.reps(); ++r) {
        try {
          xs.push_back(stein_terms(ctx, batch.replicate(r)).X[0]);
        } catch (const Error& e) {
          if (e.code() != "outlier_configuration") {
            throw;
          }
          ++outliers;
        }
      }
      const double m = ctx.m_f[0];
      const double sigma = std::sqrt(pred.C(0, 0));
      nlohmann::json out{{"n", batch.n}, {"reps", batch.reps()}, {"outliers", outliers}, {"target_mean", m}, {"sigma", sigma}};
      nlohmann::json list = nlohmann::json::array();
      for (int r : orders) {
        const auto d = density_sup_distance(xs, m, sigma, r);
        const double se = bootstrap_stderr(
          xs, [&](std::span<const double> v) { return density_sup_distance(v, m, sigma, r).value; }, resamples,
          derive_seed(g.seed, static_cast<std::uint64_t>(r)));
        list.push_back({{"order", r}, {"value", d.value}, {"stderr", se}, {"bandwidth", d.bandwidth}, {"degenerate", d.degenerate}});
      }
      out["density_sup"] = list;
      emit(g, out);
    } else if (*probe_cmd) {
      const auto eq = load_eq(eq_path);
      const auto xi = build_test_function(xi_spec, eq, mollify_eps);
      const auto xi1 = cheb_derivative(xi);
      nlohmann::json out;
      const auto alpha = alpha_regularity(xi1, eps_grid, kReferenceInterval);
      out["alpha_regularity"] = {{"eps", alpha.eps},
                                 {"measure", alpha.measure},
                                 {"richardson_gap", alpha.richardson_gap},
                                 {"slope", std::isfinite(alpha.slope) ? nlohmann::json(alpha.slope) : nlohmann::json(nullptr)}};
      if (!batch_path.empty()) {
        const auto batch = read_bels(batch_path);
        nlohmann::json probe = nlohmann::json::array();
        for (const auto& [e, prob] : negative_moment_probe(batch, xi1, eps_grid)) {
          probe.push_back({{"eps", e}, {"probability", prob}});
        }
        out["negative_moment"] = probe;
        out["n"] = batch.n;
      }
      emit(g, out);
    } else if (*run_cmd) {
      std::ifstream in(config_path);
      if (!in) {
        throw Error(ErrorKind::io, "io", "cannot open " + config_path);
      }
      std::stringstream raw;
      raw << in.rdbuf();
      auto exp = validate_config(raw.str());
      if (!g.out.empty()) {
        exp.cfg.output = g.out;
      }
      const auto result = run_experiment(exp, exp.cfg.output, g.threads);
      for (const auto& f : result.files) {
        std::cout << f.string() << '\n';
      }
    }
  } catch (const Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << '\n';
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error [io]: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::io);
  } catch (const std::exception& e) {
    std::cerr << "error [numerical]: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::numerical);
  }
  return 0;
}
