#include "loggas/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <tuple>

#include "loggas/batch_io.hpp"
#include "loggas/errors.hpp"

namespace loggas {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kMollifyDegree = 160;

std::uint64_t fnv1a(const std::string& s)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v)
{
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

Error config_error(const std::string& code, const std::string& msg)
{
  return Error(ErrorKind::validation, code, msg);
}

template <class T>
T field(const nlohmann::json& j, const char* name)
{
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw config_error("config_field", std::string("config field '") + name + "': " + e.what());
  }
}

template <class T>
T field_or(const nlohmann::json& j, const char* name, T fallback)
{
  return j.contains(name) ? field<T>(j, name) : fallback;
}

// Re-throws with the failing stage prefixed to the message.
template <class F>
auto staged(const std::string& stage, F&& fn) -> decltype(fn())
{
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), e.code(), "stage '" + stage + "': " + e.what());
  }
}

bool is_gaussian_potential(const Potential& p)
{
  for (double x : {-1.7, -0.9, -0.2, 0.35, 1.1, 1.9}) {
    if (std::abs(p.v1(x) - 2.0 * x) > 1e-10) {
      return false;
    }
  }
  return true;
}

nlohmann::json vec_json(const Eigen::VectorXd& v)
{
  return std::vector<double>(v.data(), v.data() + v.size());
}

nlohmann::json mat_json(const Eigen::MatrixXd& a)
{
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      row.push_back(a(i, k));
    }
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json finite_or_null(double v)
{
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double mean_of(std::span<const double> v)
{
  double s = 0.0;
  for (double x : v) {
    s += x;
  }
  return s / static_cast<double>(v.size());
}

} // namespace

nlohmann::json to_json(const ExperimentConfig& c)
{
  nlohmann::json j;
  j["potential"] = c.potential;
  j["delta"] = c.delta;
  j["beta"] = c.beta;
  j["xis"] = c.xis;
  j["n_grid"] = c.n_grid;
  j["reps"] = c.reps;
  j["sampler"] = to_string(c.sampler);
  j["mala"] = {{"step_size", c.mala.step_size},
               {"burn_in_sweeps_per_n", c.mala.burn_in_sweeps_per_n},
               {"thinning_per_n", c.mala.thinning_per_n},
               {"chains", c.mala.chains}};
  j["p"] = c.p;
  j["seed"] = c.seed;
  j["metrics"] = c.metrics;
  j["mollify_eps"] = c.mollify_eps;
  j["rigidity_eps"] = c.rigidity_eps;
  j["bootstrap_resamples"] = c.bootstrap_resamples;
  j["output"] = c.output;
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j)
{
  if (!j.is_object()) {
    throw config_error("config_parse", "config must be a JSON object");
  }
  ExperimentConfig c;
  c.potential = field_or<std::string>(j, "potential", c.potential);
  c.delta = field_or<double>(j, "delta", c.delta);
  c.beta = field<double>(j, "beta");
  c.xis = field<std::vector<std::string>>(j, "xis");
  c.n_grid = field<std::vector<std::size_t>>(j, "n_grid");
  c.reps = field<std::size_t>(j, "reps");
  try {
    c.sampler = sampler_method_from_string(field_or<std::string>(j, "sampler", "gbe"));
  } catch (const Error& e) {
    throw config_error("unknown_sampler", e.what());
  }
  if (j.contains("mala")) {
    const auto& m = j.at("mala");
    c.mala.step_size = field_or<double>(m, "step_size", c.mala.step_size);
    c.mala.burn_in_sweeps_per_n = field_or<std::size_t>(m, "burn_in_sweeps_per_n", c.mala.burn_in_sweeps_per_n);
    c.mala.thinning_per_n = field_or<std::size_t>(m, "thinning_per_n", c.mala.thinning_per_n);
    c.mala.chains = field_or<std::size_t>(m, "chains", c.mala.chains);
  }
  c.p = field_or<double>(j, "p", c.p);
  c.seed = field_or<std::uint64_t>(j, "seed", c.seed);
  if (j.contains("metrics")) {
    const auto list = field<std::vector<std::string>>(j, "metrics");
    c.metrics = std::set<std::string>(list.begin(), list.end());
  }
  c.mollify_eps = field_or<double>(j, "mollify_eps", c.mollify_eps);
  c.rigidity_eps = field_or<double>(j, "rigidity_eps", c.rigidity_eps);
  c.bootstrap_resamples = field_or<std::size_t>(j, "bootstrap_resamples", c.bootstrap_resamples);
  c.output = field_or<std::string>(j, "output", c.output);

  if (c.n_grid.empty()) {
    throw config_error("n_grid_empty", "n_grid is empty");
  }
  for (std::size_t i = 0; i < c.n_grid.size(); ++i) {
    if (c.n_grid[i] == 0) {
      throw config_error("n_grid_invalid", "n_grid entries must be positive");
    }
    if (i > 0 && c.n_grid[i] <= c.n_grid[i - 1]) {
      throw config_error("n_grid_not_increasing", "n_grid not increasing at index " + std::to_string(i));
    }
  }
  if (c.reps < 100) {
    throw config_error("reps_too_small", "reps must be at least 100");
  }
  if (!(c.beta > 0.0) || !std::isfinite(c.beta)) {
    throw config_error("beta_nonpositive", "beta must be positive");
  }
  if (!(c.delta > 0.0) || c.delta >= 1.0) {
    throw config_error("delta_invalid", "delta must lie in (0, 1)");
  }
  if (!(c.p >= 1.0)) {
    throw config_error("p_invalid", "p must be at least 1");
  }
  if (c.xis.empty() || c.xis.size() > kMaxDimension) {
    throw config_error("xis_count", "between 1 and 4 test functions are required");
  }
  if (c.mollify_eps < 0.0) {
    throw config_error("mollify_eps_invalid", "mollify_eps must be nonnegative");
  }
  for (const auto& m : c.metrics) {
    if (m != "w1" && m != "wp" && m != "tv" && m != "density_sup") {
      throw config_error("unknown_metric", "unknown metric '" + m + "'");
    }
  }
  return c;
}

std::string config_hash(const ExperimentConfig& cfg)
{
  auto j = to_json(cfg);
  j.erase("output");
  return std::string(kReportVersion) + ":" + hex64(fnv1a(j.dump()));
}

ChebSeries build_test_function(const std::string& spec, const Equilibrium& eq, double mollify_eps)
{
  const Interval u = eq.u_interval();
  if (spec.rfind("abspow:", 0) == 0) {
    std::stringstream ss(spec.substr(7));
    double c = 0.0, a = 0.0;
    char comma = 0;
    if (!(ss >> c >> comma >> a) || comma != ',' || !(ss >> std::ws).eof() || !(a > 0.0)) {
      throw rejected_input("unparseable abspow spec: " + spec);
    }
    if (!(mollify_eps > 0.0)) {
      throw rejected_input("abspow test functions need mollify_eps > 0");
    }
    const Interval wide{u.lo - mollify_eps, u.hi + mollify_eps};
    return mollify([c, a](double x) { return std::pow(std::abs(x - c), a); }, wide, mollify_eps, kMollifyDegree);
  }
  auto s = parse_function_spec(spec, u);
  if (mollify_eps > 0.0) {
    const Interval wide{u.lo - mollify_eps, u.hi + mollify_eps};
    s = mollify(parse_function_spec(spec, wide), mollify_eps);
  }
  return s;
}

ValidatedExperiment validate_config(const ExperimentConfig& cfg)
{
  ValidatedExperiment v;
  v.cfg = cfg;
  Potential pot;
  try {
    pot = potential_from_spec(cfg.potential);
  } catch (const Error& e) {
    throw config_error("unparseable_spec", std::string("potential: ") + e.what());
  }
  try {
    v.eq = build_equilibrium(pot, cfg.delta);
  } catch (const Error& e) {
    if (e.code() == "support_not_normalized") {
      throw config_error("support_not_normalized",
                         std::string("potential: support not normalized (") + e.what() +
                           "); run `loggas equilibrium --normalize` to rescale it onto [-1, 1]");
    }
    throw config_error(e.code(), std::string("potential: ") + e.what());
  }
  if (cfg.sampler == SamplerMethod::tridiagonal && !is_gaussian_potential(v.eq.potential)) {
    throw config_error("sampler_potential_mismatch", "the tridiagonal sampler needs V(x) = x^2; use sampler \"mala\"");
  }
  for (std::size_t i = 0; i < cfg.xis.size(); ++i) {
    try {
      v.xis.push_back(build_test_function(cfg.xis[i], v.eq, cfg.mollify_eps));
    } catch (const Error& e) {
      throw config_error("unparseable_spec", "xis[" + std::to_string(i) + "]: " + e.what());
    }
  }
  try {
    v.prediction = predict(v.xis, v.eq, cfg.beta, cfg.p);
  } catch (const Error& e) {
    throw Error(e.kind(), e.code(), std::string("xis: ") + e.what());
  }
  return v;
}

ValidatedExperiment validate_config(const std::string& raw)
{
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error("config_parse", std::string("config is not valid JSON: ") + e.what());
  }
  return validate_config(config_from_json(j));
}

nlohmann::json clt_report(const SteinContext& ctx,
                          const Prediction& pred,
                          const SampleBatch& batch,
                          const ReportOptions& opts)
{
  const std::size_t d = pred.dim();
  const auto s = stein_batch(ctx, pred, batch, opts.p);
  nlohmann::json r;

  r["prediction"] = to_json(pred);
  std::vector<double> target(ctx.m_f.begin(), ctx.m_f.end());
  r["prediction"]["target_mean"] = target;

  nlohmann::json emp;
  emp["n"] = batch.n;
  emp["reps"] = s.reps;
  emp["used"] = s.used;
  emp["mean"] = vec_json(s.x_mean);
  emp["covariance"] = mat_json(s.x_cov);
  std::vector<double> mean_se;
  for (std::size_t i = 0; i < d; ++i) {
    mean_se.push_back(std::sqrt(s.x_cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) /
                                static_cast<double>(s.used)));
  }
  emp["mean_stderr"] = mean_se;
  r["empirical"] = emp;

  nlohmann::json st;
  st["z_norm"] = s.z_norm;
  st["z_norm_stderr"] = finite_or_null(s.z_norm_se);
  st["gamma_dev"] = s.gamma_dev;
  st["gamma_dev_stderr"] = finite_or_null(s.gamma_dev_se);
  st["gamma_mean"] = mat_json(s.gamma_mean);
  st["gamma11_variance"] = s.gamma11_var;
  st["master_residual_max"] = s.master_residual_max;
  const double aw = stein_bound(pred, 1.0, 0.0, opts.p, BoundMode::wasserstein);
  const double bw = stein_bound(pred, 0.0, 1.0, opts.p, BoundMode::wasserstein);
  const double bound_w = aw * s.gamma_dev + bw * s.z_norm;
  st["bound_wasserstein"] = bound_w;
  st["bound_wasserstein_stderr"] =
    finite_or_null(std::hypot(aw * s.gamma_dev_se, bw * s.z_norm_se));
  if (d == 1) {
    const double at = stein_bound(pred, 1.0, 0.0, 1.0, BoundMode::tv);
    const double bt = stein_bound(pred, 0.0, 1.0, 1.0, BoundMode::tv);
    // the tv bound is an L1 statement, so it uses the p = 1 estimates
    const SteinBatchSummary s1 = opts.p == 1.0 ? s : stein_batch(ctx, pred, batch, 1.0);
    st["gamma_dev_sigma"] = s1.gamma_dev_sigma;
    st["bound_tv"] = at * s1.gamma_dev + bt * s1.z_norm;
    st["bound_tv_stderr"] = finite_or_null(std::hypot(at * s1.gamma_dev_se, bt * s1.z_norm_se));
    st["bound_tv_sigma_reading"] = at * s1.gamma_dev_sigma + bt * s1.z_norm;
  }
  r["stein"] = st;

  nlohmann::json dist = nlohmann::json::object();
  auto seed_for = [&](std::uint64_t k) { return derive_seed(opts.seed, k); };
  if (d == 1) {
    const double m = ctx.m_f[0];
    const double sigma = std::sqrt(pred.C(0, 0));
    const std::span<const double> xs(s.X);
    auto add = [&](const std::string& key, double p_order, const std::function<double(std::span<const double>)>& f, std::uint64_t k) {
      nlohmann::json e;
      e["value"] = f(xs);
      e["stderr"] = bootstrap_stderr(xs, f, opts.bootstrap_resamples, seed_for(k));
      e["order"] = p_order;
      dist[key] = e;
    };
    if (opts.metrics.count("w1")) {
      add("w1", 1.0, [&](std::span<const double> v) { return wasserstein_p(v, m, sigma, 1.0); }, 1);
    }
    if (opts.metrics.count("wp")) {
      add("wp", opts.p, [&](std::span<const double> v) { return wasserstein_p(v, m, sigma, opts.p); }, 2);
    }
    if (opts.metrics.count("tv") && xs.size() >= 100) {
      add("tv", 1.0, [&](std::span<const double> v) { return tv_kde(v, m, sigma); }, 3);
    }
    if (opts.metrics.count("density_sup") && xs.size() >= 1000) {
      for (int order : {0, 1}) {
        const auto ds = density_sup_distance(xs, m, sigma, order);
        nlohmann::json e;
        e["value"] = ds.value;
        e["stderr"] = bootstrap_stderr(
          xs, [&](std::span<const double> v) { return density_sup_distance(v, m, sigma, order).value; },
          opts.bootstrap_resamples, seed_for(4 + static_cast<std::uint64_t>(order)));
        e["order"] = order;
        e["bandwidth"] = ds.bandwidth;
        e["degenerate"] = ds.degenerate;
        dist["density_sup_r" + std::to_string(order)] = e;
      }
    }
  } else {
    Prediction centred = pred;
    for (std::size_t i = 0; i < d; ++i) {
      centred.m[static_cast<Eigen::Index>(i)] = ctx.m_f[i];
    }
    const std::size_t projections = 32;
    auto sliced = [&](double p_order, std::uint64_t k) {
      const auto f = [&](std::span<const double> v) { return projected_wp(v, centred, p_order, projections, seed_for(100)); };
      // resample whole rows
      const std::size_t rows = s.used;
      std::mt19937_64 rng(seed_for(k));
      std::uniform_int_distribution<std::size_t> pick(0, rows - 1);
      std::vector<double> boot, buf(s.X.size());
      for (std::size_t b = 0; b < opts.bootstrap_resamples; ++b) {
        for (std::size_t i = 0; i < rows; ++i) {
          const std::size_t src = pick(rng);
          std::copy_n(s.X.begin() + static_cast<std::ptrdiff_t>(src * d), d, buf.begin() + static_cast<std::ptrdiff_t>(i * d));
        }
        boot.push_back(f(buf));
      }
      const double mb = mean_of(boot);
      double var = 0.0;
      for (double v : boot) {
        var += (v - mb) * (v - mb);
      }
      nlohmann::json e;
      e["value"] = f(s.X);
      e["stderr"] = std::sqrt(var / static_cast<double>(std::max<std::size_t>(boot.size(), 2) - 1));
      e["order"] = p_order;
      e["label"] = "sliced, lower-bound surrogate";
      return e;
    };
    if (opts.metrics.count("w1")) {
      dist["w1"] = sliced(1.0, 1);
    }
    if (opts.metrics.count("wp")) {
      dist["wp"] = sliced(opts.p, 2);
    }
  }
  r["distances"] = dist;

  const auto rig = rigidity_report(*ctx.eq, batch, opts.rigidity_eps);
  r["diagnostics"] = {{"rigidity_eps", opts.rigidity_eps},
                      {"envelope_violation_rate", rig.envelope_violation_rate},
                      {"outlier_rate", rig.outlier_rate},
                      {"max_abs_lambda", rig.max_abs_lambda},
                      {"outliers_excluded", s.outliers}};
  return r;
}

RunResult run_experiment(const ValidatedExperiment& exp, const fs::path& out, unsigned threads)
{
  const auto& cfg = exp.cfg;
  const std::string hash = config_hash(cfg);
  std::error_code ec;
  fs::create_directories(out / "cache", ec);
  if (ec) {
    throw Error(ErrorKind::io, "io", "cannot create output directory " + out.string() + ": " + ec.message());
  }
  const auto ctx = staged("stein_context", [&] { return make_stein_context(exp.xis, exp.eq, cfg.beta); });

  RunResult result;
  nlohmann::json per_n = nlohmann::json::array();
  std::vector<nlohmann::json> reports;
  for (std::size_t n : cfg.n_grid) {
    const std::string tag = "n=" + std::to_string(n);
    const std::uint64_t seed_n = derive_seed(cfg.seed, n);

    nlohmann::json key{{"version", kReportVersion},
                       {"potential", cfg.potential},
                       {"delta", cfg.delta},
                       {"beta", cfg.beta},
                       {"sampler", to_string(cfg.sampler)},
                       {"n", n},
                       {"reps", cfg.reps},
                       {"seed", seed_n}};
    if (cfg.sampler == SamplerMethod::mala) {
      key["mala"] = to_json(cfg)["mala"];
    }
    const std::string batch_name = "batch_" + hex64(fnv1a(key.dump()));
    const fs::path batch_path = out / "cache" / (batch_name + ".bels");
    const fs::path meta_path = out / "cache" / (batch_name + ".json");

    SampleBatch batch = staged("sample " + tag, [&] {
      if (fs::exists(batch_path) && fs::exists(meta_path)) {
        auto b = read_bels(batch_path.string());
        const auto meta = read_json_file(meta_path);
        if (b.n == n && b.reps() == cfg.reps && meta.value("key", nlohmann::json()) == key) {
          b.method = cfg.sampler;
          if (meta.contains("mala")) {
            MalaMeta mm;
            mm.steps = meta["mala"]["steps"].get<std::size_t>();
            mm.step_size = meta["mala"]["step_size"].get<double>();
            mm.acceptance_rate = meta["mala"]["acceptance_rate"].get<double>();
            mm.low_acceptance = meta["mala"]["low_acceptance"].get<bool>();
            b.mala_meta = mm;
          }
          return b;
        }
      }
      SampleBatch b = cfg.sampler == SamplerMethod::tridiagonal
                        ? sample_gbe_batch(n, cfg.beta, cfg.reps, seed_n, threads)
                        : sample_mala_batch(exp.eq, n, cfg.beta, cfg.reps, seed_n, cfg.mala, threads);
      write_bels(batch_path.string(), b);
      nlohmann::json meta{{"key", key}};
      if (b.mala_meta) {
        meta["mala"] = {{"steps", b.mala_meta->steps},
                        {"step_size", b.mala_meta->step_size},
                        {"acceptance_rate", b.mala_meta->acceptance_rate},
                        {"low_acceptance", b.mala_meta->low_acceptance}};
      }
      write_json_file(meta_path, meta);
      return b;
    });

    ReportOptions opts;
    opts.p = cfg.p;
    opts.rigidity_eps = cfg.rigidity_eps;
    opts.metrics = cfg.metrics;
    opts.bootstrap_resamples = cfg.bootstrap_resamples;
    opts.seed = derive_seed(seed_n, 0x5eed);
    auto report = staged("clt " + tag, [&] { return clt_report(ctx, exp.prediction, batch, opts); });
    report["version"] = kReportVersion;
    report["config_hash"] = hash;
    report["config"] = to_json(cfg);
    report["n"] = n;
    report["batch"] = {{"file", batch_name + ".bels"},
                       {"method", to_string(cfg.sampler)},
                       {"master_seed", seed_n}};
    if (batch.mala_meta) {
      report["batch"]["mala"] = {{"steps", batch.mala_meta->steps},
                                 {"step_size", batch.mala_meta->step_size},
                                 {"acceptance_rate", batch.mala_meta->acceptance_rate},
                                 {"low_acceptance", batch.mala_meta->low_acceptance}};
    }
    const fs::path report_path = out / ("report_n" + std::to_string(n) + ".json");
    staged("write " + tag, [&] { write_json_file(report_path, report); return 0; });
    result.files.push_back(report_path);
    reports.push_back(report);

    per_n.push_back({{"n", n},
                     {"distances", report["distances"]},
                     {"bound_wasserstein", report["stein"]["bound_wasserstein"]},
                     {"bound_tv", report["stein"].value("bound_tv", nlohmann::json(nullptr))},
                     {"outliers", report["diagnostics"]["outliers_excluded"]}});
  }

  // distances table and rate fits
  std::ostringstream table;
  table << std::setprecision(17) << "n,kind,distance,stderr,bound_wasserstein,bound_tv\n";
  std::set<std::string> kinds;
  for (const auto& rep : reports) {
    for (const auto& [kind, e] : rep["distances"].items()) {
      kinds.insert(kind);
      table << rep["n"].get<std::size_t>() << ',' << kind << ',' << e["value"].get<double>() << ','
            << e["stderr"].get<double>() << ',' << rep["stein"]["bound_wasserstein"].get<double>() << ',';
      if (rep["stein"].contains("bound_tv")) {
        table << rep["stein"]["bound_tv"].get<double>();
      }
      table << '\n';
    }
  }
  const fs::path table_path = out / "distances.csv";
  write_text_file(table_path, table.str());
  result.files.push_back(table_path);

  nlohmann::json rates = nlohmann::json::object();
  for (const auto& kind : kinds) {
    std::vector<double> ns, ds, ses;
    bool positive = true;
    for (const auto& rep : reports) {
      if (!rep["distances"].contains(kind)) {
        continue;
      }
      ns.push_back(rep["n"].get<double>());
      ds.push_back(rep["distances"][kind]["value"].get<double>());
      ses.push_back(rep["distances"][kind]["stderr"].get<double>());
      positive = positive && ds.back() > 0.0;
    }
    if (ns.size() < 3 || !positive) {
      rates[kind] = {{"note", "rate fit needs at least 3 positive distances"}};
      continue;
    }
    const auto fit = fit_rate(ns, ds, ses);
    rates[kind] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"slope_stderr", fit.slope_stderr}};
    DistanceReport dr;
    for (double v : ns) {
      dr.n_grid.push_back(static_cast<std::size_t>(v));
    }
    dr.distance = ds;
    dr.stderr_ = ses;
    dr.fitted_slope = fit.slope;
    dr.slope_stderr = fit.slope_stderr;
    const fs::path rate_path = out / ("rates_" + kind + ".csv");
    write_rates_csv(rate_path, dr);
    result.files.push_back(rate_path);
  }

  result.summary = {{"version", kReportVersion},
                    {"config_hash", hash},
                    {"config", to_json(cfg)},
                    {"prediction", to_json(exp.prediction)},
                    {"per_n", per_n},
                    {"rates", rates}};
  const fs::path summary_path = out / "summary.json";
  write_json_file(summary_path, result.summary);
  result.files.push_back(summary_path);
  return result;
}

DistanceReport rates_from_reports(const std::vector<fs::path>& reports, const std::string& kind)
{
  if (reports.empty()) {
    throw rejected_input("no reports given");
  }
  std::string hash;
  std::vector<std::tuple<std::size_t, double, double>> rows;
  for (const auto& path : reports) {
    const auto j = read_json_file(path);
    const std::string version = j.value("version", "");
    const std::string h = j.value("config_hash", "");
    if (version != kReportVersion || h.rfind(std::string(kReportVersion) + ":", 0) != 0) {
      throw Error(ErrorKind::validation, "mixed_versions",
                  path.string() + ": report version '" + version + "' is not " + kReportVersion);
    }
    if (hash.empty()) {
      hash = h;
    } else if (h != hash) {
      throw Error(ErrorKind::validation, "mixed_configs", path.string() + ": config hash differs from " + hash);
    }
    if (!j.contains("distances") || !j["distances"].contains(kind)) {
      throw rejected_input(path.string() + ": no distance of kind '" + kind + "'");
    }
    rows.emplace_back(j.at("n").get<std::size_t>(), j["distances"][kind]["value"].get<double>(),
                      j["distances"][kind]["stderr"].get<double>());
  }
  std::sort(rows.begin(), rows.end());
  DistanceReport r;
  if (kind.rfind("density_sup", 0) == 0) {
    r.kind = DistanceKind::density_sup;
    r.order = kind.size() > 13 ? std::stod(kind.substr(13)) : 0.0;
  } else {
    r.kind = distance_kind_from_string(kind);
  }
  std::vector<double> ns;
  for (const auto& [n, dval, se] : rows) {
    if (!r.n_grid.empty() && r.n_grid.back() == n) {
      throw rejected_input("duplicate report for n = " + std::to_string(n));
    }
    r.n_grid.push_back(n);
    ns.push_back(static_cast<double>(n));
    r.distance.push_back(dval);
    r.stderr_.push_back(se);
  }
  const auto fit = fit_rate(ns, r.distance, r.stderr_);
  r.fitted_slope = fit.slope;
  r.slope_stderr = fit.slope_stderr;
  return r;
}

void write_rates_csv(const fs::path& path, const DistanceReport& r)
{
  std::ostringstream os;
  os << std::setprecision(17) << "n,distance,stderr,slope,slope_stderr\n";
  for (std::size_t i = 0; i < r.n_grid.size(); ++i) {
    os << r.n_grid[i] << ',' << r.distance[i] << ',' << r.stderr_[i] << ',' << r.fitted_slope << ','
       << r.slope_stderr << '\n';
  }
  write_text_file(path, os.str());
}

nlohmann::json read_json_file(const fs::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::io, "io", "cannot open " + path.string());
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::io, "io", path.string() + ": invalid JSON: " + e.what());
  }
}

void write_json_file(const fs::path& path, const nlohmann::json& j)
{
  write_text_file(path, j.dump(2) + "\n");
}

void write_text_file(const fs::path& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::io, "io", "cannot write " + path.string());
  }
  out << text;
  if (!out) {
    throw Error(ErrorKind::io, "io", "write failed for " + path.string());
  }
}

} // namespace loggas
