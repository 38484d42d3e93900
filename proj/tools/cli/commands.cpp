#include "cli/commands.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>

#include "cli/format.hpp"
#include "drest/errors.hpp"
#include "drest/random.hpp"
#include "drest/sensitivity.hpp"

namespace drest::cli {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string read_file(const std::string& path, bool config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (config) throw ConfigError(0, "cannot open '" + path + "'");
    throw DataError(0, "cannot open '" + path + "'");
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << bytes;
}

void emit(const std::string& bytes, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) out << bytes;
  else write_file(out_path, bytes);
}

json diagnostics_json(const WeightDiagnostics& d) {
  return {{"max_inv_pi_respondents", number_or_null(d.max_inv_pi_respondents)},
          {"max_inv_pi_nonrespondents", number_or_null(d.max_inv_pi_nonrespondents)},
          {"min_pi", number_or_null(d.min_pi)},
          {"var_inv_pi", number_or_null(d.var_inv_pi)}};
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(cols[j]));
  return out;
}

std::vector<std::size_t> all_columns(const Dataset& data) {
  std::vector<std::size_t> cols(data.covariate_names.size());
  for (std::size_t j = 0; j < cols.size(); ++j) cols[j] = j;
  return cols;
}

}  // namespace

std::string results_header() {
  return "scenario,n,reps,estimator,bias,var,mse,skewness,q01,q05,q25,q50,q75,q95,q99,min,max,failures\n";
}

SimulateOutput simulate(const RunConfig& config, unsigned workers) {
  config.dgp.validate();
  std::ostringstream csv, values;
  csv << results_header();
  if (config.write_values) values << "scenario,n,estimator,replication,value\n";

  const json echo = config.to_json();
  json cells = json::array();
  const std::string nan = format_double(std::nan(""));

  for (const auto& sc : config.scenarios) {
    const std::string label = scenario_label(sc.pi_correct, sc.m_correct);
    for (std::size_t n : config.sample_sizes) {
      ScenarioSpec spec;
      spec.n = n;
      spec.reps = config.reps;
      spec.pi_model_correct = sc.pi_correct;
      spec.m_model_correct = sc.m_correct;
      spec.reverse = config.reverse_roles;
      spec.base_seed = config.base_seed;
      spec.estimators = config.estimators;
      const MCSummary summary = run_scenario(spec, config.dgp, {workers, config.write_values});

      json failures = json::object();
      for (const auto& e : summary.estimators) {
        const std::string name(to_string(e.name));
        const SummaryRow& r = e.row;
        const bool any = e.failures < config.reps;
        const auto num = [&](double v) { return any ? format_double(v) : nan; };
        csv << label << ',' << n << ',' << config.reps << ',' << name << ',' << num(r.bias) << ','
            << (any && r.variance_defined ? format_double(r.variance) : nan) << ',' << num(r.mse) << ','
            << num(r.skewness);
        for (double q : r.quantiles) csv << ',' << num(q);
        csv << ',' << num(r.min) << ',' << num(r.max) << ',' << e.failures << '\n';
        failures[name] = e.failures;
        if (config.write_values) {
          for (std::size_t rep = 0; rep < e.values.size(); ++rep) {
            if (std::isnan(e.values[rep])) continue;
            values << label << ',' << n << ',' << name << ',' << rep << ',' << format_double(e.values[rep]) << '\n';
          }
        }
      }
      cells.push_back({{"scenario", label}, {"n", n}, {"failures", failures}});
    }
  }

  json meta = {
      {"tool", "drest"},
      {"version", kVersion},
      {"prng", std::string(kPrngName)},
      {"normal_transform", std::string(kNormalTransform)},
      {"seed_derivation", std::string(kSeedDerivation)},
      {"base_seed", config.base_seed},
      {"mu_true", config.dgp.outcome_mean()},
      {"config", echo},
      {"config_hash", hash_label(echo.dump())},
      {"cells", cells},
  };
  SimulateOutput out;
  out.results_csv = csv.str();
  out.metadata_json = meta.dump(2) + "\n";
  if (config.write_values) out.values_csv = values.str();
  return out;
}

json estimate_report(const Dataset& data, const EstimateConfig& config) {
  const auto p_cols = config.propensity_covariates ? data.columns(*config.propensity_covariates) : all_columns(data);
  const auto m_cols = config.outcome_covariates ? data.columns(*config.outcome_covariates) : all_columns(data);

  AnalysisView view;
  view.design_pi = with_intercept(select_columns(data.x, p_cols));
  view.design_m = with_intercept(select_columns(data.x, m_cols));
  view.t = data.t;
  view.y_observed = data.y;
  if (view.respondents() == 0) throw DataError(0, "no respondents (every t is 0)");

  std::vector<EstimatorName> which = config.estimators;
  if (which.empty()) {
    for (auto e : kAllEstimators) {
      if (e != EstimatorName::full) which.push_back(e);
    }
  }
  const EstimateSet set = estimate_all(view, which, nullptr, config.link);

  json estimates = json::object();
  for (auto e : which) {
    json entry = {{"status", std::string(to_string(set.flags.at(e)))}};
    const auto v = set.value(e);
    entry["value"] = v ? number_or_null(*v) : json(nullptr);
    if (const auto it = set.notes.find(e); it != set.notes.end()) entry["note"] = it->second;
    estimates[std::string(to_string(e))] = entry;
  }
  json names = json::array();
  for (auto c : p_cols) names.push_back(data.covariate_names[c]);
  json m_names = json::array();
  for (auto c : m_cols) m_names.push_back(data.covariate_names[c]);

  return {
      {"n", data.t.size()},
      {"respondents", view.respondents()},
      {"link", std::string(to_string(config.link))},
      {"propensity_covariates", names},
      {"outcome_covariates", m_names},
      {"estimates", estimates},
      {"diagnostics", diagnostics_json(set.diagnostics)},
      {"phi_ext", set.phi_ext ? number_or_null(*set.phi_ext) : json(nullptr)},
      {"warnings", data.warnings},
  };
}

json sensitivity_report(const Dataset& data, const SensitivityConfig& config, unsigned workers) {
  const auto to_specs = [&](const std::vector<ModelEntry>& entries, ModelRole role) {
    std::vector<ModelSpec> specs;
    for (const auto& m : entries) {
      ModelSpec s;
      s.role = role;
      s.covariates = data.columns(m.covariates);
      s.propensity_kind = m.kind;
      s.link = m.link;
      s.label = m.label;
      specs.push_back(std::move(s));
    }
    return specs;
  };
  const auto p_specs = to_specs(config.propensity_models, ModelRole::propensity);
  const auto o_specs = to_specs(config.outcome_models, ModelRole::outcome);

  SensitivityData sd;
  sd.covariates = data.x;
  sd.t = data.t;
  sd.y = data.y;
  const SensitivityMatrix m =
      analyze_sensitivity(sd, p_specs, o_specs, config.estimator, {config.boot_reps, config.seed, workers});

  json estimates = json::array();
  for (Eigen::Index i = 0; i < m.estimates.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.estimates.cols(); ++j) row.push_back(number_or_null(m.estimates(i, j)));
    estimates.push_back(row);
  }
  const auto tests = [](const std::vector<HomogeneityResult>& results, const std::vector<ModelSpec>& specs,
                        const std::vector<double>& spread) {
    json arr = json::array();
    for (std::size_t k = 0; k < results.size(); ++k) {
      const auto& r = results[k];
      json entry = {{"label", specs[k].label},         {"statistic", number_or_null(r.statistic)},
                    {"p_value", number_or_null(r.p_value)}, {"df", r.df},
                    {"draws", r.draws},                {"reduced_rank", r.reduced_rank},
                    {"defined", r.defined},            {"spread", number_or_null(spread[k])}};
      if (!r.note.empty()) entry["note"] = r.note;
      arr.push_back(entry);
    }
    return arr;
  };
  json labels_p = json::array(), labels_o = json::array();
  for (const auto& s : p_specs) labels_p.push_back(s.label);
  for (const auto& s : o_specs) labels_o.push_back(s.label);

  return {
      {"estimator", std::string(to_string(config.estimator))},
      {"propensity_models", labels_p},
      {"outcome_models", labels_o},
      {"estimates", estimates},
      {"row_tests", tests(m.row_tests, p_specs, m.row_spread)},
      {"col_tests", tests(m.col_tests, o_specs, m.col_spread)},
      {"selection",
       {{"i_star", m.selection.i_star},
        {"j_star", m.selection.j_star},
        {"propensity_model", p_specs[m.selection.i_star].label},
        {"outcome_model", o_specs[m.selection.j_star].label}}},
      {"flags", m.flags},
      {"metadata",
       {{"seed", config.seed},
        {"boot_reps", config.boot_reps},
        {"prng", std::string(kPrngName)},
        {"seed_derivation", std::string(kSeedDerivation)}}},
  };
}

std::string density_csv(const std::vector<double>& values, const DensityOptions& options, const std::string& source) {
  const DensitySeries s = density_points(values, options);
  std::ostringstream out;
  out << "# source=" << source << '\n';
  out << "# bandwidth=" << format_double(s.bandwidth) << (options.bandwidth ? " (given)" : " (silverman)") << '\n';
  out << "# clip_quantile=" << (options.clip_quantile ? format_double(*options.clip_quantile) : std::string("none"))
      << " used=" << s.used << " clipped=" << s.clipped << '\n';
  out << "grid,density\n";
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    out << format_double(s.grid[i]) << ',' << format_double(s.density[i]) << '\n';
  }
  return out.str();
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Doubly-robust estimators of a mean with outcomes missing at random"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path, out_path, data_path;
  unsigned workers = 1;

  auto* sim = app.add_subcommand("simulate", "Monte Carlo study over the configured scenario grid");
  bool reverse = false;
  sim->add_option("--config", config_path, "JSON run configuration (defaults when omitted)");
  sim->add_option("--out", out_path, "output directory (overrides output_dir)");
  sim->add_option("--workers", workers, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  sim->add_flag("--reverse", reverse, "swap the roles of respondents and nonrespondents");

  auto* gen = app.add_subcommand("generate", "write one simulated dataset as CSV");
  std::size_t gen_n = 1000;
  std::uint64_t gen_seed = 1;
  std::string gen_view = "observed";
  gen->add_option("--n", gen_n, "sample size")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "seed");
  gen->add_option("--view", gen_view, "covariates to write")->check(CLI::IsMember({"observed", "latent", "both"}));
  gen->add_option("--out", out_path, "output file (stdout when omitted)");
  gen->add_flag("--reverse", reverse, "swap the roles of respondents and nonrespondents");

  auto* est = app.add_subcommand("estimate", "point estimates for one dataset");
  est->add_option("--data", data_path, "CSV with columns t, y and covariates")->required();
  est->add_option("--config", config_path, "JSON model choice");
  est->add_option("--out", out_path, "output file (stdout when omitted)");

  auto* sens = app.add_subcommand("sensitivity", "matrix of DR estimates over candidate models");
  sens->add_option("--data", data_path, "CSV with columns t, y and covariates")->required();
  sens->add_option("--config", config_path, "JSON model lists")->required();
  sens->add_option("--out", out_path, "output file (stdout when omitted)");
  sens->add_option("--workers", workers, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);

  auto* dens = app.add_subcommand("density", "kernel density of a set of estimates");
  std::optional<double> bandwidth, clip;
  std::optional<std::string> select;
  std::size_t grid_points = 512;
  dens->add_option("--data", data_path, "values file")->required();
  dens->add_option("--select", select, "scenario:n:ESTIMATOR when reading a simulate values file");
  dens->add_option("--bandwidth", bandwidth, "kernel bandwidth (Silverman's rule when omitted)")
      ->check(CLI::PositiveNumber);
  dens->add_option("--clip-quantile", clip, "drop values below q and above 1 - q")->check(CLI::Range(0.0, 0.5));
  dens->add_option("--grid-points", grid_points, "grid size")->check(CLI::Range(2, 1 << 20));
  dens->add_option("--out", out_path, "output file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sim) {
      RunConfig config = config_path.empty() ? RunConfig{} : parse_run_config(read_file(config_path, true));
      if (reverse) config.reverse_roles = true;
      const std::filesystem::path dir = out_path.empty() ? config.output_dir : out_path;
      const SimulateOutput result = simulate(config, workers);
      std::filesystem::create_directories(dir);
      write_file(dir / "results.csv", result.results_csv);
      write_file(dir / "metadata.json", result.metadata_json);
      if (config.write_values) write_file(dir / "values.csv", result.values_csv);
    } else if (*gen) {
      FullSample sample = generate_sample(gen_n, gen_seed);
      if (reverse) sample = reverse_roles(std::move(sample));
      const CovariateView view = gen_view == "latent" ? CovariateView::latent
                                 : gen_view == "both" ? CovariateView::both
                                                      : CovariateView::observed;
      std::ostringstream csv;
      write_dataset(csv, sample, view);
      emit(csv.str(), out_path, out);
    } else if (*est) {
      const EstimateConfig config = config_path.empty() ? EstimateConfig{} : parse_estimate_config(read_file(config_path, true));
      const std::string bytes = read_file(data_path, false);
      std::istringstream in(bytes);
      const Dataset data = read_dataset(in);
      for (const auto& w : data.warnings) err << "warning: " << w << '\n';
      json report = estimate_report(data, config);
      report["metadata"] = {{"data_hash", hash_label(bytes)},
                            {"config_hash", hash_label(config_path.empty() ? "" : read_file(config_path, true))}};
      emit(report.dump(2) + "\n", out_path, out);
    } else if (*sens) {
      const std::string config_bytes = read_file(config_path, true);
      const SensitivityConfig config = parse_sensitivity_config(config_bytes);
      const std::string bytes = read_file(data_path, false);
      std::istringstream in(bytes);
      const Dataset data = read_dataset(in);
      for (const auto& w : data.warnings) err << "warning: " << w << '\n';
      json report = sensitivity_report(data, config, workers);
      report["metadata"]["data_hash"] = hash_label(bytes);
      report["metadata"]["config_hash"] = hash_label(config_bytes);
      emit(report.dump(2) + "\n", out_path, out);
    } else if (*dens) {
      const std::string bytes = read_file(data_path, false);
      std::istringstream in(bytes);
      const std::vector<double> values = read_values(in, select);
      DensityOptions options;
      options.bandwidth = bandwidth;
      options.clip_quantile = clip;
      options.grid_points = grid_points;
      std::string source = hash_label(bytes);
      if (select) source += " select=" + *select;
      emit(density_csv(values, options, source), out_path, out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const DegenerateInput& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}

}  // namespace drest::cli
