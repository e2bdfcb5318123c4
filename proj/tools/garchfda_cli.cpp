// Command-line driver. Subcommands cover the full workflow: simulate a
// record set, fit a model variant, summarize data or a fit, estimate and
// predict athlete trajectories, score a fit by LPML, and run the sampler
// consistency suite.
//
// Exit codes: 0 success, 2 malformed input or usage, 3 numerical failure,
// 4 file-system failure, 1 anything else.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "garchfda/common.hpp"
#include "garchfda/config.hpp"
#include "garchfda/csv.hpp"
#include "garchfda/dataset.hpp"
#include "garchfda/draws_io.hpp"
#include "garchfda/geweke.hpp"
#include "garchfda/posterior.hpp"
#include "garchfda/sampler.hpp"
#include "garchfda/synth.hpp"

namespace {

using json = nlohmann::json;
using namespace garchfda;

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

/// Athlete lookup by exact id, falling back to a numeric index into the
/// prepared (id-sorted) order.
int resolve_athlete(const PreparedDataset& data, const std::string& key) {
  for (int i = 0; i < data.n_athletes(); ++i)
    if (data.athletes[static_cast<std::size_t>(i)].id == key) return i;
  try {
    std::size_t pos = 0;
    const int idx = std::stoi(key, &pos);
    if (pos == key.size() && idx >= 0 && idx < data.n_athletes()) return idx;
  } catch (const std::exception&) {
  }
  throw SchemaError("no athlete with id or index '" + key + "' (" +
                    std::to_string(data.n_athletes()) + " athletes in the fit)");
}

int modal_truncation(const PosteriorDraws& draws) {
  std::map<int, long> counts;
  for (int k : draws.k_path) ++counts[k];
  int mode = 0;
  long best = -1;
  for (const auto& [k, c] : counts)
    if (c > best) {
      best = c;
      mode = k;
    }
  return mode;
}

void print_scalar_summary(const char* name, const Eigen::VectorXd& chain) {
  std::vector<double> v(chain.data(), chain.data() + chain.size());
  const double mean = chain.mean();
  const EssResult ess = compute_ess(chain);
  std::printf("  %-12s mean %9.4f   95%% CI [%9.4f, %9.4f]   ESS %s\n", name, mean,
              order_stat_quantile(v, 0.025), order_stat_quantile(v, 0.975),
              ess.degenerate ? "-" : std::to_string(static_cast<long>(ess.ess)).c_str());
}

void print_fit_summary(const PosteriorDraws& draws) {
  std::printf("retained %ld draws, modal truncation level %d\n", draws.retained(),
              modal_truncation(draws));
  for (const CoefficientSummary& c : summarize_coefficients(draws))
    std::printf("  %-12s mean %9.4f   95%% CI [%9.4f, %9.4f]   ESS %s\n", c.name.c_str(),
                c.mean, c.lo95, c.hi95,
                c.ess_degenerate ? "-" : std::to_string(static_cast<long>(c.ess)).c_str());
  print_scalar_summary("psi2", draws.psi2);
  if (draws.is_garch()) {
    print_scalar_summary("m", draws.m);
    std::printf("  stationarity probability (alpha1 + varpi < 1): %.4f\n",
                stationarity_probability(draws));
  } else {
    print_scalar_summary("sigma_mu2", draws.sigma_mu2);
  }
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string data_path;
  std::string out_dir;
  std::string config_path;
  std::string variant = "M1";
  long iters = 0;
  double burnin = -1.0;
  long thin = 0;
  long seed = -1;
  int chains = 1;
};

int run_fit(const FitArgs& a) {
  ModelConfig cfg;
  if (!a.config_path.empty())
    cfg = read_json_file(a.config_path).get<ModelConfig>();
  else
    cfg = ModelConfig::for_variant(variant_from_string(a.variant));
  if (a.iters > 0) cfg.iterations = a.iters;
  if (a.burnin >= 0.0) cfg.burn_in_fraction = a.burnin;
  if (a.thin > 0) cfg.thinning = a.thin;
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  cfg.validate();
  if (a.chains < 1) throw SchemaError("--chains must be at least 1");

  const std::vector<RawRecord> records = load_records(a.data_path);
  const PreparedDataset data = prepare(records, cfg);
  std::printf("loaded %zu records, %d athletes, %d covariate columns\n", records.size(),
              data.n_athletes(), data.n_covariates());
  ensure_directory(a.out_dir);

  json run_info;
  run_info["command"] = "fit";
  run_info["version"] = kVersion;
  run_info["data"] = a.data_path;
  run_info["chains"] = json::array();

  for (int c = 0; c < a.chains; ++c) {
    ModelConfig chain_cfg = cfg;
    chain_cfg.seed = cfg.seed + static_cast<std::uint64_t>(c);
    const std::string dir =
        a.chains == 1 ? a.out_dir : a.out_dir + "/chain_" + std::to_string(c);
    ensure_directory(dir);
    const auto t0 = std::chrono::steady_clock::now();
    const PosteriorDraws draws = run_chain(data, chain_cfg);
    const double secs = elapsed_seconds(t0);
    serialize_draws(draws, data, dir);
    std::printf("chain %d (seed %llu): %ld retained draws in %.1f s -> %s\n", c,
                static_cast<unsigned long long>(chain_cfg.seed), draws.retained(), secs,
                dir.c_str());
    json entry;
    entry["seed"] = chain_cfg.seed;
    entry["directory"] = dir;
    entry["wall_seconds"] = secs;
    entry["retained"] = draws.retained();
    entry["alpha_accept_rate"] = draws.alpha_accept_rate;
    entry["varpi_accept_rate"] = draws.varpi_accept_rate;
    run_info["chains"].push_back(entry);
    if (c == 0) print_fit_summary(draws);
  }
  // Timings live here and not in the manifest, so the draw directory itself
  // is reproducible byte for byte.
  write_json_file(a.out_dir + "/run_info.json", run_info);
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string draws_dir;
  std::string athlete;
  std::string out_path;
  int points = 1001;
  int pred_points = 101;
  long seed = 20250101;
};

void append_trajectory_rows(std::vector<std::vector<std::string>>& rows,
                            const TrajectoryEstimate& tr) {
  for (std::size_t j = 0; j < tr.t.size(); ++j) {
    const auto je = static_cast<Eigen::Index>(j);
    rows.push_back({csv::format_double(tr.t[j]), csv::format_double(tr.mean[je]),
                    csv::format_double(tr.lo[je]), csv::format_double(tr.hi[je]),
                    csv::format_double(tr.f_component[je]),
                    csv::format_double(tr.mu_component[je]),
                    csv::format_double(tr.reg_component[je]),
                    std::to_string(tr.predicted[j])});
  }
}

int run_predict(const PredictArgs& a) {
  const FitArtifacts art = deserialize_draws(a.draws_dir);
  const int idx = resolve_athlete(art.data, a.athlete);
  const AthleteData& ath = art.data.athletes[static_cast<std::size_t>(idx)];

  const TrajectoryEstimate fitted = estimate_trajectory(art.draws, art.data, idx, a.points);
  RngStream rng(static_cast<std::uint64_t>(a.seed));
  const TrajectoryEstimate ahead =
      predict_next_season(art.draws, art.data, idx, a.pred_points, rng);

  std::vector<std::vector<std::string>> rows;
  append_trajectory_rows(rows, fitted);
  append_trajectory_rows(rows, ahead);
  csv::write_file(a.out_path,
                  {"t", "mean_m", "lower_m", "upper_m", "f_component", "mu_component",
                   "reg_component", "predicted"},
                  rows);

  const Eigen::Index last = fitted.mean.size() - 1;
  std::printf("athlete %s (%d seasons, %ld observations)\n", ath.id.c_str(), ath.n_seasons,
              static_cast<long>(ath.y.size()));
  std::printf("fitted mean at end of record: %.3f m\n", fitted.mean[last]);
  std::printf("next-season mean %.3f m, 95%% band [%.3f, %.3f] m\n",
              ahead.mean.mean(), ahead.lo.minCoeff(), ahead.hi.maxCoeff());
  std::printf("wrote %zu grid rows to %s\n", rows.size(), a.out_path.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// lpml

struct LpmlArgs {
  std::string draws_dir;
  std::string out_path;
};

int run_lpml(const LpmlArgs& a) {
  const FitArtifacts art = deserialize_draws(a.draws_dir);
  const LpmlResult r = compute_lpml(art.draws, art.data);
  std::printf("LPML %.6f over %ld observations", r.lpml, r.n_obs);
  if (!r.flagged.empty())
    std::printf(" (%zu flagged and excluded)", r.flagged.size());
  std::printf("\n");
  if (!a.out_path.empty()) {
    std::vector<std::vector<std::string>> rows;
    std::size_t pos = 0;
    for (int i = 0; i < art.data.n_athletes(); ++i) {
      const AthleteData& ath = art.data.athletes[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < ath.y.size(); ++j, ++pos)
        rows.push_back({ath.id, std::to_string(j),
                        csv::format_double(ath.times[static_cast<std::size_t>(j)]),
                        csv::format_double(r.log_cpo[pos])});
    }
    csv::write_file(a.out_path, {"athlete_id", "obs", "t", "log_cpo"}, rows);
    std::printf("wrote per-observation log CPO to %s\n", a.out_path.c_str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string out_dir;
  int athletes = 30;
  int seasons = 8;
  int per_season = 10;
  int df = 20;
  int k_true = 2;
  std::string seasonal = "garch";
  long seed = 1;
};

int run_simulate(const SimulateArgs& a) {
  SynthConfig sc;
  sc.n_athletes = a.athletes;
  sc.seasons = a.seasons;
  sc.per_season = a.per_season;
  sc.df = a.df;
  sc.k_true = a.k_true;
  if (a.seasonal == "garch")
    sc.seasonal = SeasonalKind::garch;
  else if (a.seasonal == "ar1")
    sc.seasonal = SeasonalKind::ar1;
  else
    throw SchemaError("--seasonal must be garch or ar1, got " + a.seasonal);
  sc.seed = static_cast<std::uint64_t>(a.seed);

  const SynthRecords sim = simulate_records(sc);
  ensure_directory(a.out_dir);
  write_records_csv(sim.records, a.out_dir + "/records.csv");
  write_json_file(a.out_dir + "/truth.json", truth_to_json(sim.truth));
  std::printf("wrote %zu records for %d athletes to %s\n", sim.records.size(), a.athletes,
              (a.out_dir + "/records.csv").c_str());
  std::printf("generating values saved to %s\n", (a.out_dir + "/truth.json").c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseArgs {
  long sweeps = 10000;
  long burn = 200;
  long seed = 977003;
  double threshold = 4.0;
  bool fault = false;
  bool skip_full_sweep = false;
};

int run_diagnose(const DiagnoseArgs& a) {
  GewekeOptions opt;
  opt.sweeps = a.sweeps;
  opt.burn = a.burn;
  opt.seed = static_cast<unsigned>(a.seed);
  opt.include_full_sweep = !a.skip_full_sweep;
  if (a.fault) opt.data_noise_scale = 1.0 / std::sqrt(2.0);

  const std::vector<GewekeResult> report = run_geweke_suite(opt);
  std::printf("%-32s %8s %12s %12s\n", "check", "z", "forward", "successive");
  for (const GewekeResult& r : report)
    std::printf("%-32s %8.2f %12.4f %12.4f\n", r.name.c_str(), r.z, r.mean_forward,
                r.mean_successive);
  const double worst = max_abs_z(report);
  std::printf("max |z| = %.2f over %zu checks (threshold %.1f)\n", worst, report.size(),
              a.threshold);
  if (a.fault) {
    std::printf(worst > a.threshold ? "injected fault detected\n"
                                    : "injected fault NOT detected\n");
    return 0;
  }
  if (worst > a.threshold) {
    std::printf("consistency FAILED\n");
    return 3;
  }
  std::printf("consistency ok\n");
  return 0;
}

// ---------------------------------------------------------------------------
// summarize

struct SummarizeArgs {
  std::string data_path;
  std::string draws_dir;
  std::string out_path;
};

int run_summarize(const SummarizeArgs& a) {
  if (a.data_path.empty() == a.draws_dir.empty())
    throw SchemaError("summarize needs exactly one of --data or --draws");
  if (!a.data_path.empty()) {
    const std::vector<RawRecord> records = load_records(a.data_path);
    const std::vector<SummaryRow> rows = summarize(records);
    std::printf("%-12s %8s %10s %8s %8s %8s\n", "group", "count", "mean_m", "sd", "min",
                "max");
    for (const SummaryRow& r : rows)
      std::printf("%-12s %8ld %10.3f %8.3f %8.2f %8.2f\n", r.group.c_str(), r.count, r.mean,
                  r.sd, r.min, r.max);
    if (!a.out_path.empty()) {
      write_summary_csv(rows, a.out_path);
      std::printf("wrote summary to %s\n", a.out_path.c_str());
    }
    return 0;
  }
  const FitArtifacts art = deserialize_draws(a.draws_dir);
  std::printf("fit of %d athletes, variant %s, df %d\n", art.data.n_athletes(),
              to_string(art.draws.config.variant).c_str(), art.draws.df);
  print_fit_summary(art.draws);
  if (!a.out_path.empty()) {
    std::vector<std::vector<std::string>> rows;
    for (const CoefficientSummary& c : summarize_coefficients(art.draws))
      rows.push_back({c.name, csv::format_double(c.mean), csv::format_double(c.sd),
                      csv::format_double(c.lo95), csv::format_double(c.hi95),
                      csv::format_double(c.ess), c.ess_degenerate ? "1" : "0"});
    csv::write_file(a.out_path, {"name", "mean", "sd", "lo95", "hi95", "ess", "degenerate"},
                    rows);
    std::printf("wrote coefficient table to %s\n", a.out_path.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian functional model of longitudinal performance data"};
  app.set_version_flag("--version", std::string(garchfda::kVersion));
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "Run the Gibbs sampler on a record file");
  fit->add_option("--data", fit_args.data_path, "records CSV")->required();
  fit->add_option("--out", fit_args.out_dir, "output directory for the draws")->required();
  fit->add_option("--config", fit_args.config_path, "model configuration JSON");
  fit->add_option("--variant", fit_args.variant,
                  "model variant M1..M6 (ignored when --config is given)");
  fit->add_option("--iters", fit_args.iters, "Gibbs iterations");
  fit->add_option("--burnin", fit_args.burnin, "burn-in fraction in [0,1)");
  fit->add_option("--thin", fit_args.thin, "thinning stride");
  fit->add_option("--seed", fit_args.seed, "RNG seed");
  fit->add_option("--chains", fit_args.chains,
                  "independent chains, seeded seed, seed+1, ...");

  PredictArgs predict_args;
  CLI::App* predict =
      app.add_subcommand("predict", "Posterior trajectory and one-season-ahead band");
  predict->add_option("--draws", predict_args.draws_dir, "fit output directory")->required();
  predict->add_option("--athlete", predict_args.athlete, "athlete id or index")->required();
  predict->add_option("--out", predict_args.out_path, "trajectory CSV")->required();
  predict->add_option("--points", predict_args.points, "grid points over the record");
  predict->add_option("--pred-points", predict_args.pred_points,
                      "grid points over the predicted season");
  predict->add_option("--seed", predict_args.seed, "RNG seed for the predictive draws");

  LpmlArgs lpml_args;
  CLI::App* lpml = app.add_subcommand("lpml", "Pseudo marginal likelihood of a fit");
  lpml->add_option("--draws", lpml_args.draws_dir, "fit output directory")->required();
  lpml->add_option("--out", lpml_args.out_path, "per-observation log CPO CSV");

  SimulateArgs sim_args;
  CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic record set");
  simulate->add_option("--out", sim_args.out_dir, "output directory")->required();
  simulate->add_option("--athletes", sim_args.athletes, "number of athletes");
  simulate->add_option("--seasons", sim_args.seasons, "seasons per athlete");
  simulate->add_option("--per-season", sim_args.per_season, "observations per season");
  simulate->add_option("--df", sim_args.df, "basis dimension of the generating functions");
  simulate->add_option("--k", sim_args.k_true, "number of generating factors");
  simulate->add_option("--seasonal", sim_args.seasonal, "garch or ar1");
  simulate->add_option("--seed", sim_args.seed, "RNG seed");

  DiagnoseArgs diag_args;
  CLI::App* diagnose =
      app.add_subcommand("diagnose", "Run the simulation-based sampler consistency suite");
  diagnose->add_option("--sweeps", diag_args.sweeps, "recorded sweeps per check");
  diagnose->add_option("--burn", diag_args.burn, "discarded warm-up sweeps");
  diagnose->add_option("--seed", diag_args.seed, "RNG seed");
  diagnose->add_option("--threshold", diag_args.threshold, "|z| limit");
  diagnose->add_flag("--fault", diag_args.fault,
                     "inject a mis-scaled regeneration to confirm the checks have power");
  diagnose->add_flag("--skip-full-sweep", diag_args.skip_full_sweep,
                     "omit the whole-sampler check");

  SummarizeArgs sum_args;
  CLI::App* summarize_cmd =
      app.add_subcommand("summarize", "Describe a record file or a finished fit");
  summarize_cmd->add_option("--data", sum_args.data_path, "records CSV");
  summarize_cmd->add_option("--draws", sum_args.draws_dir, "fit output directory");
  summarize_cmd->add_option("--out", sum_args.out_path, "optional CSV destination");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (fit->parsed()) return run_fit(fit_args);
    if (predict->parsed()) return run_predict(predict_args);
    if (lpml->parsed()) return run_lpml(lpml_args);
    if (simulate->parsed()) return run_simulate(sim_args);
    if (diagnose->parsed()) return run_diagnose(diag_args);
    if (summarize_cmd->parsed()) return run_summarize(sum_args);
  } catch (const garchfda::SchemaError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const garchfda::NumericError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const garchfda::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
