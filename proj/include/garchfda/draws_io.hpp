#pragma once

/// Draw storage: a fit writes a directory holding a JSON manifest (resolved
/// configuration, dimensions, dataset fingerprint, format version) plus one
/// CSV per parameter family and a copy of the prepared dataset, so later
/// commands can evaluate trajectories, predictions, and predictive scores
/// without re-reading the raw data. Values round-trip exactly; two fits with
/// the same seed, configuration, and data write byte-identical files.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "garchfda/common.hpp"
#include "garchfda/csv.hpp"
#include "garchfda/dataset.hpp"
#include "garchfda/sampler.hpp"
#include "json.hpp"

namespace garchfda {

inline constexpr int kDrawsFormatVersion = 1;

namespace detail {

inline std::uint64_t fnv1a(std::uint64_t h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string csv_text(const std::vector<std::string>& header,
                            const std::vector<std::vector<std::string>>& rows) {
  std::string out = csv::join(header) + '\n';
  for (const auto& r : rows) out += csv::join(r) + '\n';
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

inline double parse_double_cell(const std::string& cell, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw SchemaError("bad numeric cell '" + cell + "' in " + where);
  }
}

inline long parse_long_cell(const std::string& cell, const std::string& where) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw SchemaError("bad integer cell '" + cell + "' in " + where);
  }
}

inline void require_header(const csv::Table& t, const std::vector<std::string>& want,
                           const std::string& file) {
  if (t.header != want)
    throw SchemaError("unexpected column layout in " + file);
}

}  // namespace detail

/// Dataset serialization shared by the draws directory and the synthetic
/// generator's truth bundle: one row per observation plus a per-athlete
/// metadata table.
inline void dataset_tables(const PreparedDataset& data,
                           std::vector<std::string>& athlete_header,
                           std::vector<std::vector<std::string>>& athlete_rows,
                           std::vector<std::string>& obs_header,
                           std::vector<std::vector<std::string>>& obs_rows) {
  athlete_header = {"athlete", "id", "y_bar", "sex", "doped", "age0_years", "n_seasons"};
  athlete_rows.clear();
  obs_header = {"athlete", "t", "y_centered", "season"};
  for (int c = 0; c < data.n_covariates(); ++c)
    obs_header.push_back("x_" + std::to_string(c));
  obs_rows.clear();
  for (int i = 0; i < data.n_athletes(); ++i) {
    const AthleteData& a = data.athletes[static_cast<std::size_t>(i)];
    athlete_rows.push_back({std::to_string(i), a.id, csv::format_double(a.y_bar),
                            std::to_string(a.sex), std::to_string(a.doped),
                            csv::format_double(a.age0_years), std::to_string(a.n_seasons)});
    for (int j = 0; j < a.n_obs(); ++j) {
      std::vector<std::string> row{std::to_string(i),
                                   csv::format_double(a.times[static_cast<std::size_t>(j)]),
                                   csv::format_double(a.y[j]),
                                   std::to_string(a.season[static_cast<std::size_t>(j)])};
      for (int c = 0; c < data.n_covariates(); ++c)
        row.push_back(csv::format_double(a.x(j, c)));
      obs_rows.push_back(std::move(row));
    }
  }
}

/// Content hash of the prepared data exactly as serialized. Identifies the
/// dataset a draws directory belongs to.
inline std::string dataset_fingerprint(const PreparedDataset& data) {
  std::vector<std::string> ah, oh;
  std::vector<std::vector<std::string>> ar, orr;
  dataset_tables(data, ah, ar, oh, orr);
  std::uint64_t h = 14695981039346656037ull;
  h = detail::fnv1a(h, detail::csv_text(ah, ar));
  h = detail::fnv1a(h, detail::csv_text(oh, orr));
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void serialize_draws(const PosteriorDraws& draws, const PreparedDataset& data,
                            const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create draws directory: " + dir);

  std::vector<std::string> ah, oh;
  std::vector<std::vector<std::string>> ar, orr;
  dataset_tables(data, ah, ar, oh, orr);
  detail::write_text(dir + "/athletes.csv", detail::csv_text(ah, ar));
  detail::write_text(dir + "/prepared.csv", detail::csv_text(oh, orr));

  const bool garch = draws.is_garch();
  const long keep = draws.retained();
  const int r = draws.n_covariates;
  const int p = draws.df;

  std::vector<std::string> scalar_header{"iteration", "k", "psi2", "sigma_beta_inv2"};
  if (garch) {
    scalar_header.insert(scalar_header.end(), {"m", "alpha0", "alpha1", "varpi"});
  } else {
    scalar_header.push_back("sigma_mu2");
  }
  std::vector<std::vector<std::string>> scalar_rows;
  for (long g = 0; g < keep; ++g) {
    std::vector<std::string> row{std::to_string(draws.iteration[static_cast<std::size_t>(g)]),
                                 std::to_string(draws.k_path[static_cast<std::size_t>(g)]),
                                 csv::format_double(draws.psi2[g]),
                                 csv::format_double(draws.sigma_beta_inv2[g])};
    if (garch) {
      row.push_back(csv::format_double(draws.m[g]));
      row.push_back(csv::format_double(draws.alpha0[g]));
      row.push_back(csv::format_double(draws.alpha1[g]));
      row.push_back(csv::format_double(draws.varpi[g]));
    } else {
      row.push_back(csv::format_double(draws.sigma_mu2[g]));
    }
    scalar_rows.push_back(std::move(row));
  }
  csv::write_file(dir + "/scalars.csv", scalar_header, scalar_rows);

  std::vector<std::string> beta_header{"iteration"};
  for (int c = 0; c < r; ++c) beta_header.push_back("beta_" + std::to_string(c));
  std::vector<std::vector<std::string>> beta_rows;
  for (long g = 0; g < keep; ++g) {
    std::vector<std::string> row{std::to_string(draws.iteration[static_cast<std::size_t>(g)])};
    for (int c = 0; c < r; ++c) row.push_back(csv::format_double(draws.beta(g, c)));
    beta_rows.push_back(std::move(row));
  }
  csv::write_file(dir + "/beta.csv", beta_header, beta_rows);

  std::vector<std::string> theta_header{"iteration", "athlete"};
  for (int j = 0; j < p; ++j) theta_header.push_back("theta_" + std::to_string(j));
  std::vector<std::vector<std::string>> theta_rows;
  for (long g = 0; g < keep; ++g)
    for (int i = 0; i < draws.n_athletes; ++i) {
      std::vector<std::string> row{std::to_string(draws.iteration[static_cast<std::size_t>(g)]),
                                   std::to_string(i)};
      for (int j = 0; j < p; ++j)
        row.push_back(csv::format_double(draws.theta[static_cast<std::size_t>(g)](i, j)));
      theta_rows.push_back(std::move(row));
    }
  csv::write_file(dir + "/theta.csv", theta_header, theta_rows);

  std::vector<std::vector<std::string>> mu_rows;
  for (long g = 0; g < keep; ++g)
    for (int i = 0; i < draws.n_athletes; ++i) {
      const Eigen::VectorXd& mu = draws.mu[static_cast<std::size_t>(g)][static_cast<std::size_t>(i)];
      for (Eigen::Index s = 0; s < mu.size(); ++s)
        mu_rows.push_back({std::to_string(draws.iteration[static_cast<std::size_t>(g)]),
                           std::to_string(i), std::to_string(s + 1),
                           csv::format_double(mu[s])});
    }
  csv::write_file(dir + "/mu.csv", {"iteration", "athlete", "season", "value"}, mu_rows);

  if (!garch) {
    std::vector<std::vector<std::string>> rho_rows;
    for (long g = 0; g < keep; ++g)
      for (int i = 0; i < draws.n_athletes; ++i)
        rho_rows.push_back({std::to_string(draws.iteration[static_cast<std::size_t>(g)]),
                            std::to_string(i), csv::format_double(draws.rho(g, i))});
    csv::write_file(dir + "/rho.csv", {"iteration", "athlete", "value"}, rho_rows);
  }

  nlohmann::json manifest;
  manifest["format_version"] = kDrawsFormatVersion;
  manifest["tool_version"] = kVersion;
  manifest["config"] = draws.config;
  manifest["dataset_fingerprint"] = dataset_fingerprint(data);
  manifest["n_athletes"] = draws.n_athletes;
  manifest["df"] = draws.df;
  manifest["n_covariates"] = draws.n_covariates;
  manifest["n_seasons"] = draws.n_seasons;
  manifest["retained"] = keep;
  manifest["total_obs"] = data.total_obs;
  manifest["time_divisor_days"] = data.time_divisor_days;
  manifest["season_length_days"] = data.season_length_days;
  manifest["alpha_accept_rate"] = draws.alpha_accept_rate;
  manifest["varpi_accept_rate"] = draws.varpi_accept_rate;
  detail::write_text(dir + "/manifest.json", manifest.dump(2) + "\n");
}

struct FitArtifacts {
  PosteriorDraws draws;
  PreparedDataset data;
};

inline FitArtifacts deserialize_draws(const std::string& dir) {
  const std::string manifest_path = dir + "/manifest.json";
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(detail::read_text(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("cannot parse " + manifest_path + ": " + e.what());
  }

  FitArtifacts out;
  try {
    if (manifest.at("format_version").get<int>() != kDrawsFormatVersion)
      throw SchemaError("draws directory uses format version " +
                        manifest.at("format_version").dump() + "; this build reads version " +
                        std::to_string(kDrawsFormatVersion));
    manifest.at("config").get_to(out.draws.config);
    manifest.at("n_athletes").get_to(out.draws.n_athletes);
    manifest.at("df").get_to(out.draws.df);
    manifest.at("n_covariates").get_to(out.draws.n_covariates);
    manifest.at("n_seasons").get_to(out.draws.n_seasons);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("incomplete manifest " + manifest_path + ": " + e.what());
  }
  const long keep = manifest.at("retained").get<long>();
  const int n = out.draws.n_athletes;
  const int p = out.draws.df;
  const int r = out.draws.n_covariates;
  const bool garch = out.draws.is_garch();
  if (static_cast<int>(out.draws.n_seasons.size()) != n)
    throw SchemaError("manifest season table does not match athlete count");
  out.draws.alpha_accept_rate = manifest.value("alpha_accept_rate", 0.0);
  out.draws.varpi_accept_rate = manifest.value("varpi_accept_rate", 0.0);

  // Prepared dataset first; the fingerprint proves the draw files belong to
  // these exact data.
  const std::string athletes_text = detail::read_text(dir + "/athletes.csv");
  const std::string prepared_text = detail::read_text(dir + "/prepared.csv");
  {
    std::uint64_t h = 14695981039346656037ull;
    h = detail::fnv1a(h, athletes_text);
    h = detail::fnv1a(h, prepared_text);
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    if (manifest.at("dataset_fingerprint").get<std::string>() != buf)
      throw SchemaError("dataset files in " + dir +
                        " do not match the manifest fingerprint; the directory was modified");
  }

  out.data.time_divisor_days = manifest.at("time_divisor_days").get<double>();
  out.data.season_length_days = manifest.at("season_length_days").get<double>();
  out.data.covariates = out.draws.config.covariates;
  out.data.age_mode = out.draws.config.age_mode;

  {
    std::istringstream in(athletes_text);
    const csv::Table t = csv::parse(in);
    detail::require_header(
        t, {"athlete", "id", "y_bar", "sex", "doped", "age0_years", "n_seasons"},
        "athletes.csv");
    if (static_cast<int>(t.rows.size()) != n)
      throw SchemaError("athletes.csv row count does not match the manifest");
    out.data.athletes.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto& row = t.rows[static_cast<std::size_t>(i)];
      if (row.size() != 7) throw SchemaError("ragged row in athletes.csv");
      if (detail::parse_long_cell(row[0], "athletes.csv") != i)
        throw SchemaError("athletes.csv rows are not in index order");
      AthleteData& a = out.data.athletes[static_cast<std::size_t>(i)];
      a.id = row[1];
      a.y_bar = detail::parse_double_cell(row[2], "athletes.csv");
      a.sex = static_cast<int>(detail::parse_long_cell(row[3], "athletes.csv"));
      a.doped = static_cast<int>(detail::parse_long_cell(row[4], "athletes.csv"));
      a.age0_years = detail::parse_double_cell(row[5], "athletes.csv");
      a.n_seasons = static_cast<int>(detail::parse_long_cell(row[6], "athletes.csv"));
      if (a.n_seasons != out.draws.n_seasons[static_cast<std::size_t>(i)])
        throw SchemaError("athletes.csv season count disagrees with the manifest");
    }
  }
  {
    std::istringstream in(prepared_text);
    const csv::Table t = csv::parse(in);
    std::vector<std::string> want{"athlete", "t", "y_centered", "season"};
    for (int c = 0; c < r; ++c) want.push_back("x_" + std::to_string(c));
    detail::require_header(t, want, "prepared.csv");
    std::vector<std::vector<double>> ys(static_cast<std::size_t>(n));
    std::vector<std::vector<Eigen::VectorXd>> xs(static_cast<std::size_t>(n));
    for (const auto& row : t.rows) {
      if (static_cast<int>(row.size()) != 4 + r)
        throw SchemaError("ragged row in prepared.csv");
      const long i = detail::parse_long_cell(row[0], "prepared.csv");
      if (i < 0 || i >= n) throw SchemaError("athlete index out of range in prepared.csv");
      AthleteData& a = out.data.athletes[static_cast<std::size_t>(i)];
      a.times.push_back(detail::parse_double_cell(row[1], "prepared.csv"));
      ys[static_cast<std::size_t>(i)].push_back(
          detail::parse_double_cell(row[2], "prepared.csv"));
      const long s = detail::parse_long_cell(row[3], "prepared.csv");
      if (s < 1 || s > a.n_seasons)
        throw SchemaError("season index out of range in prepared.csv");
      a.season.push_back(static_cast<int>(s));
      Eigen::VectorXd x(r);
      for (int c = 0; c < r; ++c)
        x[c] = detail::parse_double_cell(row[static_cast<std::size_t>(4 + c)], "prepared.csv");
      xs[static_cast<std::size_t>(i)].push_back(std::move(x));
    }
    out.data.total_obs = 0;
    for (int i = 0; i < n; ++i) {
      AthleteData& a = out.data.athletes[static_cast<std::size_t>(i)];
      const int ni = static_cast<int>(a.times.size());
      a.y.resize(ni);
      a.x.resize(ni, r);
      for (int j = 0; j < ni; ++j) {
        a.y[j] = ys[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        a.x.row(j) = xs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].transpose();
      }
      a.season_counts.assign(static_cast<std::size_t>(a.n_seasons), 0);
      a.season_obs.assign(static_cast<std::size_t>(a.n_seasons), {});
      for (int j = 0; j < ni; ++j) {
        a.season_counts[static_cast<std::size_t>(a.season[static_cast<std::size_t>(j)] - 1)] += 1;
        a.season_obs[static_cast<std::size_t>(a.season[static_cast<std::size_t>(j)] - 1)]
            .push_back(j);
      }
      out.data.total_obs += ni;
    }
  }
  if (out.data.total_obs != manifest.at("total_obs").get<long>())
    throw SchemaError("prepared.csv observation count does not match the manifest");

  PosteriorDraws& d = out.draws;
  {
    const csv::Table t = csv::read_file(dir + "/scalars.csv");
    std::vector<std::string> want{"iteration", "k", "psi2", "sigma_beta_inv2"};
    if (garch) want.insert(want.end(), {"m", "alpha0", "alpha1", "varpi"});
    else want.push_back("sigma_mu2");
    detail::require_header(t, want, "scalars.csv");
    if (static_cast<long>(t.rows.size()) != keep)
      throw SchemaError("scalars.csv is truncated: expected " + std::to_string(keep) +
                        " rows, found " + std::to_string(t.rows.size()));
    d.psi2.resize(keep);
    d.sigma_beta_inv2.resize(keep);
    if (garch) {
      d.m.resize(keep);
      d.alpha0.resize(keep);
      d.alpha1.resize(keep);
      d.varpi.resize(keep);
    } else {
      d.sigma_mu2.resize(keep);
    }
    for (long g = 0; g < keep; ++g) {
      const auto& row = t.rows[static_cast<std::size_t>(g)];
      if (row.size() != want.size()) throw SchemaError("ragged row in scalars.csv");
      d.iteration.push_back(detail::parse_long_cell(row[0], "scalars.csv"));
      d.k_path.push_back(static_cast<int>(detail::parse_long_cell(row[1], "scalars.csv")));
      d.psi2[g] = detail::parse_double_cell(row[2], "scalars.csv");
      d.sigma_beta_inv2[g] = detail::parse_double_cell(row[3], "scalars.csv");
      if (garch) {
        d.m[g] = detail::parse_double_cell(row[4], "scalars.csv");
        d.alpha0[g] = detail::parse_double_cell(row[5], "scalars.csv");
        d.alpha1[g] = detail::parse_double_cell(row[6], "scalars.csv");
        d.varpi[g] = detail::parse_double_cell(row[7], "scalars.csv");
      } else {
        d.sigma_mu2[g] = detail::parse_double_cell(row[4], "scalars.csv");
      }
    }
  }
  {
    const csv::Table t = csv::read_file(dir + "/beta.csv");
    std::vector<std::string> want{"iteration"};
    for (int c = 0; c < r; ++c) want.push_back("beta_" + std::to_string(c));
    detail::require_header(t, want, "beta.csv");
    if (static_cast<long>(t.rows.size()) != keep)
      throw SchemaError("beta.csv is truncated");
    d.beta.resize(keep, r);
    for (long g = 0; g < keep; ++g) {
      const auto& row = t.rows[static_cast<std::size_t>(g)];
      if (row.size() != want.size()) throw SchemaError("ragged row in beta.csv");
      if (detail::parse_long_cell(row[0], "beta.csv") != d.iteration[static_cast<std::size_t>(g)])
        throw SchemaError("beta.csv iteration order disagrees with scalars.csv");
      for (int c = 0; c < r; ++c)
        d.beta(g, c) = detail::parse_double_cell(row[static_cast<std::size_t>(1 + c)], "beta.csv");
    }
  }
  {
    const csv::Table t = csv::read_file(dir + "/theta.csv");
    std::vector<std::string> want{"iteration", "athlete"};
    for (int j = 0; j < p; ++j) want.push_back("theta_" + std::to_string(j));
    detail::require_header(t, want, "theta.csv");
    if (static_cast<long>(t.rows.size()) != keep * n)
      throw SchemaError("theta.csv is truncated");
    d.theta.assign(static_cast<std::size_t>(keep), Eigen::MatrixXd(n, p));
    for (long g = 0; g < keep; ++g)
      for (int i = 0; i < n; ++i) {
        const auto& row = t.rows[static_cast<std::size_t>(g * n + i)];
        if (row.size() != want.size()) throw SchemaError("ragged row in theta.csv");
        if (detail::parse_long_cell(row[0], "theta.csv") !=
                d.iteration[static_cast<std::size_t>(g)] ||
            detail::parse_long_cell(row[1], "theta.csv") != i)
          throw SchemaError("theta.csv row order disagrees with the manifest layout");
        for (int j = 0; j < p; ++j)
          d.theta[static_cast<std::size_t>(g)](i, j) =
              detail::parse_double_cell(row[static_cast<std::size_t>(2 + j)], "theta.csv");
      }
  }
  {
    const csv::Table t = csv::read_file(dir + "/mu.csv");
    detail::require_header(t, {"iteration", "athlete", "season", "value"}, "mu.csv");
    long want_rows = 0;
    for (int i = 0; i < n; ++i) want_rows += d.n_seasons[static_cast<std::size_t>(i)];
    want_rows *= keep;
    if (static_cast<long>(t.rows.size()) != want_rows)
      throw SchemaError("mu.csv is truncated");
    d.mu.assign(static_cast<std::size_t>(keep), {});
    for (long g = 0; g < keep; ++g) {
      auto& per_athlete = d.mu[static_cast<std::size_t>(g)];
      per_athlete.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i)
        per_athlete[static_cast<std::size_t>(i)].resize(d.n_seasons[static_cast<std::size_t>(i)]);
    }
    std::size_t idx = 0;
    for (long g = 0; g < keep; ++g)
      for (int i = 0; i < n; ++i)
        for (int s = 0; s < d.n_seasons[static_cast<std::size_t>(i)]; ++s, ++idx) {
          const auto& row = t.rows[idx];
          if (row.size() != 4) throw SchemaError("ragged row in mu.csv");
          if (detail::parse_long_cell(row[0], "mu.csv") !=
                  d.iteration[static_cast<std::size_t>(g)] ||
              detail::parse_long_cell(row[1], "mu.csv") != i ||
              detail::parse_long_cell(row[2], "mu.csv") != s + 1)
            throw SchemaError("mu.csv row order disagrees with the manifest layout");
          d.mu[static_cast<std::size_t>(g)][static_cast<std::size_t>(i)][s] =
              detail::parse_double_cell(row[3], "mu.csv");
        }
  }
  if (!garch) {
    const csv::Table t = csv::read_file(dir + "/rho.csv");
    detail::require_header(t, {"iteration", "athlete", "value"}, "rho.csv");
    if (static_cast<long>(t.rows.size()) != keep * n)
      throw SchemaError("rho.csv is truncated");
    d.rho.resize(keep, n);
    for (long g = 0; g < keep; ++g)
      for (int i = 0; i < n; ++i) {
        const auto& row = t.rows[static_cast<std::size_t>(g * n + i)];
        if (row.size() != 3) throw SchemaError("ragged row in rho.csv");
        d.rho(g, i) = detail::parse_double_cell(row[2], "rho.csv");
      }
  }
  return out;
}

}  // namespace garchfda
