#pragma once

/// Raw performance records and the preprocessing pipeline that turns them
/// into the fitting representation.
///
/// Time convention: an athlete's career clock starts on Jan 1 of the year of
/// their first recorded observation. Raw time is days since that origin; the
/// global divisor D (largest raw value in the corpus) rescales every clock to
/// [0, 1], so the latest observation of the longest career sits exactly at 1.
/// Seasons are 365.25-raw-day blocks, numbered from 1, left-closed at the
/// boundaries; on the rescaled axis one season has width 365.25 / D.
/// Responses are centered per athlete.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "garchfda/common.hpp"
#include "garchfda/config.hpp"
#include "garchfda/csv.hpp"

namespace garchfda {

inline constexpr double kDaysPerYear = 365.25;

/// Days since the civil epoch for a strict ISO 8601 calendar date
/// (YYYY-MM-DD). Returns false on any malformation, including impossible
/// dates like Feb 30.
inline bool days_from_iso(const std::string& s, long* out) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
    if (s[i] < '0' || s[i] > '9') return false;
  const int y = std::stoi(s.substr(0, 4));
  const unsigned mo = static_cast<unsigned>(std::stoi(s.substr(5, 2)));
  const unsigned d = static_cast<unsigned>(std::stoi(s.substr(8, 2)));
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo},
                                        std::chrono::day{d}};
  if (!ymd.ok()) return false;
  *out = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return true;
}

inline long days_of_jan1(const std::string& iso_date) {
  const int year = std::stoi(iso_date.substr(0, 4));
  return std::chrono::sys_days{std::chrono::year{year} / 1 / 1}.time_since_epoch().count();
}

struct RawRecord {
  std::string athlete_id;
  std::string event_date;  // original ISO strings kept for reporting
  std::string birth_date;
  long event_days = 0;  // civil-epoch day counts
  long birth_days = 0;
  double result_m = 0.0;
  int sex = 0;      // male 1, female 0
  int outdoor = 0;  // outdoor 1, indoor 0
  int doped = 0;
};

inline const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> cols{"athlete_id", "event_date", "result_m",
                                             "sex", "birth_date", "environment", "doped"};
  return cols;
}

namespace detail {

inline bool parse_double_strict(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  if (!std::isfinite(v)) return false;
  *out = v;
  return true;
}

}  // namespace detail

/// Strict loader: the header must match the documented schema exactly and
/// every row must parse. All offending rows are collected into a single
/// schema error naming line numbers and columns; nothing is ingested
/// partially.
inline std::vector<RawRecord> load_records(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  if (table.header != record_columns()) {
    std::string want = csv::join(record_columns());
    throw SchemaError("bad header in " + path + ": expected '" + want + "', got '" +
                      csv::join(table.header) + "'");
  }
  std::vector<RawRecord> records;
  records.reserve(table.rows.size());
  std::vector<std::string> problems;
  auto complain = [&](std::size_t row, const std::string& column, const std::string& why) {
    // Line number in the file: header is line 1.
    problems.push_back("line " + std::to_string(row + 2) + ", " + column + ": " + why);
  };
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& cells = table.rows[i];
    if (cells.size() != record_columns().size()) {
      complain(i, "row", "expected 7 cells, got " + std::to_string(cells.size()));
      continue;
    }
    RawRecord r;
    bool ok = true;
    r.athlete_id = cells[0];
    if (r.athlete_id.empty()) { complain(i, "athlete_id", "empty"); ok = false; }
    r.event_date = cells[1];
    if (!days_from_iso(cells[1], &r.event_days)) {
      complain(i, "event_date", "not an ISO date: '" + cells[1] + "'");
      ok = false;
    }
    if (!detail::parse_double_strict(cells[2], &r.result_m) || r.result_m <= 0.0) {
      complain(i, "result_m", "not a positive number: '" + cells[2] + "'");
      ok = false;
    }
    if (cells[3] == "M") r.sex = 1;
    else if (cells[3] == "F") r.sex = 0;
    else { complain(i, "sex", "expected M or F, got '" + cells[3] + "'"); ok = false; }
    r.birth_date = cells[4];
    if (!days_from_iso(cells[4], &r.birth_days)) {
      complain(i, "birth_date", "not an ISO date: '" + cells[4] + "'");
      ok = false;
    }
    if (cells[5] == "O") r.outdoor = 1;
    else if (cells[5] == "I") r.outdoor = 0;
    else { complain(i, "environment", "expected I or O, got '" + cells[5] + "'"); ok = false; }
    if (cells[6] == "0") r.doped = 0;
    else if (cells[6] == "1") r.doped = 1;
    else { complain(i, "doped", "expected 0 or 1, got '" + cells[6] + "'"); ok = false; }
    if (ok && r.event_days < r.birth_days) {
      complain(i, "event_date", "before birth_date");
      ok = false;
    }
    if (ok) records.push_back(std::move(r));
  }
  if (!problems.empty()) {
    std::string msg = std::to_string(problems.size()) + " malformed row(s) in " + path + ": ";
    const std::size_t shown = std::min<std::size_t>(problems.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) {
      if (i) msg += "; ";
      msg += problems[i];
    }
    if (shown < problems.size())
      msg += "; and " + std::to_string(problems.size() - shown) + " more";
    throw SchemaError(msg);
  }
  return records;
}

struct SummaryRow {
  std::string group;
  long count = 0;
  double mean = 0.0, sd = 0.0, max = 0.0, min = 0.0;
};

/// Descriptive statistics of result_m over the whole corpus and the usual
/// subgroups. sd uses the n-1 denominator; a singleton group reports sd 0.
inline std::vector<SummaryRow> summarize(const std::vector<RawRecord>& records) {
  auto stats = [&](const std::string& name, auto&& keep) {
    SummaryRow row;
    row.group = name;
    double sum = 0.0;
    row.max = -1e300;
    row.min = 1e300;
    for (const auto& r : records) {
      if (!keep(r)) continue;
      ++row.count;
      sum += r.result_m;
      row.max = std::max(row.max, r.result_m);
      row.min = std::min(row.min, r.result_m);
    }
    if (row.count == 0) {
      row.mean = row.sd = row.max = row.min = std::nan("");
      return row;
    }
    row.mean = sum / static_cast<double>(row.count);
    double ss = 0.0;
    for (const auto& r : records)
      if (keep(r)) ss += (r.result_m - row.mean) * (r.result_m - row.mean);
    row.sd = row.count > 1 ? std::sqrt(ss / static_cast<double>(row.count - 1)) : 0.0;
    return row;
  };
  return {
      stats("total", [](const RawRecord&) { return true; }),
      stats("female", [](const RawRecord& r) { return r.sex == 0; }),
      stats("male", [](const RawRecord& r) { return r.sex == 1; }),
      stats("not_doped", [](const RawRecord& r) { return r.doped == 0; }),
      stats("doped", [](const RawRecord& r) { return r.doped == 1; }),
      stats("indoor", [](const RawRecord& r) { return r.outdoor == 0; }),
      stats("outdoor", [](const RawRecord& r) { return r.outdoor == 1; }),
  };
}

inline void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows)
    cells.push_back({r.group, csv::format_double(r.mean), csv::format_double(r.sd),
                     csv::format_double(r.max), csv::format_double(r.min)});
  csv::write_file(path, {"group", "mean", "sd", "max", "min"}, cells);
}

struct AthleteData {
  std::string id;
  std::vector<double> times;     // rescaled, nondecreasing, in [0, 1]
  Eigen::VectorXd y;             // centered responses
  double y_bar = 0.0;
  std::vector<int> season;       // 1-based season index per observation
  int n_seasons = 0;             // S_i = largest season index
  std::vector<int> season_counts;        // g_is, s = 1..S_i (zeros allowed)
  std::vector<std::vector<int>> season_obs;  // observation indices per season
  Eigen::MatrixXd x;             // n_i x r covariate rows
  int sex = 0;
  int doped = 0;
  double age0_years = 0.0;       // age at the career origin

  int n_obs() const { return static_cast<int>(times.size()); }
};

struct PreparedDataset {
  std::vector<AthleteData> athletes;
  double time_divisor_days = 1.0;       // D
  double season_length_days = kDaysPerYear;
  std::vector<Covariate> covariates;
  AgeMode age_mode = AgeMode::time_dependent;
  long total_obs = 0;

  int n_athletes() const { return static_cast<int>(athletes.size()); }
  int n_covariates() const { return static_cast<int>(covariates.size()); }
  /// Season width on the rescaled axis.
  double amplitude() const { return season_length_days / time_divisor_days; }
  int season_of(double t) const {
    return 1 + static_cast<int>(std::floor(t * time_divisor_days / season_length_days));
  }

  /// Covariate row for athlete i at an arbitrary rescaled time, used on
  /// evaluation grids and for prediction. Sex and the doping flag are
  /// athlete-constant; age advances with the clock (or stays at the career
  /// origin in time-constant mode); the environment follows the winter rule:
  /// indoor when the day-of-year falls before March 31 or on/after Nov 1.
  Eigen::VectorXd grid_covariates(int athlete, double t) const {
    const AthleteData& a = athletes[static_cast<std::size_t>(athlete)];
    Eigen::VectorXd row(n_covariates());
    for (int c = 0; c < n_covariates(); ++c) {
      switch (covariates[static_cast<std::size_t>(c)]) {
        case Covariate::sex: row[c] = a.sex; break;
        case Covariate::age:
          row[c] = age_mode == AgeMode::time_dependent
                       ? a.age0_years + t * time_divisor_days / kDaysPerYear
                       : a.age0_years;
          break;
        case Covariate::environment: {
          const double doy = std::fmod(t * time_divisor_days, kDaysPerYear);
          row[c] = (doy >= 90.0 && doy < 304.0) ? 1.0 : 0.0;
          break;
        }
        case Covariate::doping: row[c] = a.doped; break;
      }
    }
    return row;
  }
};

/// Records -> fitting representation. Athletes are ordered by id and
/// observations by date, so the result is a pure function of the record set.
inline PreparedDataset prepare(const std::vector<RawRecord>& records,
                               const ModelConfig& config) {
  if (records.empty()) throw SchemaError("no records to prepare");
  std::map<std::string, std::vector<const RawRecord*>> by_athlete;
  for (const auto& r : records) by_athlete[r.athlete_id].push_back(&r);

  PreparedDataset out;
  out.season_length_days = config.season_length_days;
  out.covariates = config.covariates;
  out.age_mode = config.age_mode;

  // Pass 1: per-athlete career origins and the global divisor.
  struct Grouped {
    std::vector<const RawRecord*> recs;
    long day0 = 0;
  };
  std::vector<Grouped> groups;
  double divisor = 0.0;
  for (auto& [id, recs] : by_athlete) {
    Grouped g;
    g.recs = recs;
    std::stable_sort(g.recs.begin(), g.recs.end(),
                     [](const RawRecord* a, const RawRecord* b) {
                       return a->event_days < b->event_days;
                     });
    g.day0 = days_of_jan1(g.recs.front()->event_date);
    for (const auto* r : g.recs)
      divisor = std::max(divisor, static_cast<double>(r->event_days - g.day0));
    const int sex = g.recs.front()->sex;
    const long birth = g.recs.front()->birth_days;
    for (const auto* r : g.recs) {
      if (r->sex != sex)
        throw SchemaError("athlete " + id + " has inconsistent sex values");
      if (r->birth_days != birth)
        throw SchemaError("athlete " + id + " has inconsistent birth dates");
    }
    groups.push_back(std::move(g));
  }
  if (divisor <= 0.0) divisor = 1.0;  // degenerate corpus: every clock at day 0
  out.time_divisor_days = divisor;

  // Pass 2: build the per-athlete blocks.
  for (auto& g : groups) {
    AthleteData a;
    const RawRecord& first = *g.recs.front();
    a.id = first.athlete_id;
    a.sex = first.sex;
    a.doped = 0;
    for (const auto* r : g.recs) a.doped = std::max(a.doped, r->doped);
    a.age0_years = static_cast<double>(g.day0 - first.birth_days) / kDaysPerYear;

    const int n = static_cast<int>(g.recs.size());
    a.times.resize(static_cast<std::size_t>(n));
    a.y.resize(n);
    a.season.resize(static_cast<std::size_t>(n));
    double mean = 0.0;
    for (int j = 0; j < n; ++j) {
      const RawRecord& r = *g.recs[static_cast<std::size_t>(j)];
      const double raw = static_cast<double>(r.event_days - g.day0);
      a.times[static_cast<std::size_t>(j)] = raw / divisor;
      a.season[static_cast<std::size_t>(j)] =
          1 + static_cast<int>(std::floor(raw / out.season_length_days));
      a.y[j] = r.result_m;
      mean += r.result_m;
    }
    mean /= static_cast<double>(n);
    a.y_bar = mean;
    a.y.array() -= mean;
    a.n_seasons = *std::max_element(a.season.begin(), a.season.end());
    a.season_counts.assign(static_cast<std::size_t>(a.n_seasons), 0);
    a.season_obs.assign(static_cast<std::size_t>(a.n_seasons), {});
    for (int j = 0; j < n; ++j) {
      const int s = a.season[static_cast<std::size_t>(j)];
      a.season_counts[static_cast<std::size_t>(s - 1)] += 1;
      a.season_obs[static_cast<std::size_t>(s - 1)].push_back(j);
    }

    a.x.resize(n, static_cast<Eigen::Index>(config.covariates.size()));
    for (int j = 0; j < n; ++j) {
      const RawRecord& r = *g.recs[static_cast<std::size_t>(j)];
      for (int c = 0; c < static_cast<int>(config.covariates.size()); ++c) {
        switch (config.covariates[static_cast<std::size_t>(c)]) {
          case Covariate::sex: a.x(j, c) = r.sex; break;
          case Covariate::age:
            a.x(j, c) = config.age_mode == AgeMode::time_dependent
                            ? static_cast<double>(r.event_days - r.birth_days) / kDaysPerYear
                            : a.age0_years;
            break;
          case Covariate::environment: a.x(j, c) = r.outdoor; break;
          case Covariate::doping: a.x(j, c) = r.doped; break;
        }
      }
    }
    out.total_obs += n;
    out.athletes.push_back(std::move(a));
  }
  return out;
}

}  // namespace garchfda
