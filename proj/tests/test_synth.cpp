#include "garchfda/synth.hpp"

#include <gtest/gtest.h>

#include <filesystem>

namespace {

using namespace garchfda;

TEST(SynthPanel, ShapesAndDeterminism) {
  SynthConfig sc;
  sc.n_athletes = 5;
  sc.seasons = 3;
  sc.per_season = 4;
  sc.df = 8;
  sc.k_true = 2;
  sc.iid_covariates = 2;
  sc.seed = 11u;
  const SynthResult a = simulate_panel(sc);
  const SynthResult b = simulate_panel(sc);
  ASSERT_EQ(a.data.n_athletes(), 5);
  EXPECT_EQ(a.data.total_obs, 5 * 3 * 4);
  for (const auto& ath : a.data.athletes) {
    EXPECT_EQ(ath.n_seasons, 3);
    EXPECT_DOUBLE_EQ(ath.y_bar, 0.0);
    for (int cnt : ath.season_counts) EXPECT_EQ(cnt, 4);
    EXPECT_TRUE(std::is_sorted(ath.times.begin(), ath.times.end()));
    EXPECT_LT(ath.times.back(), 1.0);
    for (int j = 0; j < ath.n_obs(); ++j)
      EXPECT_EQ(a.data.season_of(ath.times[static_cast<std::size_t>(j)]),
                ath.season[static_cast<std::size_t>(j)]);
  }
  for (int i = 0; i < 5; ++i) {
    EXPECT_TRUE((a.data.athletes[static_cast<std::size_t>(i)].y.array() ==
                 b.data.athletes[static_cast<std::size_t>(i)].y.array())
                    .all());
    EXPECT_TRUE((a.data.athletes[static_cast<std::size_t>(i)].x.array() ==
                 b.data.athletes[static_cast<std::size_t>(i)].x.array())
                    .all());
  }
  EXPECT_TRUE((a.truth.theta.array() == b.truth.theta.array()).all());
  sc.seed = 12u;
  const SynthResult c = simulate_panel(sc);
  EXPECT_FALSE((a.data.athletes[0].y.array() == c.data.athletes[0].y.array()).all());
}

TEST(SynthPanel, TruthGuardsHold) {
  SynthConfig sc;
  sc.n_athletes = 8;
  sc.seasons = 4;
  sc.per_season = 3;
  sc.df = 10;
  sc.k_true = 3;
  for (unsigned seed : {1u, 2u, 3u, 4u}) {
    sc.seed = seed;
    sc.seasonal = SeasonalKind::garch;
    const SynthTruth tr = simulate_panel(sc).truth;
    for (int h = 0; h < sc.k_true; ++h) {
      const double rms = std::sqrt(tr.lambda.col(h).squaredNorm() / sc.df);
      EXPECT_GE(rms, sc.min_column_rms);
    }
    EXPECT_GT(tr.alpha0, 0.0);
    EXPECT_LE(tr.alpha0, sc.max_alpha0);
    EXPECT_LE(tr.alpha1 + tr.varpi, sc.max_recursion_sum);
    EXPECT_GE(tr.psi2, sc.psi2_lo);
    EXPECT_LE(tr.psi2, sc.psi2_hi);
    EXPECT_EQ(static_cast<int>(tr.mu.size()), sc.n_athletes);
    for (const auto& mu : tr.mu) EXPECT_EQ(static_cast<int>(mu.size()), sc.seasons);

    sc.seasonal = SeasonalKind::ar1;
    const SynthTruth ar = simulate_panel(sc).truth;
    EXPECT_GT(ar.sigma_mu2, 0.0);
    for (int i = 0; i < sc.n_athletes; ++i) EXPECT_LE(std::abs(ar.rho[i]), sc.max_abs_rho);
  }
}

TEST(SynthPanel, RejectsBadShapes) {
  SynthConfig sc;
  sc.n_athletes = 0;
  EXPECT_THROW(simulate_panel(sc), SchemaError);
  sc.n_athletes = 2;
  sc.k_true = 50;
  sc.df = 8;
  EXPECT_THROW(simulate_panel(sc), SchemaError);
}

TEST(SynthRecords, RoundTripThroughPreparation) {
  SynthConfig sc;
  sc.n_athletes = 6;
  sc.seasons = 3;
  sc.per_season = 4;
  sc.df = 8;
  sc.k_true = 2;
  sc.seed = 21u;
  const SynthRecords sim = simulate_records(sc);
  ASSERT_EQ(static_cast<int>(sim.records.size()), 6 * 3 * 4);
  EXPECT_EQ(static_cast<int>(sim.truth.beta.size()), 2);

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "garchfda_tests" / "synth_records";
  fs::create_directories(dir);
  const std::string csv_path = (dir / "records.csv").string();
  write_records_csv(sim.records, csv_path);

  const std::vector<RawRecord> loaded = load_records(csv_path);
  ASSERT_EQ(loaded.size(), sim.records.size());

  ModelConfig cfg = ModelConfig::for_variant(Variant::custom);
  cfg.covariates = {Covariate::sex, Covariate::environment};
  const PreparedDataset data = prepare(loaded, cfg);
  ASSERT_EQ(data.n_athletes(), 6);
  EXPECT_DOUBLE_EQ(data.time_divisor_days,
                   std::floor(3.0 * kDaysPerYear) - 1.0);
  long idx = 0;
  for (int i = 0; i < 6; ++i) {
    const AthleteData& a = data.athletes[static_cast<std::size_t>(i)];
    EXPECT_EQ(a.n_seasons, 3);
    EXPECT_EQ(a.n_obs(), 12);
    double mean = 0.0;
    for (int j = 0; j < a.n_obs(); ++j) {
      const RawRecord& rec = sim.records[static_cast<std::size_t>(idx + j)];
      EXPECT_DOUBLE_EQ(a.x(j, 0), static_cast<double>(rec.sex));
      EXPECT_DOUBLE_EQ(a.x(j, 1), static_cast<double>(rec.outdoor));
      mean += rec.result_m;
    }
    mean /= 12.0;
    EXPECT_NEAR(a.y_bar, mean, 1e-9);
    for (int j = 0; j < a.n_obs(); ++j)
      EXPECT_NEAR(a.y[j] + a.y_bar, sim.records[static_cast<std::size_t>(idx + j)].result_m,
                  1e-9);
    idx += 12;
  }
}

TEST(SynthRecords, TruthSerializesToJson) {
  SynthConfig sc;
  sc.n_athletes = 3;
  sc.seasons = 2;
  sc.per_season = 2;
  sc.df = 6;
  sc.k_true = 1;
  sc.seed = 31u;
  const SynthResult sim = simulate_panel(sc);
  const nlohmann::json j = truth_to_json(sim.truth);
  EXPECT_EQ(j.at("theta").size(), 3u);
  EXPECT_EQ(j.at("theta")[0].size(), 6u);
  EXPECT_EQ(j.at("mu").size(), 3u);
  EXPECT_DOUBLE_EQ(j.at("psi2").get<double>(), sim.truth.psi2);
  EXPECT_DOUBLE_EQ(j.at("m").get<double>(), sim.truth.m);
}

}  // namespace
