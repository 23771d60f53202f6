#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "relaysec/harness/report.hpp"
#include "relaysec/harness/self_check.hpp"

using namespace relaysec;
using namespace relaysec::harness;
namespace fs = std::filesystem;

namespace {

ExperimentSpec tiny_spec() {
  ExperimentSpec s;
  s.system.n_src = 2;
  s.system.n_relay = 2;
  s.trials = 3;
  s.eps_values = {0.0, 0.01};
  s.r_b_values = {3.0};
  s.r_e_values = {0.0};
  s.p_s_values = {10.0};
  s.eve_samples = 50;
  s.root_seed = 11;
  s.threads = 1;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream b;
  b << in.rdbuf();
  return b.str();
}

fs::path scratch_dir(const std::string& leaf) {
  const fs::path d = fs::temp_directory_path() / ("relaysec_test_" + leaf);
  fs::remove_all(d);
  return d;
}

std::string config_error(const std::string& text) {
  try {
    spec_from_text(text);
  } catch (const InvalidConfig& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
  const ExperimentSpec s = spec_from_text("{}");
  EXPECT_EQ(s.trials, 100);
  EXPECT_EQ(s.system.n_relay, 3);
  EXPECT_DOUBLE_EQ(s.system.r_b, db_to_linear(3.0));
  EXPECT_DOUBLE_EQ(s.system.r_e, 1.0);
}

TEST(Config, EchoRoundTrips) {
  ExperimentSpec s = tiny_spec();
  s.r_e_db = -4.5;
  s.sigma_e_flag = true;
  s.sync_thresholds();
  const ExperimentSpec back = spec_from_json(spec_to_json(s));
  EXPECT_EQ(spec_to_json(back).dump(), spec_to_json(s).dump());
  EXPECT_DOUBLE_EQ(back.system.r_e, db_to_linear(-4.5));
}

TEST(Config, ErrorsNameTheOffendingField) {
  EXPECT_NE(config_error(R"({"system": {"n_relays": 3}})").find("n_relays"), std::string::npos);
  EXPECT_NE(config_error(R"({"solver": {}})").find("solver"), std::string::npos);
  EXPECT_NE(config_error(R"({"experiment": {"trials": "ten"}})").find("trials"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"experiment": {"trials": 0}})").find("trials"), std::string::npos);
  EXPECT_NE(config_error(R"({"system": {"eps": -0.1}})"), "");
  EXPECT_NE(config_error("{ not json"), "");
  EXPECT_THROW(load_spec("/nonexistent/relaysec.json"), InvalidConfig);
}

TEST(Report, NumbersSurviveTextRoundTrip) {
  Rng rng(3);
  std::normal_distribution<double> n(0.0, 1e3);
  for (int k = 0; k < 1000; ++k) {
    const double x = n(rng) * std::pow(10.0, k % 7 - 3);
    EXPECT_EQ(parse_double(fmt(x)), x);
  }
  EXPECT_THROW(parse_double("1.5x"), ReportError);
}

TEST(Report, SweepCsvRoundTrip) {
  std::vector<SweepPoint> pts(2);
  pts[0].eps = 0.01;
  pts[0].r_b_db = 3;
  pts[0].mean_power_robust = 1.0 / 3.0;
  pts[0].mean_power_nonrobust = 0.1;
  pts[0].n_feasible = 7;
  pts[0].n_trials = 9;
  pts[1].eps = 0.1;
  pts[1].r_e_db = -3;
  const auto back = parse_power_sweep_csv(power_sweep_csv(pts));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].mean_power_robust, pts[0].mean_power_robust);
  EXPECT_EQ(back[0].n_feasible, 7);
  EXPECT_EQ(back[1].r_e_db, -3.0);
  EXPECT_TRUE(std::isnan(back[1].mean_power_robust));
  EXPECT_THROW(parse_power_sweep_csv("a,b\n"), ReportError);
}

TEST(Report, RefusesEmptyOrFullyFilteredInput) {
  const ExperimentSpec s = tiny_spec();
  const fs::path d = scratch_dir("empty");
  EXPECT_THROW(emit_reports({}, s, d), ReportError);
  ReportInput in;
  in.sweep = std::vector<RunRecord>{};
  EXPECT_THROW(emit_reports(in, s, d), ReportError);

  ReportInput eve;
  eve.eve = std::vector<EveDistRecord>(4);
  try {
    emit_reports(eve, s, d);
    FAIL() << "expected a report error";
  } catch (const ReportError& e) {
    EXPECT_NE(std::string(e.what()).find("feasible design"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("4"), std::string::npos);
  }
}

TEST(Pool, VisitsEveryIndexOnceAndRethrows) {
  std::vector<std::atomic<int>> hits(97);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 5) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(Sweep, ZeroRadiusMakesSchemesCoincide) {
  const auto recs = run_power_sweep(tiny_spec());
  ASSERT_EQ(recs.size(), 6u);
  int checked = 0;
  for (const RunRecord& r : recs) {
    if (r.eps != 0.0 || !r.both_ok()) continue;
    ++checked;
    EXPECT_EQ(r.robust.relaxed_power, r.nonrobust.relaxed_power);
    EXPECT_EQ(r.robust.rounded_power, r.nonrobust.rounded_power);
  }
  EXPECT_GT(checked, 0);
  for (std::size_t k = 1; k < recs.size(); ++k) {
    EXPECT_FALSE(record_order(recs[k], recs[k - 1]));
  }
}

TEST(Sweep, RobustNeverCheaperThanNominal) {
  for (const RunRecord& r : run_power_sweep(tiny_spec())) {
    if (!r.both_ok()) continue;
    EXPECT_TRUE(robust_not_below(r)) << "trial " << r.trial;
  }
}

TEST(Reports, ByteIdenticalAcrossRunsAndThreadCounts) {
  ExperimentSpec s = tiny_spec();
  s.trials = 2;
  ReportInput a;
  a.sweep = run_power_sweep(s);
  a.eve = run_eve_distribution(s);
  s.threads = 2;
  ReportInput b;
  b.sweep = run_power_sweep(s);
  b.eve = run_eve_distribution(s);
  s.threads = 1;
  const fs::path da = scratch_dir("det_a");
  const fs::path db = scratch_dir("det_b");
  const ReportFiles fa = emit_reports(a, s, da);
  const ReportFiles fb = emit_reports(b, s, db);
  ASSERT_EQ(fa.written.size(), fb.written.size());
  for (std::size_t k = 0; k < fa.written.size(); ++k) {
    const std::string ta = slurp(fa.written[k]);
    EXPECT_FALSE(ta.empty());
    EXPECT_EQ(ta, slurp(fb.written[k])) << fa.written[k].filename();
    EXPECT_EQ(ta.find('\r'), std::string::npos);
  }
  const Json summary = Json::parse(slurp(da / "summary.json"));
  EXPECT_EQ(summary["root_seed"], 11);
  EXPECT_TRUE(summary.contains("power_sweep"));
}

TEST(EveDistribution, RecordsBothSchemesWithFractionsInRange) {
  ExperimentSpec s = tiny_spec();
  s.trials = 2;
  s.eps_values = {0.05};
  const auto recs = run_eve_distribution(s);
  ASSERT_EQ(recs.size(), 4u);
  for (const auto& r : recs) {
    if (!r.ok()) continue;
    EXPECT_EQ(r.snr_samples.size(), 50u);
    EXPECT_GE(r.exceed_fraction, 0.0);
    EXPECT_LE(r.exceed_fraction, 1.0);
  }
  const EveSummary sum = aggregate_eve(recs);
  EXPECT_EQ(sum.points.size(), 2u);
}

TEST(Helpers, MedianAndUnique) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_TRUE(std::isnan(median({})));
  EXPECT_EQ(sorted_unique({3, 1, 3, 2}), (std::vector<double>{1, 2, 3}));
}

TEST(SelfCheck, PassesOnSmallSizes) {
  SelfCheckOptions o;
  o.dims = {2};
  o.trials = 2;
  const SelfCheckReport r = run_self_check(o);
  EXPECT_TRUE(r.passed()) << to_json(r).dump(2);
  EXPECT_EQ(r.suites.size(), 6u);
}

TEST(SelfCheck, BoundSuiteCatchesFlippedCorrection) {
  SelfCheckHooks hooks;
  hooks.eve_den_lb = [](const LiftedPair& lp, const ChannelSet& ch, const SystemConfig& cfg) {
    SystemConfig nominal = cfg;
    nominal.eps = 0.0;
    const double at_zero = eve_den_lb(lp, ch, nominal);
    return 2.0 * at_zero - eve_den_lb(lp, ch, cfg);
  };
  const SuiteReport bad = bound_suite({{2, 2}}, {0.1}, 5, 100, 1, hooks);
  EXPECT_FALSE(bad.passed());
  EXPECT_FALSE(bad.first_failure.empty());
  const SuiteReport good = bound_suite({{2, 2}}, {0.1}, 5, 100, 1, {});
  EXPECT_TRUE(good.passed()) << good.first_failure;
}

TEST(EveDistribution, ZeroRadiusSamplesEqualNominal) {
  SystemConfig cfg;
  const ChannelSet ch = sample_channels(cfg, 17);
  Rng rng(19);
  const BeamformingPair pair{complex_normal(rng, 3, 1), complex_normal(rng, 3, 3)};
  SystemConfig unit_cfg = cfg;
  unit_cfg.eps = 1.0;
  std::vector<EveError> unit;
  for (int k = 0; k < 20; ++k) unit.push_back(sample_eve_error(unit_cfg, rng));
  EveDistRecord rec;
  rec.eps = 0.0;
  fill_eve_samples(rec, pair, ch, cfg, unit);
  for (double x : rec.snr_samples) EXPECT_EQ(x, rec.snr_nominal);
  EXPECT_TRUE(rec.exceed_fraction == 0.0 || rec.exceed_fraction == 1.0);
}

TEST(EveDistribution, WorstDirectionNotBelowSampledMedian) {
  SystemConfig cfg;
  cfg.eps = 0.1;
  Rng rng(23);
  SystemConfig unit_cfg = cfg;
  unit_cfg.eps = 1.0;
  for (int t = 0; t < 20; ++t) {
    const ChannelSet ch = sample_channels(cfg, rng);
    const BeamformingPair pair{complex_normal(rng, 3, 1), complex_normal(rng, 3, 3)};
    std::vector<EveError> unit;
    for (int k = 0; k < 200; ++k) unit.push_back(sample_eve_error(unit_cfg, rng));
    EveDistRecord rec;
    rec.eps = 0.1;
    fill_eve_samples(rec, pair, ch, cfg, unit);
    EXPECT_GE(rec.snr_worst_numerator, median(rec.snr_samples));
  }
}
