#pragma once

// Seeded Monte Carlo drivers: power-versus-threshold sweep, eavesdropper SNR
// distribution, and source-power initialisation sweep. Each trial is one work
// item with its own channel, rounding and error streams derived from the root
// seed, so results do not depend on the thread count.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "relaysec/harness/config.hpp"
#include "relaysec/harness/pool.hpp"

namespace relaysec::harness {

inline constexpr std::uint64_t kChannelStream = 0x4368616e6eULL;
inline constexpr std::uint64_t kTrialRoundingStream = 0x54526e64ULL;
inline constexpr std::uint64_t kEveStream = 0x4576654472ULL;

using Logger = std::function<void(const std::string&)>;

inline std::uint64_t channel_seed(const ExperimentSpec& s, int trial) {
  return derive_seed(s.root_seed, kChannelStream, static_cast<std::uint64_t>(trial));
}

inline std::uint64_t rounding_seed(const ExperimentSpec& s, int trial) {
  return derive_seed(s.root_seed, kTrialRoundingStream, static_cast<std::uint64_t>(trial));
}

inline std::uint64_t eve_seed(const ExperimentSpec& s, int trial) {
  return derive_seed(s.root_seed, kEveStream, static_cast<std::uint64_t>(trial));
}

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct SchemeOutcome {
  double relaxed_power = kNaN;
  double rounded_power = kNaN;
  int iterations = 0;
  int refinements = 0;
  AltStatus alt_status = AltStatus::kFailed;
  bool rounded_feasible = false;
  RoundingSource source = RoundingSource::kEigen;
  std::string detail;
  double wall_ms = 0.0;

  bool ok() const {
    return (alt_status == AltStatus::kConverged || alt_status == AltStatus::kIterationCapped) &&
           rounded_feasible;
  }
  std::string status() const {
    if (alt_status != AltStatus::kConverged && alt_status != AltStatus::kIterationCapped) {
      return to_string(alt_status);
    }
    return rounded_feasible ? to_string(alt_status) : "rounding-infeasible";
  }
};

struct SolvedScheme {
  SchemeOutcome outcome;
  InstanceResult result;
};

/// Full pipeline on one instance; solver and linear-algebra exceptions are
/// caught and reported as a failed outcome.
inline SolvedScheme run_scheme(const ChannelSet& ch, const SystemConfig& cfg,
                               const ExperimentSpec& s, std::uint64_t seed,
                               const std::vector<WarmStart>& warm = {},
                               const AltConfig* alt_override = nullptr) {
  SolvedScheme out;
  RoundingConfig rc = s.rounding;
  rc.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    out.result = solve_instance_warm(ch, cfg, alt_override ? *alt_override : s.alt, rc, warm,
                                     s.relaxation(), s.pipeline);
    const InstanceResult& r = out.result;
    SchemeOutcome& o = out.outcome;
    o.alt_status = r.relaxed.status;
    o.iterations = r.total_iterations;
    o.refinements = r.refinements;
    o.detail = r.relaxed.detail;
    if (r.relaxed_ok()) {
      o.relaxed_power = r.relaxed_power();
      o.rounded_feasible = r.rounded.feasible;
      o.rounded_power = r.rounded.total_power;
      o.source = r.rounded.source;
      if (!r.rounded.feasible) o.detail = r.rounded.detail;
    }
  } catch (const std::runtime_error& e) {
    out.outcome.alt_status = AltStatus::kFailed;
    out.outcome.detail = e.what();
  }
  out.outcome.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ------------------------------------------------------- threshold grid

using GridKey = std::tuple<double, double, double>;  // (eps, r_b dB, r_e dB)

inline std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

/// Solves every (eps, r_b, r_e) point on one channel draw, from the tightest
/// point (largest eps and r_b, smallest r_e) outward. Each point receives its
/// already-solved tighter neighbours along each axis as warm starts.
inline std::map<GridKey, SolvedScheme> solve_grid(const ChannelSet& ch, const ExperimentSpec& s,
                                                  std::uint64_t seed,
                                                  const std::vector<double>& eps_in,
                                                  const std::vector<double>& rb_in,
                                                  const std::vector<double>& re_in) {
  const std::vector<double> eps = sorted_unique(eps_in);
  const std::vector<double> rb = sorted_unique(rb_in);
  const std::vector<double> re = sorted_unique(re_in);
  std::map<GridKey, SolvedScheme> out;
  auto warm_at = [&](std::vector<WarmStart>& w, const GridKey& key) {
    auto it = out.find(key);
    if (it == out.end()) return;
    if (auto ws = warm_start_from(it->second.result)) w.push_back(std::move(*ws));
  };
  for (std::size_t e = eps.size(); e-- > 0;) {
    for (std::size_t i = rb.size(); i-- > 0;) {
      for (std::size_t j = 0; j < re.size(); ++j) {
        std::vector<WarmStart> warm;
        if (e + 1 < eps.size()) warm_at(warm, {eps[e + 1], rb[i], re[j]});
        if (i + 1 < rb.size()) warm_at(warm, {eps[e], rb[i + 1], re[j]});
        if (j > 0) warm_at(warm, {eps[e], rb[i], re[j - 1]});
        SystemConfig cfg = s.system;
        cfg.eps = eps[e];
        cfg.r_b = db_to_linear(rb[i]);
        cfg.r_e = db_to_linear(re[j]);
        out.emplace(GridKey{eps[e], rb[i], re[j]}, run_scheme(ch, cfg, s, seed, warm));
      }
    }
  }
  return out;
}

// ------------------------------------------------------------ power sweep

struct RunRecord {
  int trial = 0;
  std::uint64_t channel_seed = 0;
  double eps = 0.0;
  double r_b_db = 0.0;
  double r_e_db = 0.0;
  SchemeOutcome robust;
  SchemeOutcome nonrobust;

  bool both_ok() const { return robust.ok() && nonrobust.ok(); }
};

inline bool record_order(const RunRecord& a, const RunRecord& b) {
  return std::tie(a.trial, a.eps, a.r_b_db, a.r_e_db) <
         std::tie(b.trial, b.eps, b.r_b_db, b.r_e_db);
}

/// For every trial and (r_b, r_e): the non-robust design at eps = 0 and the
/// robust design at each eps value, all on the trial's channel draw. An eps of
/// 0 in the list makes the two schemes coincide.
inline std::vector<RunRecord> run_power_sweep(const ExperimentSpec& s, const Logger& log = {}) {
  s.validate();
  const std::size_t per_trial = s.r_b_values.size() * s.r_e_values.size() * s.eps_values.size();
  std::vector<RunRecord> records(static_cast<std::size_t>(s.trials) * per_trial);

  parallel_for(static_cast<std::size_t>(s.trials), s.threads, [&](std::size_t t) {
    const int trial = static_cast<int>(t);
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t cseed = channel_seed(s, trial);
    const ChannelSet ch = sample_channels(s.system, cseed);
    const std::uint64_t rseed = rounding_seed(s, trial);
    std::vector<double> eps_all = s.eps_values;
    eps_all.push_back(0.0);
    const auto grid = solve_grid(ch, s, rseed, eps_all, s.r_b_values, s.r_e_values);
    std::size_t slot = t * per_trial;
    for (double rb : s.r_b_values) {
      for (double re : s.r_e_values) {
        const SchemeOutcome& nominal = grid.at({0.0, rb, re}).outcome;
        for (double eps : s.eps_values) {
          RunRecord& rec = records[slot++];
          rec.trial = trial;
          rec.channel_seed = cseed;
          rec.eps = eps;
          rec.r_b_db = rb;
          rec.r_e_db = re;
          rec.nonrobust = nominal;
          rec.robust = grid.at({eps, rb, re}).outcome;
        }
      }
    }
    if (log) {
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      log("sweep trial " + std::to_string(trial + 1) + "/" + std::to_string(s.trials) +
          " done in " + std::to_string(static_cast<long>(ms)) + " ms");
    }
  });
  std::sort(records.begin(), records.end(), record_order);
  return records;
}

struct SweepPoint {
  double eps = 0.0;
  double r_b_db = 0.0;
  double r_e_db = 0.0;
  double mean_power_robust = kNaN;
  double mean_power_nonrobust = kNaN;
  int n_feasible = 0;  // both schemes succeeded
  int n_trials = 0;
  double mean_rounded_robust = kNaN;
  double mean_rounded_nonrobust = kNaN;
  int n_robust_feasible = 0;
  int n_nonrobust_feasible = 0;
  int n_robust_not_below = 0;  // paired trials with robust >= non-robust
};

inline constexpr double kPairSlack = 1e-6;

inline bool robust_not_below(const RunRecord& r) {
  return r.robust.relaxed_power >=
         r.nonrobust.relaxed_power - kPairSlack * std::max(1.0, r.nonrobust.relaxed_power);
}

/// Means over trials where both schemes succeeded; failures are counted.
inline std::vector<SweepPoint> aggregate_sweep(const std::vector<RunRecord>& records) {
  std::map<std::tuple<double, double, double>, SweepPoint> points;
  std::map<std::tuple<double, double, double>, std::array<double, 4>> sums;
  for (const RunRecord& r : records) {
    const auto key = std::make_tuple(r.eps, r.r_b_db, r.r_e_db);
    SweepPoint& p = points[key];
    auto& sum = sums[key];
    p.eps = r.eps;
    p.r_b_db = r.r_b_db;
    p.r_e_db = r.r_e_db;
    ++p.n_trials;
    p.n_robust_feasible += r.robust.ok();
    p.n_nonrobust_feasible += r.nonrobust.ok();
    if (!r.both_ok()) continue;
    ++p.n_feasible;
    p.n_robust_not_below += robust_not_below(r);
    sum[0] += r.robust.relaxed_power;
    sum[1] += r.nonrobust.relaxed_power;
    sum[2] += r.robust.rounded_power;
    sum[3] += r.nonrobust.rounded_power;
  }
  std::vector<SweepPoint> out;
  for (auto& [key, p] : points) {
    if (p.n_feasible > 0) {
      const auto& sum = sums[key];
      const double n = p.n_feasible;
      p.mean_power_robust = sum[0] / n;
      p.mean_power_nonrobust = sum[1] / n;
      p.mean_rounded_robust = sum[2] / n;
      p.mean_rounded_nonrobust = sum[3] / n;
    }
    out.push_back(p);
  }
  return out;
}

// ------------------------------------------------------ eavesdropper SNR

enum class Scheme { kRobust, kNonRobust };

inline std::string to_string(Scheme s) { return s == Scheme::kRobust ? "robust" : "non-robust"; }

struct EveDistRecord {
  int trial = 0;
  Scheme scheme = Scheme::kRobust;
  double eps = 0.0;
  double r_e_db = 0.0;
  double r_b_db = 0.0;
  SchemeOutcome outcome;
  std::vector<double> snr_samples;  // linear, exact
  double exceed_fraction = kNaN;
  double snr_nominal = kNaN;  // at delta = 0
  double snr_worst_numerator = kNaN;
  double snr_worst_denominator = kNaN;

  bool ok() const { return outcome.ok(); }
};

inline bool eve_order(const EveDistRecord& a, const EveDistRecord& b) {
  return std::tie(a.trial, a.eps, a.r_e_db, a.scheme) <
         std::tie(b.trial, b.eps, b.r_e_db, b.scheme);
}

/// Evaluates exact SNR_e at the rounded precoders over `unit` (errors drawn
/// from the unit ball, scaled by eps) and at the two closed-form extremal
/// directions.
inline void fill_eve_samples(EveDistRecord& rec, const BeamformingPair& pair,
                             const ChannelSet& ch, SystemConfig cfg,
                             const std::vector<EveError>& unit) {
  cfg.eps = rec.eps;
  rec.snr_samples.reserve(unit.size());
  int exceed = 0;
  for (const EveError& u : unit) {
    const double snr = snr_eve_exact(pair, ch, cfg, {rec.eps * u.delta});
    rec.snr_samples.push_back(snr);
    exceed += snr > cfg.r_e;
  }
  rec.exceed_fraction = static_cast<double>(exceed) / static_cast<double>(unit.size());
  rec.snr_nominal = snr_eve_exact(pair, ch, cfg, {CMat::Zero(1, cfg.n_relay)});
  if (rec.eps > 0.0) {
    rec.snr_worst_numerator =
        snr_eve_exact(pair, ch, cfg, worst_delta(pair, ch, cfg, BoundTarget::kNumerator));
    rec.snr_worst_denominator =
        snr_eve_exact(pair, ch, cfg, worst_delta(pair, ch, cfg, BoundTarget::kDenominator));
  } else {
    rec.snr_worst_numerator = rec.snr_nominal;
    rec.snr_worst_denominator = rec.snr_nominal;
  }
}

/// Per trial and (eps, r_e): robust design at eps and non-robust design at
/// eps = 0, both judged on the same sampled errors. r_b is the system value.
inline std::vector<EveDistRecord> run_eve_distribution(const ExperimentSpec& s,
                                                       const Logger& log = {}) {
  s.validate();
  const std::size_t per_trial = 2 * s.eps_values.size() * s.r_e_values.size();
  std::vector<EveDistRecord> records(static_cast<std::size_t>(s.trials) * per_trial);

  parallel_for(static_cast<std::size_t>(s.trials), s.threads, [&](std::size_t t) {
    const int trial = static_cast<int>(t);
    const auto t0 = std::chrono::steady_clock::now();
    const ChannelSet ch = sample_channels(s.system, channel_seed(s, trial));
    const std::uint64_t rseed = rounding_seed(s, trial);

    SystemConfig unit_cfg = s.system;
    unit_cfg.eps = 1.0;
    Rng rng(eve_seed(s, trial));
    std::vector<EveError> unit;
    unit.reserve(static_cast<std::size_t>(s.eve_samples));
    for (int k = 0; k < s.eve_samples; ++k) unit.push_back(sample_eve_error(unit_cfg, rng));

    std::vector<double> eps_all = s.eps_values;
    eps_all.push_back(0.0);
    const auto grid = solve_grid(ch, s, rseed, eps_all, {s.r_b_db}, s.r_e_values);
    std::size_t slot = t * per_trial;
    for (double re : s.r_e_values) {
      SystemConfig cfg = s.system;
      cfg.r_e = db_to_linear(re);
      const SolvedScheme& nominal = grid.at({0.0, s.r_b_db, re});
      for (double eps : s.eps_values) {
        const SolvedScheme& robust = grid.at({eps, s.r_b_db, re});
        for (Scheme scheme : {Scheme::kRobust, Scheme::kNonRobust}) {
          const SolvedScheme& src = scheme == Scheme::kRobust ? robust : nominal;
          EveDistRecord& rec = records[slot++];
          rec.trial = trial;
          rec.scheme = scheme;
          rec.eps = eps;
          rec.r_e_db = re;
          rec.r_b_db = s.r_b_db;
          rec.outcome = src.outcome;
          if (rec.ok()) fill_eve_samples(rec, src.result.rounded.pair, ch, cfg, unit);
        }
      }
    }
    if (log) {
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      log("eve-dist trial " + std::to_string(trial + 1) + "/" + std::to_string(s.trials) +
          " done in " + std::to_string(static_cast<long>(ms)) + " ms");
    }
  });
  std::sort(records.begin(), records.end(), eve_order);
  return records;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct EvePoint {
  Scheme scheme = Scheme::kRobust;
  double eps = 0.0;
  double r_e_db = 0.0;
  int n_trials = 0;
  int n_feasible = 0;
  double exceed_fraction = kNaN;  // pooled over all samples of feasible trials
  double median_snr_db = kNaN;
  int n_worst_above_median = 0;  // numerator-worst SNR >= sampled median
};

struct EveComparison {
  double eps = 0.0;
  double r_e_db = 0.0;
  int n_paired = 0;       // both schemes feasible
  int n_robust_less = 0;  // robust fraction strictly below non-robust
};

struct EveSummary {
  std::vector<EvePoint> points;
  std::vector<EveComparison> comparisons;
};

inline EveSummary aggregate_eve(const std::vector<EveDistRecord>& records) {
  EveSummary out;
  std::map<std::tuple<double, double, int>, EvePoint> points;
  std::map<std::tuple<double, double, int>, std::vector<double>> pooled;
  std::map<std::tuple<int, double, double>, std::array<const EveDistRecord*, 2>> pairs;
  for (const EveDistRecord& r : records) {
    const auto key = std::make_tuple(r.eps, r.r_e_db, static_cast<int>(r.scheme));
    EvePoint& p = points[key];
    p.scheme = r.scheme;
    p.eps = r.eps;
    p.r_e_db = r.r_e_db;
    ++p.n_trials;
    pairs[std::make_tuple(r.trial, r.eps, r.r_e_db)][static_cast<int>(r.scheme)] = &r;
    if (!r.ok()) continue;
    ++p.n_feasible;
    auto& pool = pooled[key];
    pool.insert(pool.end(), r.snr_samples.begin(), r.snr_samples.end());
    p.n_worst_above_median += r.snr_worst_numerator >= median(r.snr_samples);
  }
  for (auto& [key, p] : points) {
    const auto& pool = pooled[key];
    if (!pool.empty()) {
      const double cap = db_to_linear(p.r_e_db);
      const auto above = std::count_if(pool.begin(), pool.end(), [&](double x) { return x > cap; });
      p.exceed_fraction = static_cast<double>(above) / static_cast<double>(pool.size());
      p.median_snr_db = linear_to_db(median(pool));
    }
    out.points.push_back(p);
  }
  std::map<std::pair<double, double>, EveComparison> cmp;
  for (const auto& [key, pr] : pairs) {
    EveComparison& c = cmp[{std::get<1>(key), std::get<2>(key)}];
    c.eps = std::get<1>(key);
    c.r_e_db = std::get<2>(key);
    const EveDistRecord* rob = pr[static_cast<int>(Scheme::kRobust)];
    const EveDistRecord* non = pr[static_cast<int>(Scheme::kNonRobust)];
    if (!rob || !non || !rob->ok() || !non->ok()) continue;
    ++c.n_paired;
    c.n_robust_less += rob->exceed_fraction < non->exceed_fraction;
  }
  for (auto& [key, c] : cmp) out.comparisons.push_back(c);
  return out;
}

// ---------------------------------------------------- source-power sweep

struct PsRecord {
  int trial = 0;
  double p_s = 0.0;
  SchemeOutcome outcome;
};

/// Sensitivity of the result to the initial source power: one pipeline run
/// per trial and p_s value at the system thresholds and eps.
inline std::vector<PsRecord> run_ps_sweep(const ExperimentSpec& s, const Logger& log = {}) {
  s.validate();
  const std::size_t per_trial = s.p_s_values.size();
  std::vector<PsRecord> records(static_cast<std::size_t>(s.trials) * per_trial);
  parallel_for(static_cast<std::size_t>(s.trials), s.threads, [&](std::size_t t) {
    const int trial = static_cast<int>(t);
    const ChannelSet ch = sample_channels(s.system, channel_seed(s, trial));
    for (std::size_t i = 0; i < per_trial; ++i) {
      AltConfig ac = s.alt;
      ac.p_s = s.p_s_values[i];
      PsRecord& rec = records[t * per_trial + i];
      rec.trial = trial;
      rec.p_s = ac.p_s;
      rec.outcome = run_scheme(ch, s.system, s, rounding_seed(s, trial), {}, &ac).outcome;
    }
    if (log) log("ps-sweep trial " + std::to_string(trial + 1) + "/" + std::to_string(s.trials));
  });
  return records;
}

}  // namespace relaysec::harness
