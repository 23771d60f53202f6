#pragma once

// CSV and JSON emission. Floats use 17 significant digits, lines end in LF,
// and rows follow the sorted record order, so equal inputs give equal bytes.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "relaysec/harness/experiments.hpp"

#ifndef RELAYSEC_VERSION
#define RELAYSEC_VERSION "0.1.0"
#endif

namespace relaysec::harness {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string db_field(double linear) { return fmt(linear_to_db(linear)); }

// ------------------------------------------------------------------- CSV

inline const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> cols{
      "eps", "r_b_db", "r_e_db", "mean_power_robust", "mean_power_nonrobust", "n_feasible",
      "n_trials", "mean_rounded_power_robust", "mean_rounded_power_nonrobust",
      "n_robust_feasible", "n_nonrobust_feasible", "n_robust_not_below"};
  return cols;
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  return out + '\n';
}

inline std::string power_sweep_csv(const std::vector<SweepPoint>& points) {
  std::string out = join(sweep_columns());
  for (const SweepPoint& p : points) {
    out += join({fmt(p.eps), fmt(p.r_b_db), fmt(p.r_e_db), fmt(p.mean_power_robust),
                 fmt(p.mean_power_nonrobust), std::to_string(p.n_feasible),
                 std::to_string(p.n_trials), fmt(p.mean_rounded_robust),
                 fmt(p.mean_rounded_nonrobust), std::to_string(p.n_robust_feasible),
                 std::to_string(p.n_nonrobust_feasible), std::to_string(p.n_robust_not_below)});
  }
  return out;
}

/// Per-record detail for the sweep. Wall time is left out to keep the file
/// byte-stable.
inline std::string sweep_runs_csv(const std::vector<RunRecord>& records) {
  std::string out = join({"trial", "channel_seed", "eps", "r_b_db", "r_e_db",
                          "relaxed_power_robust", "rounded_power_robust", "iterations_robust",
                          "status_robust", "source_robust", "relaxed_power_nonrobust",
                          "rounded_power_nonrobust", "iterations_nonrobust", "status_nonrobust",
                          "source_nonrobust"});
  for (const RunRecord& r : records) {
    out += join({std::to_string(r.trial), std::to_string(r.channel_seed), fmt(r.eps),
                 fmt(r.r_b_db), fmt(r.r_e_db), fmt(r.robust.relaxed_power),
                 fmt(r.robust.rounded_power), std::to_string(r.robust.iterations),
                 r.robust.status(), to_string(r.robust.source), fmt(r.nonrobust.relaxed_power),
                 fmt(r.nonrobust.rounded_power), std::to_string(r.nonrobust.iterations),
                 r.nonrobust.status(), to_string(r.nonrobust.source)});
  }
  return out;
}

/// One row per sampled error plus one per extremal direction; infeasible
/// designs contribute no rows.
inline std::string eve_dist_csv(const std::vector<EveDistRecord>& records) {
  std::string out = join({"scheme", "eps", "r_e_db", "snr_e_db", "trial", "kind", "index"});
  for (const EveDistRecord& r : records) {
    if (!r.ok()) continue;
    const std::string head = to_string(r.scheme) + ',' + fmt(r.eps) + ',' + fmt(r.r_e_db) + ',';
    const std::string trial = std::to_string(r.trial);
    for (std::size_t k = 0; k < r.snr_samples.size(); ++k) {
      out += head + db_field(r.snr_samples[k]) + ',' + trial + ",sample," + std::to_string(k) +
             '\n';
    }
    out += head + db_field(r.snr_worst_numerator) + ',' + trial + ",worst-numerator,0\n";
    out += head + db_field(r.snr_worst_denominator) + ',' + trial + ",worst-denominator,0\n";
  }
  return out;
}

inline std::string ps_sweep_csv(const std::vector<PsRecord>& records) {
  std::string out =
      join({"trial", "p_s", "relaxed_power", "rounded_power", "iterations", "status"});
  for (const PsRecord& r : records) {
    out += join({std::to_string(r.trial), fmt(r.p_s), fmt(r.outcome.relaxed_power),
                 fmt(r.outcome.rounded_power), std::to_string(r.outcome.iterations),
                 r.outcome.status()});
  }
  return out;
}

inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) row.push_back(field);
    if (!line.empty() && line.back() == ',') row.emplace_back();
    rows.push_back(std::move(row));
  }
  return rows;
}

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw ReportError("malformed number '" + s + "'");
  return v;
}

/// Inverse of power_sweep_csv.
inline std::vector<SweepPoint> parse_power_sweep_csv(const std::string& text) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows.front() != sweep_columns()) {
    throw ReportError("power sweep CSV header does not match");
  }
  std::vector<SweepPoint> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != sweep_columns().size()) throw ReportError("power sweep CSV row has wrong width");
    SweepPoint p;
    p.eps = parse_double(r[0]);
    p.r_b_db = parse_double(r[1]);
    p.r_e_db = parse_double(r[2]);
    p.mean_power_robust = parse_double(r[3]);
    p.mean_power_nonrobust = parse_double(r[4]);
    p.n_feasible = std::stoi(r[5]);
    p.n_trials = std::stoi(r[6]);
    p.mean_rounded_robust = parse_double(r[7]);
    p.mean_rounded_nonrobust = parse_double(r[8]);
    p.n_robust_feasible = std::stoi(r[9]);
    p.n_nonrobust_feasible = std::stoi(r[10]);
    p.n_robust_not_below = std::stoi(r[11]);
    out.push_back(p);
  }
  return out;
}

// ------------------------------------------------------------------ JSON

inline Json sweep_json(const std::vector<RunRecord>& records,
                       const std::vector<SweepPoint>& points) {
  Json pts = Json::array();
  int paired = 0;
  int not_below = 0;
  for (const SweepPoint& p : points) {
    pts.push_back({{"eps", p.eps},
                   {"r_b_db", p.r_b_db},
                   {"r_e_db", p.r_e_db},
                   {"mean_power_robust", p.mean_power_robust},
                   {"mean_power_nonrobust", p.mean_power_nonrobust},
                   {"mean_rounded_power_robust", p.mean_rounded_robust},
                   {"mean_rounded_power_nonrobust", p.mean_rounded_nonrobust},
                   {"n_feasible", p.n_feasible},
                   {"n_trials", p.n_trials},
                   {"n_robust_feasible", p.n_robust_feasible},
                   {"n_nonrobust_feasible", p.n_nonrobust_feasible},
                   {"n_robust_not_below", p.n_robust_not_below}});
    paired += p.n_feasible;
    not_below += p.n_robust_not_below;
  }
  return {{"n_records", records.size()},
          {"n_paired_feasible", paired},
          {"robust_not_below_fraction",
           paired ? static_cast<double>(not_below) / paired : kNaN},
          {"points", pts}};
}

inline Json eve_json(const std::vector<EveDistRecord>& records, const EveSummary& summary) {
  Json pts = Json::array();
  for (const EvePoint& p : summary.points) {
    pts.push_back({{"scheme", to_string(p.scheme)},
                   {"eps", p.eps},
                   {"r_e_db", p.r_e_db},
                   {"n_trials", p.n_trials},
                   {"n_feasible", p.n_feasible},
                   {"exceed_fraction", p.exceed_fraction},
                   {"median_snr_e_db", p.median_snr_db},
                   {"n_worst_above_median", p.n_worst_above_median}});
  }
  Json cmp = Json::array();
  for (const EveComparison& c : summary.comparisons) {
    cmp.push_back({{"eps", c.eps},
                   {"r_e_db", c.r_e_db},
                   {"n_paired", c.n_paired},
                   {"n_robust_less", c.n_robust_less}});
  }
  return {{"n_records", records.size()}, {"points", pts}, {"comparisons", cmp}};
}

inline Json ps_json(const std::vector<PsRecord>& records) {
  std::map<double, std::pair<int, std::array<double, 2>>> acc;
  std::map<double, int> totals;
  for (const PsRecord& r : records) {
    ++totals[r.p_s];
    auto& a = acc[r.p_s];
    if (!r.outcome.ok()) continue;
    ++a.first;
    a.second[0] += r.outcome.relaxed_power;
    a.second[1] += r.outcome.rounded_power;
  }
  Json pts = Json::array();
  for (const auto& [ps, a] : acc) {
    pts.push_back({{"p_s", ps},
                   {"n_trials", totals[ps]},
                   {"n_feasible", a.first},
                   {"mean_relaxed_power", a.first ? a.second[0] / a.first : kNaN},
                   {"mean_rounded_power", a.first ? a.second[1] / a.first : kNaN}});
  }
  return {{"n_records", records.size()}, {"points", pts}};
}

// ---------------------------------------------------------------- emitter

struct ReportInput {
  std::optional<std::vector<RunRecord>> sweep;
  std::optional<std::vector<EveDistRecord>> eve;
  std::optional<std::vector<PsRecord>> ps;
};

struct ReportFiles {
  std::vector<std::filesystem::path> written;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ReportError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ReportError("write failed for '" + path.string() + "'");
}

inline Json summary_json(const ReportInput& in, const ExperimentSpec& spec) {
  Json doc;
  doc["artifact"] = "relaysec";
  doc["version"] = RELAYSEC_VERSION;
  doc["root_seed"] = spec.root_seed;
  doc["spec"] = spec_to_json(spec);
  if (in.sweep) doc["power_sweep"] = sweep_json(*in.sweep, aggregate_sweep(*in.sweep));
  if (in.eve) doc["eve_dist"] = eve_json(*in.eve, aggregate_eve(*in.eve));
  if (in.ps) doc["ps_sweep"] = ps_json(*in.ps);
  return doc;
}

/// Writes the CSV files for whichever record sets are present, plus
/// summary.json, into `dir` (created if needed).
inline ReportFiles emit_reports(const ReportInput& in, const ExperimentSpec& spec,
                                const std::filesystem::path& dir) {
  if (!in.sweep && !in.eve && !in.ps) throw ReportError("no record sets to report");
  if (in.sweep && in.sweep->empty()) throw ReportError("power sweep has no records");
  if (in.eve) {
    if (in.eve->empty()) throw ReportError("eavesdropper distribution has no records");
    const bool any = std::any_of(in.eve->begin(), in.eve->end(),
                                 [](const EveDistRecord& r) { return r.ok(); });
    if (!any) {
      throw ReportError("filter 'feasible design' left no eavesdropper records out of " +
                        std::to_string(in.eve->size()));
    }
  }
  if (in.ps && in.ps->empty()) throw ReportError("source-power sweep has no records");

  std::filesystem::create_directories(dir);
  ReportFiles files;
  auto put = [&](const char* name, const std::string& text) {
    const auto path = dir / name;
    write_file(path, text);
    files.written.push_back(path);
  };
  if (in.sweep) {
    put("power_sweep.csv", power_sweep_csv(aggregate_sweep(*in.sweep)));
    put("power_sweep_runs.csv", sweep_runs_csv(*in.sweep));
  }
  if (in.eve) put("eve_dist.csv", eve_dist_csv(*in.eve));
  if (in.ps) put("ps_sweep.csv", ps_sweep_csv(*in.ps));
  put("summary.json", summary_json(in, spec).dump(2) + '\n');
  return files;
}

}  // namespace relaysec::harness
