// relaysec command line: single-instance solve, experiment drivers and the
// self-check.
//
// Exit codes: 0 success, 1 invalid config or usage, 2 infeasible instance,
// 3 self-check failure, 4 solver or report failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "relaysec/harness/report.hpp"
#include "relaysec/harness/self_check.hpp"

namespace {

using namespace relaysec;
using namespace relaysec::harness;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitCheck = 3;
constexpr int kExitSolver = 4;

Json complex_json(const CMat& m) {
  Json re = Json::array();
  Json im = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json rr = Json::array();
    Json ii = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      rr.push_back(m(i, j).real());
      ii.push_back(m(i, j).imag());
    }
    re.push_back(rr);
    im.push_back(ii);
  }
  return {{"re", re}, {"im", im}};
}

int cmd_solve(const ExperimentSpec& base, std::optional<std::uint64_t> seed) {
  ExperimentSpec spec = base;
  if (seed) spec.root_seed = *seed;
  const std::uint64_t cseed = channel_seed(spec, 0);
  const ChannelSet ch = sample_channels(spec.system, cseed);
  const SolvedScheme solved = run_scheme(ch, spec.system, spec, rounding_seed(spec, 0));
  const SchemeOutcome& o = solved.outcome;
  const InstanceResult& r = solved.result;

  Json out;
  out["root_seed"] = spec.root_seed;
  out["channel_seed"] = cseed;
  out["status"] = o.status();
  out["relaxed_power"] = o.relaxed_power;
  out["xi_trace"] = r.relaxed.xi_trace;
  out["iterations"] = o.iterations;
  out["refinements"] = o.refinements;
  if (!o.detail.empty()) out["detail"] = o.detail;
  if (o.ok()) {
    const BeamformingPair& p = r.rounded.pair;
    const SystemConfig& cfg = spec.system;
    out["rounded_power"] = o.rounded_power;
    out["rounding_source"] = to_string(r.rounded.source);
    out["alpha"] = r.rounded.alpha;
    out["beta"] = r.rounded.beta;
    out["snr_bob"] = snr_bob(p, ch, cfg);
    out["snr_eve_nominal"] = snr_eve_exact(p, ch, cfg, {CMat::Zero(1, cfg.n_relay)});
    if (cfg.eps > 0.0) {
      out["snr_eve_worst_numerator"] =
          snr_eve_exact(p, ch, cfg, worst_delta(p, ch, cfg, BoundTarget::kNumerator));
      out["snr_eve_worst_denominator"] =
          snr_eve_exact(p, ch, cfg, worst_delta(p, ch, cfg, BoundTarget::kDenominator));
    }
    out["q"] = complex_json(p.q);
    out["W"] = complex_json(p.w_mat);
  }
  std::cout << out.dump(2) << '\n';
  if (o.ok()) return kExitOk;
  const bool infeasible = o.alt_status == AltStatus::kInfeasible ||
                          (r.relaxed_ok() && !r.rounded.feasible);
  return infeasible ? kExitInfeasible : kExitSolver;
}

Logger make_logger(bool quiet) {
  if (quiet) return {};
  return [](const std::string& line) { std::cerr << "[relaysec] " + line + "\n"; };
}

int emit(const ReportInput& in, const ExperimentSpec& spec, const std::string& dir) {
  const ReportFiles files = emit_reports(in, spec, dir);
  for (const auto& f : files.written) std::cout << f.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust secure relay beamforming: solver and experiment harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(RELAYSEC_VERSION));

  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output;
  bool quiet = false;

  auto* solve = app.add_subcommand("solve", "solve one channel draw and print the result as JSON");
  solve->add_option("--config", config, "config file")->required();
  solve->add_option("--seed", seed, "root seed override");

  auto add_experiment = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "config file")->required();
    sub->add_option("--output", output, "output directory (default: experiment.output_dir)");
    sub->add_flag("--quiet", quiet, "no per-trial log lines");
    return sub;
  };
  auto* sweep = add_experiment("sweep", "power versus thresholds, robust and non-robust");
  auto* eve = add_experiment("eve-dist", "eavesdropper SNR distribution under channel error");
  auto* ps = add_experiment("ps-sweep", "sensitivity to the initial source power");

  std::vector<int> dims{2, 3};
  int trials = 10;
  std::uint64_t check_seed = 1;
  auto* check = app.add_subcommand("check", "run the invariant self-check suites");
  check->add_option("--dims", dims, "antenna counts; every (M, N) pair is checked")
      ->delimiter(',');
  check->add_option("--trials", trials, "instances per suite and size");
  check->add_option("--seed", check_seed, "seed for the random instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*check) {
      SelfCheckOptions o;
      o.dims = dims;
      o.trials = trials;
      o.seed = check_seed;
      const SelfCheckReport rep = run_self_check(o);
      std::cout << to_json(rep).dump(2) << '\n';
      return rep.passed() ? kExitOk : kExitCheck;
    }
    const ExperimentSpec spec = load_spec(config);
    const std::string dir = output.empty() ? spec.output_dir : output;
    if (*solve) return cmd_solve(spec, seed);
    if (*sweep) {
      ReportInput in;
      in.sweep = run_power_sweep(spec, make_logger(quiet));
      return emit(in, spec, dir);
    }
    if (*eve) {
      ReportInput in;
      in.eve = run_eve_distribution(spec, make_logger(quiet));
      return emit(in, spec, dir);
    }
    if (*ps) {
      ReportInput in;
      in.ps = run_ps_sweep(spec, make_logger(quiet));
      return emit(in, spec, dir);
    }
  } catch (const InvalidConfig& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolver;
  }
  return kExitConfig;
}
