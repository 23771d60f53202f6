#pragma once

// One instance end to end: relaxed alternating solve, rank-one rounding, and
// refinement restarts from the rounded pair.
//
// Alternating minimisation stops at block-coordinate stationary points; a
// common one has the Bob row tight in both halves, where shrinking q while
// growing W lowers power but neither half-step can take that move. Gaussian
// candidates differ from the relaxed Q by random scale, so rounding regularly
// lands below xi. When it does, the rounded pair is feasible for the relaxed
// problem, and restarting the alternation from Q = q q^H yields a relaxed
// point at least as cheap. Refinement stops once no rounded candidate
// undercuts the relaxed power.
//
// Callers may also pass warm starts: Q matrices taken from solutions of
// problems whose feasible sets nest inside this one (a larger r_b, a smaller
// r_e, a larger eps). Alternating from such a Q begins at a feasible point of
// this problem, so the best start is never worse than the nested solution.

#include <cstdint>
#include <optional>
#include <vector>

#include "relaysec/alternating.hpp"
#include "relaysec/random.hpp"
#include "relaysec/rounding.hpp"

namespace relaysec {

struct PipelineConfig {
  int max_refinements = 20;
  // Rounded power below xi - undercut_tol * max(1, xi) triggers a restart.
  double undercut_tol = 1e-9;

  void validate() const {
    if (max_refinements < 0) throw InvalidConfig("pipeline.max_refinements must be >= 0");
    if (!(undercut_tol >= 0.0)) throw InvalidConfig("pipeline.undercut_tol must be >= 0");
  }
};

struct InstanceResult {
  LiftedSolution relaxed;     // last alternating run
  PrecoderSolution rounded;   // cheapest verified pair over all passes
  std::vector<double> pass_xi;  // final xi of each pass
  int refinements = 0;
  int total_iterations = 0;
  int start_index = 0;  // 0 cold start, k > 0 the k-th warm start

  bool relaxed_ok() const { return relaxed.ok(); }
  double relaxed_power() const {
    return relaxed.xi_trace.empty() ? 0.0 : relaxed.xi_trace.back();
  }
};

inline constexpr std::uint64_t kRoundingStream = 0x526f756e64ULL;

struct WarmStart {
  CMat q_big;
  double xi = 0.0;  // relaxed power of the nested problem it came from
};

inline InstanceResult solve_instance_warm(const ChannelSet& ch, const SystemConfig& cfg,
                                          const AltConfig& ac, const RoundingConfig& rc,
                                          const std::vector<WarmStart>& warm_starts,
                                          const RelaxationOptions& opts = {},
                                          const PipelineConfig& pc = {},
                                          const SolveSettings& settings = {}) {
  pc.validate();
  InstanceResult out;
  out.relaxed = run_alternating(ch, cfg, ac, opts, settings);
  out.total_iterations = out.relaxed.iterations;
  for (std::size_t k = 0; k < warm_starts.size(); ++k) {
    // A start whose own power is no lower than the incumbent cannot improve
    // on the guarantee it carries.
    if (out.relaxed.ok() && warm_starts[k].xi >= out.relaxed_power()) continue;
    LiftedSolution alt =
        run_alternating_from(warm_starts[k].q_big, ch, cfg, ac, opts, settings);
    out.total_iterations += alt.iterations;
    if (!alt.ok()) continue;
    const double xi = alt.xi_trace.back();
    if (!out.relaxed.ok() || xi < out.relaxed_power()) {
      out.relaxed = std::move(alt);
      out.start_index = static_cast<int>(k) + 1;
    }
  }
  if (!out.relaxed.ok()) return out;
  out.pass_xi.push_back(out.relaxed_power());

  auto round_pass = [&](int pass, const LiftedSolution& ls) {
    RoundingConfig r = rc;
    r.seed = derive_seed(rc.seed, kRoundingStream, static_cast<std::uint64_t>(pass));
    return randomize_select(ls.q_big, ls.z_big, ch, cfg, r, opts);
  };
  out.rounded = round_pass(0, out.relaxed);

  for (int pass = 1; pass <= pc.max_refinements; ++pass) {
    const double xi = out.relaxed_power();
    if (!out.rounded.feasible ||
        out.rounded.total_power >= xi - pc.undercut_tol * std::max(1.0, xi)) {
      break;
    }
    const CMat q0 = out.rounded.pair.q * out.rounded.pair.q.adjoint();
    LiftedSolution next = run_alternating_from(q0, ch, cfg, ac, opts, settings);
    out.total_iterations += next.iterations;
    if (!next.ok()) break;
    out.relaxed = std::move(next);
    out.refinements = pass;
    out.pass_xi.push_back(out.relaxed_power());
    PrecoderSolution r = round_pass(pass, out.relaxed);
    if (r.feasible && r.total_power < out.rounded.total_power) out.rounded = std::move(r);
  }
  return out;
}

inline std::optional<WarmStart> warm_start_from(const InstanceResult& r) {
  if (!r.relaxed_ok()) return std::nullopt;
  return WarmStart{r.relaxed.q_big, r.relaxed_power()};
}

inline InstanceResult solve_instance(const ChannelSet& ch, const SystemConfig& cfg,
                                     const AltConfig& ac, const RoundingConfig& rc,
                                     const RelaxationOptions& opts = {},
                                     const PipelineConfig& pc = {},
                                     const SolveSettings& settings = {}) {
  return solve_instance_warm(ch, cfg, ac, rc, {}, opts, pc, settings);
}

}  // namespace relaysec
