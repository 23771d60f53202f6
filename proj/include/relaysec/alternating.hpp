#pragma once

// Alternating minimisation over the two halves of the relaxed power problem:
// fix Q and solve for Z, then fix Z and solve for Q, until the total power
// settles.

#include <cmath>
#include <string>
#include <vector>

#include "relaysec/subproblem.hpp"

namespace relaysec {

struct AltConfig {
  double xi0 = 1e3;  // sentinel for the first convergence test
  double tol = 1e-3;
  int n_max = 30;
  double p_s = 10.0;  // initial source power, spread evenly over the N antennas

  void validate() const {
    if (!(tol > 0.0) || !std::isfinite(tol)) throw InvalidConfig("alternating.tol must be > 0");
    if (n_max < 1) throw InvalidConfig("alternating.n_max must be >= 1");
    if (!(p_s > 0.0) || !std::isfinite(p_s)) throw InvalidConfig("alternating.p_s must be > 0");
    if (!std::isfinite(xi0)) throw InvalidConfig("alternating.xi0 must be finite");
  }
};

enum class AltStatus { kConverged, kIterationCapped, kInfeasible, kFailed };

inline std::string to_string(AltStatus s) {
  switch (s) {
    case AltStatus::kConverged: return "converged";
    case AltStatus::kIterationCapped: return "iteration-capped";
    case AltStatus::kInfeasible: return "infeasible";
    case AltStatus::kFailed: return "failed";
  }
  return "unknown";
}

struct LiftedSolution {
  CMat q_big;
  CMat z_big;
  std::vector<double> xi_trace;  // xi^(1..n)
  int iterations = 0;
  AltStatus status = AltStatus::kFailed;
  int retries = 0;         // re-initialisations of Q^(0)
  std::string detail;      // which half-step stopped the run, if any
  bool ok() const { return status == AltStatus::kConverged || status == AltStatus::kIterationCapped; }
};

namespace detail {

inline AltStatus stop_status(SolveStatus s) {
  return s == SolveStatus::kInfeasible ? AltStatus::kInfeasible : AltStatus::kFailed;
}

}  // namespace detail

/// Algorithm body from a given Q^(0). `retry_first` allows one restart with
/// Q^(0) scaled by 10 when the first Z-half is infeasible.
inline LiftedSolution run_alternating_from(const CMat& q0, const ChannelSet& ch,
                                           const SystemConfig& cfg, const AltConfig& ac,
                                           const RelaxationOptions& opts = {},
                                           const SolveSettings& settings = {},
                                           bool retry_first = false) {
  cfg.validate();
  ac.validate();
  check_channels(ch, cfg);
  const Eigen::Index n_src = cfg.n_src;
  if (q0.rows() != n_src || q0.cols() != n_src) {
    throw DimensionError("run_alternating: Q^(0) must be N x N");
  }

  LiftedSolution out;
  CMat q = q0;
  double xi_prev = ac.xi0;

  for (int n = 1; n <= ac.n_max; ++n) {
    ZSubproblem zs = build_z_subproblem(q, ch, cfg, opts);
    SolveOutcome zr = solve(zs.problem, settings);
    if (n == 1 && retry_first && zr.status == SolveStatus::kInfeasible) {
      q *= 10.0;
      ++out.retries;
      zs = build_z_subproblem(q, ch, cfg, opts);
      zr = solve(zs.problem, settings);
    }
    if (zr.status != SolveStatus::kOptimal) {
      out.status = detail::stop_status(zr.status);
      out.detail = std::string("Z-subproblem ") + to_string(zr.status) + " at iteration " +
                   std::to_string(n);
      out.q_big = q;
      return out;
    }
    const CMat z = zs.recover(zr);

    const SolveOutcome qr = solve(build_q_subproblem(z, ch, cfg, opts), settings);
    if (qr.status != SolveStatus::kOptimal) {
      out.status = detail::stop_status(qr.status);
      out.detail = std::string("Q-subproblem ") + to_string(qr.status) + " at iteration " +
                   std::to_string(n);
      out.q_big = q;
      out.z_big = z;
      return out;
    }
    q = recover_hermitian(qr, "Q", n_src);
    const double xi = qr.objective;
    out.xi_trace.push_back(xi);
    out.iterations = n;
    out.q_big = q;
    out.z_big = z;

    if (xi <= 1e-12 || std::abs(xi - xi_prev) / xi <= ac.tol) {
      out.status = AltStatus::kConverged;
      return out;
    }
    xi_prev = xi;
  }
  out.status = AltStatus::kIterationCapped;
  return out;
}

/// Q^(0) = (p_s / N) I, then alternate Z-half and Q-half; xi^(n) is the
/// Q-half optimum, the total power at (Q^(n), Z^(n)).
inline LiftedSolution run_alternating(const ChannelSet& ch, const SystemConfig& cfg,
                                      const AltConfig& ac, const RelaxationOptions& opts = {},
                                      const SolveSettings& settings = {}) {
  ac.validate();
  const CMat q0 = (ac.p_s / static_cast<double>(cfg.n_src)) * CMat::Identity(cfg.n_src, cfg.n_src);
  return run_alternating_from(q0, ch, cfg, ac, opts, settings, true);
}

}  // namespace relaysec
