#pragma once

// Rank-one recovery of (q, W) from the relaxed (Q, Z): eigen-extraction, then
// Gaussian randomisation with constraint-restoring scale factors.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "relaysec/random.hpp"
#include "relaysec/subproblem.hpp"

namespace relaysec {

struct RoundingConfig {
  int k_samples = 100;
  double rank_tol = 1e-6;
  std::uint64_t seed = 0;
  // Candidates must meet both surrogate rows to within this margin.
  double feas_tol = 1e-8;

  void validate() const {
    if (k_samples < 1) throw InvalidConfig("rounding.k_samples must be >= 1");
    if (!(rank_tol > 0.0 && rank_tol < 1.0)) {
      throw InvalidConfig("rounding.rank_tol must be in (0, 1)");
    }
    if (!(feas_tol >= 0.0) || !std::isfinite(feas_tol)) {
      throw InvalidConfig("rounding.feas_tol must be >= 0");
    }
  }
};

enum class RoundingSource { kEigen, kRandomized };

inline std::string to_string(RoundingSource s) {
  return s == RoundingSource::kEigen ? "eigen" : "randomized";
}

struct PrecoderSolution {
  BeamformingPair pair;
  double total_power = 0.0;
  bool feasible = false;
  double alpha = 1.0;
  double beta = 1.0;
  RoundingSource source = RoundingSource::kEigen;
  int candidate_index = -1;  // 0 is the eigen pair
  int n_candidates = 0;
  int n_feasible = 0;
  SurrogateMargins margins;
  std::string detail;
};

/// sqrt(lambda_1) u_1 when lambda_2 / lambda_1 <= tol. The zero matrix counts
/// as rank one and yields the zero vector.
inline std::optional<CVec> rank_one_extract(const CMat& x, double tol) {
  const HermitianEig eig = hermitian_eig(symmetrize(x));
  const Eigen::Index n = eig.values.size();
  if (n == 0) return CVec(0);
  const double l1 = eig.values(0);
  if (l1 <= 0.0) return CVec(CVec::Zero(n));
  if (n > 1 && std::max(eig.values(1), 0.0) / l1 > tol) return std::nullopt;
  return CVec(std::sqrt(l1) * eig.vectors.col(0));
}

/// Principal component sqrt(lambda_1) u_1, rank one or not.
inline CVec principal_vector(const CMat& x) {
  const HermitianEig eig = hermitian_eig(symmetrize(x));
  if (eig.values.size() == 0 || eig.values(0) <= 0.0) return CVec::Zero(x.rows());
  return std::sqrt(eig.values(0)) * eig.vectors.col(0);
}

struct Candidate {
  CVec q;  // N
  CVec w;  // M^2, vec(W)
};

/// K draws q = S_Q g, w = S_Z h with S S^H the PSD factors and g, h standard
/// complex normal. Per candidate the q draw precedes the w draw.
inline std::vector<Candidate> gaussian_candidates(const CMat& q_opt, const CMat& z_opt,
                                                  const RoundingConfig& rc) {
  rc.validate();
  const CMat sq = psd_factor(q_opt);
  const CMat sz = psd_factor(z_opt);
  Rng rng(rc.seed);
  std::vector<Candidate> out;
  out.reserve(static_cast<std::size_t>(rc.k_samples));
  for (int k = 0; k < rc.k_samples; ++k) {
    Candidate c;
    c.q = sq * complex_normal(rng, sq.cols(), 1);
    c.w = sz * complex_normal(rng, sz.cols(), 1);
    out.push_back(std::move(c));
  }
  return out;
}

struct ScaledCandidate {
  double alpha = 1.0;
  double beta = 1.0;
  CVec q;
  CVec w;
  bool salvageable = false;
  std::string reason;
};

/// alpha puts the Bob row at equality for Q = q q^H; beta then puts the
/// eavesdropper row at equality for Z = alpha^2 w w^H, with the Q-dependent
/// terms scaled by beta^2.
inline ScaledCandidate scale_candidate(const CVec& q, const CVec& w, const ChannelSet& ch,
                                       const SystemConfig& cfg,
                                       const RelaxationOptions& opts = {}) {
  check_channels(ch, cfg);
  const Eigen::Index m = cfg.n_relay;
  if (q.size() != cfg.n_src || w.size() != m * m) {
    throw DimensionError("scale_candidate: candidate dimensions do not match the system");
  }
  ScaledCandidate out;
  const CMat qq = q * q.adjoint();
  const LiftedPair at_q{qq, CMat::Zero(m * m, m * m)};
  const double a_val = (w.adjoint() * matrix_a(at_q, ch, cfg) * w)(0, 0).real();
  if (!(a_val > 0.0)) {
    out.reason = "Bob row cannot be met by scaling W";
    return out;
  }
  out.alpha = std::sqrt(cfg.r_b * cfg.sigma2_b / a_val);
  const CMat z = out.alpha * out.alpha * (w * w.adjoint());

  const CMat ge = gram(ch.g_e_hat);
  const CMat hqh = ch.h * qq * ch.h.adjoint();
  double surplus = cfg.r_e * cfg.sigma2_r * block_trace(z, ge).trace().real();
  double load = trace_kron(z, hqh.transpose(), ge).real();
  if (cfg.eps > 0.0) {
    surplus -= 2.0 * cfg.r_e * cfg.eps * cfg.sigma2_r * denominator_leak(z, ch).norm();
    load += 2.0 * cfg.eps * numerator_leak(qq, z, ch).norm();
  }
  if (opts.eve_constraint_includes_sigma_e) surplus += cfg.r_e * cfg.sigma2_e;
  if (!(surplus > 0.0)) {
    out.reason = "eavesdropper row cannot be met by scaling q";
    return out;
  }
  out.beta = load > 1e-15 * surplus ? std::sqrt(surplus / load) : 1.0;
  out.q = out.beta * q;
  out.w = out.alpha * w;
  out.salvageable = true;
  return out;
}

inline SurrogateMargins candidate_margins(const CVec& q, const CVec& w, const ChannelSet& ch,
                                          const SystemConfig& cfg,
                                          const RelaxationOptions& opts) {
  return surrogate_margins({q * q.adjoint(), w * w.adjoint()}, ch, cfg, opts);
}

inline BeamformingPair to_pair(const CVec& q, const CVec& w, Eigen::Index m) {
  return {CMat(q), unvec(w, m, m)};
}

/// Candidate pool = principal (q, w) pair followed by K Gaussian draws. Each
/// candidate is kept unscaled if it already meets both surrogate rows;
/// otherwise the alpha/beta restoration is applied and the result re-verified
/// at its own (q q^H, w w^H). The cheapest verified candidate wins, ties going
/// to the lower index.
inline PrecoderSolution randomize_select(const CMat& q_opt, const CMat& z_opt,
                                         const ChannelSet& ch, const SystemConfig& cfg,
                                         const RoundingConfig& rc,
                                         const RelaxationOptions& opts = {}) {
  rc.validate();
  check_channels(ch, cfg);
  const Eigen::Index m = cfg.n_relay;

  std::vector<Candidate> pool;
  pool.push_back({principal_vector(q_opt), principal_vector(z_opt)});
  const bool rank_one = rank_one_extract(q_opt, rc.rank_tol).has_value() &&
                        rank_one_extract(z_opt, rc.rank_tol).has_value();
  if (!rank_one) {
    std::vector<Candidate> draws = gaussian_candidates(q_opt, z_opt, rc);
    pool.insert(pool.end(), std::make_move_iterator(draws.begin()),
                std::make_move_iterator(draws.end()));
  }

  PrecoderSolution best;
  best.n_candidates = static_cast<int>(pool.size());
  best.total_power = std::numeric_limits<double>::infinity();
  auto passes = [&](const SurrogateMargins& mg) {
    return mg.bob >= -rc.feas_tol && mg.eve >= -rc.feas_tol;
  };
  auto consider = [&](int index, const CVec& q, const CVec& w, double alpha, double beta) {
    const SurrogateMargins mg = candidate_margins(q, w, ch, cfg, opts);
    if (!passes(mg)) return false;
    const BeamformingPair pair = to_pair(q, w, m);
    const double power = total_power(pair, ch, cfg);
    if (power < best.total_power) {
      best.pair = pair;
      best.total_power = power;
      best.feasible = true;
      best.alpha = alpha;
      best.beta = beta;
      best.source = index == 0 ? RoundingSource::kEigen : RoundingSource::kRandomized;
      best.candidate_index = index;
      best.margins = mg;
    }
    return true;
  };

  for (std::size_t i = 0; i < pool.size(); ++i) {
    const int index = static_cast<int>(i);
    const Candidate& c = pool[i];
    bool ok = consider(index, c.q, c.w, 1.0, 1.0);
    if (!ok) {
      const ScaledCandidate sc = scale_candidate(c.q, c.w, ch, cfg, opts);
      if (sc.salvageable) {
        ok = consider(index, sc.q, sc.w, sc.alpha, sc.beta);
      }
    }
    if (ok) ++best.n_feasible;
  }

  if (!best.feasible) {
    const Candidate& c = pool.front();
    best.pair = to_pair(c.q, c.w, m);
    best.total_power = total_power(best.pair, ch, cfg);
    best.margins = candidate_margins(c.q, c.w, ch, cfg, opts);
    best.candidate_index = 0;
    best.source = RoundingSource::kEigen;
    best.detail = "no candidate met both surrogate rows; returning the principal pair";
  }
  return best;
}

}  // namespace relaysec
