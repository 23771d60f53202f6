#pragma once

// Invariant suites run by the `check` command and the acceptance binary.
// Each suite reports trial and failure counts, the largest residual seen and
// the first failing case.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "relaysec/harness/config.hpp"

namespace relaysec::harness {

struct SuiteReport {
  std::string name;
  int trials = 0;
  int failures = 0;
  int skipped = 0;  // instances outside the suite's precondition
  double max_residual = 0.0;
  double tolerance = 0.0;
  std::string first_failure;

  bool passed() const { return failures == 0 && trials > 0; }

  void observe(double residual, const std::string& where) {
    if (!(residual <= max_residual)) max_residual = residual;
    if (!(residual <= tolerance)) fail(where + ": residual " + std::to_string(residual));
  }
  void fail(const std::string& what) {
    ++failures;
    if (first_failure.empty()) first_failure = what;
  }
};

struct SelfCheckReport {
  std::vector<SuiteReport> suites;
  bool passed() const {
    return std::all_of(suites.begin(), suites.end(), [](const SuiteReport& s) { return s.passed(); });
  }
};

inline Json to_json(const SuiteReport& s) {
  Json j{{"suite", s.name},       {"passed", s.passed()},         {"trials", s.trials},
         {"failures", s.failures}, {"skipped", s.skipped},         {"max_residual", s.max_residual},
         {"tolerance", s.tolerance}};
  if (!s.first_failure.empty()) j["first_failure"] = s.first_failure;
  return j;
}

inline Json to_json(const SelfCheckReport& r) {
  Json suites = Json::array();
  for (const SuiteReport& s : r.suites) suites.push_back(to_json(s));
  return {{"passed", r.passed()}, {"suites", suites}};
}

using Size = std::pair<int, int>;  // (M, N)

inline std::string size_tag(const Size& s, int trial) {
  return "M=" + std::to_string(s.first) + " N=" + std::to_string(s.second) + " trial " +
         std::to_string(trial);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

namespace detail {

inline SystemConfig random_system(const Size& s, Rng& rng) {
  std::uniform_real_distribution<double> u(0.5, 2.0);
  SystemConfig cfg;
  cfg.n_relay = s.first;
  cfg.n_src = s.second;
  cfg.sigma2_r = u(rng);
  cfg.sigma2_b = u(rng);
  cfg.sigma2_e = u(rng);
  cfg.r_b = u(rng);
  cfg.r_e = u(rng);
  cfg.eps = 0.1 * u(rng);
  return cfg;
}

inline BeamformingPair random_pair(const SystemConfig& cfg, Rng& rng) {
  return {complex_normal(rng, cfg.n_src, 1), complex_normal(rng, cfg.n_relay, cfg.n_relay)};
}

/// Uniform point in the complex delta-ball of C^n.
inline CVec ball_point(Eigen::Index n, double delta, Rng& rng) {
  SystemConfig c;
  c.n_relay = static_cast<int>(n);
  c.eps = delta;
  return sample_eve_error(c, rng).delta.transpose();
}

}  // namespace detail

/// Direct versus lifted power, Bob SNR, and the eavesdropper norm chain.
inline SuiteReport identity_suite(const std::vector<Size>& sizes, int trials, std::uint64_t seed,
                                  double tol = 1e-10) {
  SuiteReport rep;
  rep.name = "identity";
  rep.tolerance = tol;
  for (const Size& s : sizes) {
    Rng rng(derive_seed(seed, 0x4964, static_cast<std::uint64_t>(s.first * 16 + s.second)));
    for (int t = 0; t < trials; ++t) {
      const SystemConfig cfg = detail::random_system(s, rng);
      const ChannelSet ch = sample_channels(cfg, rng);
      const BeamformingPair pair = detail::random_pair(cfg, rng);
      const LiftedPair lp = lift(pair);
      const std::string where = size_tag(s, t);
      ++rep.trials;

      rep.observe(rel_err(relay_power(lp, ch, cfg), relay_power(pair, ch, cfg)), where + " relay power");
      rep.observe(rel_err(snr_bob(lp, ch, cfg), snr_bob(pair, ch, cfg)), where + " Bob SNR");

      const CMat& w = pair.w_mat;
      const CMat hqh = ch.h * lp.q_big * ch.h.adjoint();
      const CMat ge = ch.g_e_hat;
      const CVec u_direct = w * hqh * w.adjoint() * ge.adjoint();
      const CVec v_direct = w * w.adjoint() * ge.adjoint();
      const CVec u = numerator_leak(lp.q_big, lp.z_big, ch);
      const CVec v = denominator_leak(lp.z_big, ch);
      rep.observe((u - u_direct).norm() / u_direct.norm(), where + " numerator leak");
      rep.observe((v - v_direct).norm() / v_direct.norm(), where + " denominator leak");

      SystemConfig nominal = cfg;
      nominal.eps = 0.0;
      const EveSnrParts at0 = eve_snr_parts(pair, ch, cfg, {CMat::Zero(1, cfg.n_relay)});
      rep.observe(rel_err(eve_num_ub(lp, ch, nominal), at0.numerator), where + " nominal numerator");
      rep.observe(rel_err(eve_den_lb(lp, ch, nominal), at0.denominator),
                  where + " nominal denominator");

      // Second-order expansion of both terms around the estimate.
      const CMat delta = detail::ball_point(cfg.n_relay, cfg.eps, rng).transpose();
      const EveSnrParts at = eve_snr_parts(pair, ch, cfg, {delta});
      const double num = at0.numerator + 2.0 * (delta * u_direct)(0, 0).real() +
                         (delta * w * hqh * w.adjoint() * delta.adjoint())(0, 0).real();
      const double den = at0.denominator + 2.0 * cfg.sigma2_r * (delta * v_direct)(0, 0).real() +
                         cfg.sigma2_r * (delta * w).squaredNorm();
      rep.observe(rel_err(num, at.numerator), where + " numerator expansion");
      rep.observe(rel_err(den, at.denominator), where + " denominator expansion");
    }
  }
  return rep;
}

/// vec(conj(F) (x) F) = T_f vec(f f^H) exactly, and T_f is a permutation.
inline SuiteReport tf_suite(const std::vector<Size>& shapes, int trials, std::uint64_t seed) {
  SuiteReport rep;
  rep.name = "tf";
  for (const Size& s : shapes) {
    const auto p = static_cast<std::size_t>(s.first);
    const auto q = static_cast<std::size_t>(s.second);
    const PermutationMatrix tf = build_tf(p, q);
    const RMat dense = tf.to_dense();
    const bool perm = (dense.rowwise().sum().array() == 1.0).all() &&
                      (dense.colwise().sum().array() == 1.0).all() &&
                      (dense.array() * (dense.array() - 1.0) == 0.0).all();
    if (!perm) rep.fail("p=" + std::to_string(p) + " q=" + std::to_string(q) + ": not a permutation");
    Rng rng(derive_seed(seed, 0x5466, p * 16 + q));
    for (int t = 0; t < trials; ++t) {
      ++rep.trials;
      const CMat f = complex_normal(rng, s.first, s.second);
      const CVec fv = vec(f);
      const CVec lhs = vec(kron(f.conjugate(), f));
      const CVec rhs = tf.apply(vec(fv * fv.adjoint()));
      const double r = (lhs - rhs).cwiseAbs().maxCoeff();
      rep.observe(r, "p=" + std::to_string(p) + " q=" + std::to_string(q) + " trial " +
                         std::to_string(t));
    }
  }
  return rep;
}

/// Closed-form extreme of Re(x^H y) over |x| <= delta dominates sampled
/// points and is attained by its argument.
inline SuiteReport ball_suite(int instances, int samples, std::uint64_t seed, double tol = 1e-12) {
  SuiteReport rep;
  rep.name = "ball";
  rep.tolerance = tol;
  Rng rng(derive_seed(seed, 0x426c, 0));
  std::uniform_int_distribution<int> dim(1, 6);
  std::uniform_real_distribution<double> rad(0.01, 2.0);
  for (int t = 0; t < instances; ++t) {
    ++rep.trials;
    const int n = dim(rng);
    const CVec y = complex_normal(rng, n, 1, 4.0);
    const double delta = rad(rng);
    const std::string where = "instance " + std::to_string(t);
    for (Sense sense : {Sense::kMax, Sense::kMin}) {
      const BallExtreme ext = ball_lin_extreme(y, delta, sense);
      const double scale = std::max(1.0, delta * y.norm());
      rep.observe(std::abs((ext.argument.adjoint() * y)(0, 0).real() - ext.value) / scale,
                  where + " attainment");
      rep.observe(std::max(0.0, ext.argument.norm() - delta) / delta, where + " argument norm");
      double worst = 0.0;
      for (int k = 0; k < samples; ++k) {
        const CVec x = detail::ball_point(n, delta, rng);
        const double val = (x.adjoint() * y)(0, 0).real();
        const double excess = sense == Sense::kMax ? val - ext.value : ext.value - val;
        worst = std::max(worst, excess / scale);
      }
      rep.observe(worst, where + " dominance");
    }
  }
  return rep;
}

struct SelfCheckHooks {
  // Replaceable for mutation tests of the bound suite.
  std::function<double(const LiftedPair&, const ChannelSet&, const SystemConfig&)> eve_den_lb =
      [](const LiftedPair& lp, const ChannelSet& ch, const SystemConfig& cfg) {
        return relaysec::eve_den_lb(lp, ch, cfg);
      };
};

/// Bound validity at rank-one (Q, Z): the denominator lower bound holds for
/// every sampled error, and the exact numerator stays under the upper bound
/// plus the dropped second-order term.
inline SuiteReport bound_suite(const std::vector<Size>& sizes, const std::vector<double>& eps_list,
                               int instances, int samples, std::uint64_t seed,
                               const SelfCheckHooks& hooks = {}) {
  SuiteReport rep;
  rep.name = "bound";
  rep.tolerance = 1e-9;
  for (const Size& s : sizes) {
    Rng rng(derive_seed(seed, 0x426e, static_cast<std::uint64_t>(s.first * 16 + s.second)));
    for (int t = 0; t < instances; ++t) {
      SystemConfig cfg = detail::random_system(s, rng);
      const ChannelSet ch = sample_channels(cfg, rng);
      const BeamformingPair pair = detail::random_pair(cfg, rng);
      const LiftedPair lp = lift(pair);
      const CVec whq = pair.w_mat * ch.h * pair.q;
      for (double eps : eps_list) {
        ++rep.trials;
        cfg.eps = eps;
        const double lb = hooks.eve_den_lb(lp, ch, cfg);
        const double ub = eve_num_ub(lp, ch, cfg) + eps * eps * whq.squaredNorm() + 1e-9;
        const std::string where = size_tag(s, t) + " eps " + std::to_string(eps);
        std::vector<CMat> deltas;
        deltas.push_back(worst_delta(pair, ch, cfg, BoundTarget::kNumerator).delta);
        deltas.push_back(worst_delta(pair, ch, cfg, BoundTarget::kDenominator).delta);
        for (int k = 0; k < samples; ++k) {
          deltas.push_back(detail::ball_point(cfg.n_relay, eps, rng).transpose());
        }
        double worst_den = 0.0;
        double worst_num = 0.0;
        for (const CMat& d : deltas) {
          const EveSnrParts at = eve_snr_parts(pair, ch, cfg, {d});
          worst_den = std::max(worst_den, (lb - at.denominator) / at.denominator);
          worst_num = std::max(worst_num, (at.numerator - ub) / std::max(1.0, ub));
        }
        // Any positive excess is a violation; the tolerance applies to the
        // numerator's stated 1e-9 allowance only.
        if (worst_den > 0.0) rep.fail(where + ": denominator bound exceeded by " + std::to_string(worst_den));
        rep.max_residual = std::max(rep.max_residual, worst_den);
        rep.observe(worst_num, where + " numerator");
      }
    }
  }
  return rep;
}

struct PipelineCheckConfig {
  double r_b_db = 3.0;
  double r_e_db = 0.0;
  double eps = 0.01;
  double slack = 1e-6;
};

/// Alternating and rounding properties on random channels:
///  monotonicity: non-increasing xi trace, bounded iterations, and no drop in
///  the relaxed optimum when r_b doubles or r_e halves (the tightened
///  solutions are solved first and offered to the base problem as starts);
///  feasibility: exit pair meets both relaxed rows, rounding never undercuts
///  the relaxation, and at eps = 0 the rounded pair meets the exact SNRs.
inline std::pair<SuiteReport, SuiteReport> pipeline_suites(const std::vector<Size>& sizes,
                                                           int trials, std::uint64_t seed,
                                                           const PipelineCheckConfig& pc = {}) {
  SuiteReport mono;
  SuiteReport feas;
  mono.name = "monotonicity";
  feas.name = "feasibility";
  mono.tolerance = pc.slack;
  feas.tolerance = pc.slack;
  const AltConfig ac;
  const PipelineConfig pipe;
  for (const Size& s : sizes) {
    for (int t = 0; t < trials; ++t) {
      SystemConfig cfg;
      cfg.n_relay = s.first;
      cfg.n_src = s.second;
      cfg.r_b = db_to_linear(pc.r_b_db);
      cfg.r_e = db_to_linear(pc.r_e_db);
      cfg.eps = pc.eps;
      const auto idx = static_cast<std::uint64_t>((s.first * 16 + s.second) * 100000 + t);
      const ChannelSet ch = sample_channels(cfg, derive_seed(seed, 0x5069, idx));
      RoundingConfig rc;
      rc.seed = derive_seed(seed, 0x526f, idx);
      const std::string where = size_tag(s, t);

      // Tightened variants first; their solutions seed the base problem.
      std::vector<InstanceResult> tight(2);
      std::vector<WarmStart> warm;
      for (int variant = 0; variant < 2; ++variant) {
        SystemConfig c = cfg;
        if (variant == 0) c.r_b *= 2.0;
        else c.r_e *= 0.5;
        tight[variant] = solve_instance(ch, c, ac, rc, {}, pipe);
        if (auto ws = warm_start_from(tight[variant])) warm.push_back(std::move(*ws));
      }
      const InstanceResult base = solve_instance_warm(ch, cfg, ac, rc, warm, {}, pipe);
      if (!base.relaxed_ok()) {
        ++mono.skipped;
        ++feas.skipped;
        continue;
      }
      ++mono.trials;
      const auto& tr = base.relaxed.xi_trace;
      for (std::size_t i = 1; i < tr.size(); ++i) {
        mono.observe((tr[i] - tr[i - 1]) / std::max(1.0, tr[i - 1]), where + " xi trace");
      }
      if (base.relaxed.iterations > ac.n_max) mono.fail(where + ": iteration cap exceeded");
      const double xi = base.relaxed_power();
      for (int variant = 0; variant < 2; ++variant) {
        const InstanceResult& t2 = tight[variant];
        if (t2.relaxed.status == AltStatus::kInfeasible) continue;
        if (!t2.relaxed_ok()) {
          mono.fail(where + ": tightened solve " + to_string(t2.relaxed.status));
          continue;
        }
        mono.observe((xi - t2.relaxed_power()) / std::max(1.0, xi),
                     where + (variant == 0 ? " r_b doubled" : " r_e halved"));
      }

      ++feas.trials;
      const SurrogateMargins mg =
          surrogate_margins({base.relaxed.q_big, base.relaxed.z_big}, ch, cfg);
      feas.observe(-mg.bob / (cfg.r_b * cfg.sigma2_b), where + " relaxed Bob row");
      feas.observe(-mg.eve / std::max(1.0, xi), where + " relaxed eavesdropper row");
      if (!base.rounded.feasible) {
        feas.fail(where + ": " + base.rounded.detail);
      } else {
        feas.observe((xi - base.rounded.total_power) / std::max(1.0, xi), where + " lower bound");
      }

      SystemConfig nominal = cfg;
      nominal.eps = 0.0;
      const InstanceResult r0 = solve_instance(ch, nominal, ac, rc, {}, pipe);
      if (!r0.relaxed_ok()) continue;
      if (!r0.rounded.feasible) {
        feas.fail(where + " eps 0: " + r0.rounded.detail);
        continue;
      }
      const BeamformingPair& p = r0.rounded.pair;
      feas.observe(cfg.r_b - snr_bob(p, ch, nominal), where + " exact Bob SNR");
      feas.observe(snr_eve_exact(p, ch, nominal, {CMat::Zero(1, cfg.n_relay)}) - cfg.r_e,
                   where + " exact eavesdropper SNR");
      feas.observe((r0.relaxed_power() - r0.rounded.total_power) /
                       std::max(1.0, r0.relaxed_power()),
                   where + " eps 0 lower bound");
    }
  }
  return {mono, feas};
}

struct SelfCheckOptions {
  std::vector<int> dims{2, 3};
  int trials = 10;
  std::uint64_t seed = 1;
  SelfCheckHooks hooks;
};

/// Every suite over all (M, N) drawn from `dims`.
inline SelfCheckReport run_self_check(const SelfCheckOptions& o) {
  if (o.dims.empty()) throw InvalidConfig("self-check needs at least one dimension");
  if (o.trials < 1) throw InvalidConfig("self-check trials must be >= 1");
  std::vector<Size> sizes;
  for (int m : o.dims) {
    if (m < 1) throw InvalidConfig("self-check dimensions must be >= 1");
    for (int n : o.dims) sizes.emplace_back(m, n);
  }
  SelfCheckReport r;
  r.suites.push_back(identity_suite(sizes, o.trials, o.seed));
  r.suites.push_back(tf_suite(sizes, o.trials, o.seed));
  r.suites.push_back(ball_suite(o.trials, 1000, o.seed));
  r.suites.push_back(bound_suite(sizes, {0.01, 0.1}, o.trials, 200, o.seed, o.hooks));
  auto [mono, feas] = pipeline_suites(sizes, o.trials, o.seed);
  r.suites.push_back(std::move(mono));
  r.suites.push_back(std::move(feas));
  return r;
}

}  // namespace relaysec::harness
