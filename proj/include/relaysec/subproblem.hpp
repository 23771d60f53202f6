#pragma once

// The two convex halves of the relaxed joint design: with Q fixed the
// problem is an SDP/SOCP in Z, with Z fixed it is an SDP/SOCP in Q. Both are
// expressed as ConicProblem values and solved by the embedded interior-point
// method.

#include <cmath>
#include <string>

#include "relaysec/cone_solver.hpp"
#include "relaysec/conic.hpp"
#include "relaysec/sysmodel.hpp"

namespace relaysec {

/// Which reading of the eavesdropper constraint to build. The default keeps
/// the constraint homogeneous in Z (no additive r_e sigma_e^2 term).
struct RelaxationOptions {
  bool eve_constraint_includes_sigma_e = false;
};

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kNumericalFailure, kIterationLimit };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kNumericalFailure: return "numerical-failure";
    case SolveStatus::kIterationLimit: return "iteration-limit";
  }
  return "unknown";
}

struct SolverStats {
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
};

struct SolveOutcome {
  SolveStatus status = SolveStatus::kNumericalFailure;
  double objective = 0.0;
  Assignment assignment;
  SolverStats stats;
};

struct SolveSettings {
  double tolerance = 1e-9;  // normalized residual / gap target
  int max_iters = 200;
};

// ----------------------------------------------------------------- lowering

struct LoweredProblem {
  ipm::StandardForm form;
  std::vector<Eigen::Index> offsets;  // first x coordinate of each block
  double objective_constant = 0.0;
};

/// Column of the PSD slack map for one coordinate of a matrix block.
inline RVec psd_column(const Block& b, Eigen::Index coord) {
  if (b.kind == BlockKind::kHermitian) {
    return ipm::svec(real_embed(hermitian_basis(b.dim, coord)));
  }
  RVec unit = RVec::Zero(b.coords());
  unit(coord) = 1.0;
  return ipm::svec(symmetric_from_coords(unit, b.dim));
}

inline LoweredProblem lower(const ConicProblem& p) {
  LoweredProblem out;
  Eigen::Index n = 0;
  for (const auto& b : p.blocks()) {
    out.offsets.push_back(n);
    n += b.coords();
  }
  auto dense_row = [&](const LinearExpr& e) {
    RVec row = RVec::Zero(n);
    for (const auto& [block, coeffs] : e.terms) {
      row.segment(out.offsets[static_cast<std::size_t>(block)], coeffs.size()) += coeffs;
    }
    return row;
  };

  ipm::StandardForm& f = out.form;
  f.c = dense_row(p.objective());
  out.objective_constant = p.objective().constant;

  const auto n_eq = static_cast<Eigen::Index>(p.equalities().size());
  f.a = RMat::Zero(n_eq, n);
  f.b = RVec::Zero(n_eq);
  for (Eigen::Index i = 0; i < n_eq; ++i) {
    const LinearExpr& e = p.equalities()[static_cast<std::size_t>(i)];
    f.a.row(i) = dense_row(e).transpose();
    f.b(i) = -e.constant;
  }

  ipm::ConeDims& dims = f.cones;
  dims.nonneg = static_cast<Eigen::Index>(p.inequalities().size());
  for (const auto& soc : p.socs()) {
    dims.soc.push_back(static_cast<Eigen::Index>(soc.vector_part.size()) + 1);
  }
  const std::vector<Block> psd = p.psd_blocks();
  for (const auto& b : psd) dims.psd.push_back(b.matrix_side());

  const Eigen::Index m = dims.total();
  f.g = RMat::Zero(m, n);
  f.h = RVec::Zero(m);
  Eigen::Index row = 0;
  auto push = [&](const LinearExpr& e) {  // slack = e
    f.g.row(row) = -dense_row(e).transpose();
    f.h(row) = e.constant;
    ++row;
  };
  for (const auto& e : p.inequalities()) push(e);
  for (const auto& soc : p.socs()) {
    push(soc.bound);
    for (const auto& e : soc.vector_part) push(e);
  }
  for (const auto& b : psd) {
    const int k = p.index_of(b.name);
    const Eigen::Index len = ipm::ConeDims::svec_size(b.matrix_side());
    for (Eigen::Index c = 0; c < b.coords(); ++c) {
      f.g.block(row, out.offsets[static_cast<std::size_t>(k)] + c, len, 1) = -psd_column(b, c);
    }
    row += len;
  }
  return out;
}

inline SolveOutcome solve(const ConicProblem& p, const SolveSettings& settings = {}) {
  const LoweredProblem lowered = lower(p);
  ipm::Settings st;
  st.feastol = settings.tolerance;
  st.abstol = settings.tolerance;
  st.reltol = settings.tolerance;
  st.max_iters = settings.max_iters;
  const ipm::Result r = ipm::solve(lowered.form, st);

  SolveOutcome out;
  switch (r.status) {
    case ipm::Status::kOptimal: out.status = SolveStatus::kOptimal; break;
    case ipm::Status::kPrimalInfeasible: out.status = SolveStatus::kInfeasible; break;
    case ipm::Status::kDualInfeasible: out.status = SolveStatus::kUnbounded; break;
    case ipm::Status::kNumericalFailure: out.status = SolveStatus::kNumericalFailure; break;
    case ipm::Status::kIterationLimit: out.status = SolveStatus::kIterationLimit; break;
  }
  out.stats = {r.iterations, r.primal_residual, r.dual_residual, r.gap};
  std::vector<RVec> values;
  for (std::size_t k = 0; k < p.blocks().size(); ++k) {
    const Eigen::Index len = p.blocks()[k].coords();
    if (r.x.size() == lowered.form.c.size()) {
      values.push_back(r.x.segment(lowered.offsets[k], len));
    } else {
      values.push_back(RVec::Zero(len));
    }
  }
  out.assignment = Assignment(p.blocks(), std::move(values));
  out.objective = p.evaluate_objective(out.assignment);
  return out;
}

inline constexpr double kStructureTol = 1e-6;
inline constexpr double kRecoveredEigTol = 1e-7;

/// Hermitian n x n value of an embedded 2n x 2n matrix, with structure and
/// PSD audits.
inline CMat recover_hermitian(const RMat& embedded, Eigen::Index n) {
  if (embedded.rows() != 2 * n || embedded.cols() != 2 * n) {
    throw DimensionError("recover_hermitian: expected a " + std::to_string(2 * n) +
                         " square block");
  }
  const UnembedResult u = unembed_hermitian(embedded);
  const double scale = std::max(1.0, embedded.cwiseAbs().maxCoeff());
  if (u.structure_defect > kStructureTol * scale) {
    throw NumericalError("recover_hermitian: block-symmetry defect " +
                         std::to_string(u.structure_defect));
  }
  return u.value;
}

inline CMat recover_hermitian(const SolveOutcome& out, const std::string& block, Eigen::Index n) {
  if (out.status != SolveStatus::kOptimal) {
    throw std::invalid_argument("recover_hermitian: outcome is not optimal");
  }
  CMat value = recover_hermitian(out.assignment.matrix(block), n);
  const HermitianEig eig = hermitian_eig(value);
  const double top = std::max(1.0, eig.values.size() ? eig.values(0) : 0.0);
  if (eig.values.size() && eig.values(eig.values.size() - 1) < -kRecoveredEigTol * top) {
    throw NumericalError("recover_hermitian: recovered block is not PSD");
  }
  return value;
}

// ------------------------------------------------------ surrogate constraints

/// Margins of the relaxed constraints at (Q, Z); both are >= 0 when feasible.
struct SurrogateMargins {
  double bob = 0.0;  // Tr(Z A) - r_b sigma_b^2
  double eve = 0.0;  // Tr(Z B) - 2 eps |u| - 2 r_e eps sigma_r^2 |v| (+ r_e sigma_e^2)
};

inline SurrogateMargins surrogate_margins(const LiftedPair& lp, const ChannelSet& ch,
                                          const SystemConfig& cfg,
                                          const RelaxationOptions& opts = {}) {
  SurrogateMargins m;
  m.bob = (lp.z_big * matrix_a(lp, ch, cfg)).trace().real() - cfg.r_b * cfg.sigma2_b;
  double eve = (lp.z_big * matrix_b(lp, ch, cfg)).trace().real();
  if (cfg.eps > 0.0) {
    eve -= 2.0 * cfg.eps * numerator_leak(lp.q_big, lp.z_big, ch).norm();
    eve -= 2.0 * cfg.r_e * cfg.eps * cfg.sigma2_r * denominator_leak(lp.z_big, ch).norm();
  }
  if (opts.eve_constraint_includes_sigma_e) eve += cfg.r_e * cfg.sigma2_e;
  m.eve = eve;
  return m;
}

// ------------------------------------------------------------- builders

inline void add_leak_soc(ConicProblem& p, int block, const RMat& rows, double scale,
                         const LinearExpr& bound) {
  SocConstraint soc;
  soc.bound = bound;
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    LinearExpr e;
    e.add(block, scale * rows.row(r).transpose());
    soc.vector_part.push_back(std::move(e));
  }
  p.add_soc(std::move(soc));
}

/// Z-half after the source covariance is fixed.
///
/// When the eavesdropper row can only hold with g_e_hat W = 0, every feasible
/// Z lies on the face {Z = P Y P^H} with P = I_M (x) null(g_e_hat). The
/// problem is then posed in Y directly; the eavesdropper row is identically
/// zero there and is dropped. This keeps the conic problem strictly feasible.
struct ZSubproblem {
  ConicProblem problem;
  CMat basis;  // M^2 x k; Z = basis * Y * basis^H
  bool face_reduced = false;

  /// Z from a solved outcome.
  CMat recover(const SolveOutcome& out) const {
    const CMat y = recover_hermitian(out, "Z", basis.cols());
    if (!face_reduced) return y;
    const CMat z = basis * y * basis.adjoint();
    return 0.5 * (z + z.adjoint());
  }
};

/// Largest eigenvalue of the quadratic form that the eavesdropper row puts on
/// a = g_e_hat W. Negative means the row forces a = 0.
inline double eve_face_margin(const CMat& q_fixed, const ChannelSet& ch, const SystemConfig& cfg) {
  const Eigen::Index m = cfg.n_relay;
  const CMat eye = CMat::Identity(m, m);
  const CMat hqh = ch.h * q_fixed * ch.h.adjoint();
  const double gnorm = ch.g_e_hat.norm();
  const CMat x = cfg.r_e * cfg.sigma2_r * eye - hqh;
  const CMat d = x - (2.0 * cfg.eps / gnorm) * (hqh + cfg.r_e * cfg.sigma2_r * eye);
  return hermitian_eig(0.5 * (d + d.adjoint())).values(0);
}

/// Orthonormal basis of {w : g w = 0} for a nonzero 1 x M row g.
inline CMat null_basis(const CMat& g) {
  const Eigen::Index m = g.cols();
  const Eigen::HouseholderQR<CMat> qr(g.adjoint());
  const CMat full = qr.householderQ() * CMat::Identity(m, m);
  return full.rightCols(m - 1);
}

/// Variables Z (Hermitian M^2 x M^2, PSD) and, when eps > 0, the epigraph
/// scalars t1 >= |u(Z)|, t2 >= |v(Z)|.
inline ZSubproblem build_z_subproblem(const CMat& q_fixed, const ChannelSet& ch,
                                      const SystemConfig& cfg,
                                      const RelaxationOptions& opts = {}) {
  check_channels(ch, cfg);
  if (q_fixed.rows() != cfg.n_src || q_fixed.cols() != cfg.n_src) {
    throw DimensionError("build_z_subproblem: Q must be N x N");
  }
  const Eigen::Index m = cfg.n_relay;
  const Eigen::Index n = m * m;
  const CMat eye = CMat::Identity(m, m);
  const LiftedPair at_q{q_fixed, CMat::Zero(n, n)};
  const CMat cost = kron(relay_input_cov(q_fixed, ch, cfg).transpose(), eye);

  ZSubproblem out;
  ConicProblem& p = out.problem;
  out.face_reduced = !opts.eve_constraint_includes_sigma_e && m > 1 &&
                     ch.g_e_hat.norm() > 0.0 && eve_face_margin(q_fixed, ch, cfg) < 0.0;
  if (out.face_reduced) {
    out.basis = kron(eye, null_basis(ch.g_e_hat));
    const CMat& b = out.basis;
    const int y = p.add_hermitian("Z", b.cols(), true);
    LinearExpr obj;
    obj.add(y, hermitian_trace_coeffs(b.adjoint() * cost * b));
    obj.add_constant(q_fixed.trace().real());
    p.set_objective(obj);
    LinearExpr bob;
    bob.add(y, hermitian_trace_coeffs(b.adjoint() * matrix_a(at_q, ch, cfg) * b));
    bob.add_constant(-cfg.r_b * cfg.sigma2_b);
    p.add_inequality(bob);
    return out;
  }
  out.basis = CMat::Identity(n, n);

  const int z = p.add_hermitian("Z", n, true);

  LinearExpr obj;
  obj.add(z, hermitian_trace_coeffs(cost));
  obj.add_constant(q_fixed.trace().real());
  p.set_objective(obj);

  LinearExpr bob;
  bob.add(z, hermitian_trace_coeffs(matrix_a(at_q, ch, cfg)));
  bob.add_constant(-cfg.r_b * cfg.sigma2_b);
  p.add_inequality(bob);

  LinearExpr eve;
  eve.add(z, hermitian_trace_coeffs(matrix_b(at_q, ch, cfg)));
  if (opts.eve_constraint_includes_sigma_e) eve.add_constant(cfg.r_e * cfg.sigma2_e);

  if (cfg.eps > 0.0) {
    const int t1 = p.add_scalar("t1");
    const int t2 = p.add_scalar("t2");
    eve.add(t1, RVec::Constant(1, -2.0 * cfg.eps));
    eve.add(t2, RVec::Constant(1, -2.0 * cfg.r_e * cfg.eps * cfg.sigma2_r));

    const LeakOperator num_op(ch.h * q_fixed * ch.h.adjoint(), ch.g_e_hat);
    const LeakOperator den_op(eye, ch.g_e_hat);
    const RMat u_rows = probe_hermitian_map(n, m, [&](const CMat& b) { return num_op.apply(b); });
    const RMat v_rows = probe_hermitian_map(n, m, [&](const CMat& b) { return den_op.apply(b); });
    LinearExpr t1_expr;
    t1_expr.add(t1, RVec::Ones(1));
    LinearExpr t2_expr;
    t2_expr.add(t2, RVec::Ones(1));
    add_leak_soc(p, z, u_rows, 1.0, t1_expr);
    add_leak_soc(p, z, v_rows, 1.0, t2_expr);
  }
  p.add_inequality(eve);
  return out;
}

/// Q-half: variable Q (Hermitian N x N, PSD); the eavesdropper row becomes
/// |2 eps u(Q)| <= Tr(Z B(Q)) - 2 r_e eps sigma_r^2 |v(Z)| (+ r_e sigma_e^2).
inline ConicProblem build_q_subproblem(const CMat& z_fixed, const ChannelSet& ch,
                                       const SystemConfig& cfg,
                                       const RelaxationOptions& opts = {}) {
  check_channels(ch, cfg);
  const Eigen::Index m = cfg.n_relay;
  const Eigen::Index nn = cfg.n_src;
  if (z_fixed.rows() != m * m || z_fixed.cols() != m * m) {
    throw DimensionError("build_q_subproblem: Z must be M^2 x M^2");
  }
  const CMat eye_m = CMat::Identity(m, m);
  const CMat eye_n = CMat::Identity(nn, nn);
  const CMat hh = ch.h.adjoint();
  // Tr(Z (X^T (x) C)) = Re Tr(Q H^H T^T H) for X = H Q H^H, T = block_trace(Z, C).
  const CMat t_i = block_trace(z_fixed, eye_m);
  const CMat t_b = block_trace(z_fixed, gram(ch.g_b));
  const CMat t_e = block_trace(z_fixed, gram(ch.g_e_hat));

  ConicProblem p;
  const int q = p.add_hermitian("Q", nn, true);

  LinearExpr obj;
  obj.add(q, hermitian_trace_coeffs(eye_n + hh * t_i.transpose() * ch.h));
  obj.add_constant(cfg.sigma2_r * z_fixed.trace().real());
  p.set_objective(obj);

  LinearExpr bob;
  bob.add(q, hermitian_trace_coeffs(hh * t_b.transpose() * ch.h));
  bob.add_constant(-cfg.r_b * cfg.sigma2_r * t_b.trace().real() -
                   cfg.r_b * cfg.sigma2_b);
  p.add_inequality(bob);

  // Z with g_e_hat W = 0 makes every eavesdropper term vanish; keeping the
  // row would pin a cone at its apex.
  const double leak_scale = z_fixed.trace().real() * ch.g_e_hat.squaredNorm();
  if (!opts.eve_constraint_includes_sigma_e && t_e.trace().real() <= 1e-24 * leak_scale) {
    return p;
  }

  LinearExpr eve;
  eve.add(q, hermitian_trace_coeffs(-(hh * t_e.transpose() * ch.h)));
  double eve_const = cfg.r_e * cfg.sigma2_r * t_e.trace().real();
  if (opts.eve_constraint_includes_sigma_e) eve_const += cfg.r_e * cfg.sigma2_e;
  if (cfg.eps > 0.0) {
    eve_const -= 2.0 * cfg.r_e * cfg.eps * cfg.sigma2_r * denominator_leak(z_fixed, ch).norm();
  }
  eve.add_constant(eve_const);

  if (cfg.eps > 0.0) {
    const RMat u_rows = probe_hermitian_map(nn, m, [&](const CMat& b) {
      return LeakOperator(ch.h * b * hh, ch.g_e_hat).apply(z_fixed);
    });
    add_leak_soc(p, q, u_rows, 2.0 * cfg.eps, eve);
  } else {
    p.add_inequality(eve);
  }
  return p;
}

}  // namespace relaysec
