#pragma once

// Primal-dual interior-point method for
//
//     minimize    c^T x
//     subject to  G x + s = h,   A x = b,   s in K
//
// where K is a product of a nonnegative orthant, second-order cones and PSD
// cones (PSD blocks stored as svec: lower triangle, column by column,
// off-diagonals scaled by sqrt 2). The iteration runs on the homogeneous
// self-dual embedding with Nesterov-Todd scaling and a Mehrotra
// predictor-corrector, so infeasibility is detected from certificates rather
// than from divergence.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <optional>
#include <vector>

#include "relaysec/linalg.hpp"

namespace relaysec::ipm {

struct ConeDims {
  Eigen::Index nonneg = 0;
  std::vector<Eigen::Index> soc;  // full cone dimension, >= 1
  std::vector<Eigen::Index> psd;  // matrix side

  static Eigen::Index svec_size(Eigen::Index d) { return d * (d + 1) / 2; }

  Eigen::Index total() const {
    Eigen::Index t = nonneg;
    for (auto k : soc) t += k;
    for (auto d : psd) t += svec_size(d);
    return t;
  }
  double degree() const {
    double g = static_cast<double>(nonneg + static_cast<Eigen::Index>(soc.size()));
    for (auto d : psd) g += static_cast<double>(d);
    return g;
  }
};

struct StandardForm {
  RVec c;
  RMat g;
  RVec h;
  RMat a;
  RVec b;
  ConeDims cones;
};

enum class Status { kOptimal, kPrimalInfeasible, kDualInfeasible, kNumericalFailure, kIterationLimit };

struct Settings {
  double feastol = 1e-9;
  double abstol = 1e-9;
  double reltol = 1e-9;
  int max_iters = 200;
  double step_fraction = 0.99;
  // When progress stalls short of the targets above, the best iterate seen is
  // still reported optimal if both residuals are below accept_tol and the gap
  // (absolute or relative) is below accept_gap. Problems without a strictly
  // feasible point end up here: the dual grows without bound and the dual
  // residual degrades before the gap closes.
  double accept_tol = 1e-7;
  double accept_gap = 1e-6;
  int stall_iters = 4;
  bool verbose = false;
};

struct Result {
  Status status = Status::kNumericalFailure;
  RVec x, y, s, z;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
};

// ------------------------------------------------------------ svec helpers

inline RMat smat(const Eigen::Ref<const RVec>& v, Eigen::Index d) {
  RMat x(d, d);
  Eigen::Index k = 0;
  const double r2 = std::sqrt(0.5);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = j; i < d; ++i) {
      const double val = i == j ? v(k) : v(k) * r2;
      x(i, j) = val;
      x(j, i) = val;
      ++k;
    }
  }
  return x;
}

inline void svec_into(const RMat& x, Eigen::Ref<RVec> out) {
  const Eigen::Index d = x.rows();
  Eigen::Index k = 0;
  const double s2 = std::sqrt(2.0);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = j; i < d; ++i) {
      out(k++) = i == j ? x(i, i) : s2 * 0.5 * (x(i, j) + x(j, i));
    }
  }
}

inline RVec svec(const RMat& x) {
  RVec out(ConeDims::svec_size(x.rows()));
  svec_into(x, out);
  return out;
}

// --------------------------------------------------------------- scaling

struct SocScale {
  double beta = 1.0;
  RVec v;
};

struct PsdScale {
  RMat r;
  RMat rinv;
  RVec lambda;  // diagonal of the scaled point
};

struct Scaling {
  RVec d;  // nonneg: W = diag(d)
  std::vector<SocScale> soc;
  std::vector<PsdScale> psd;
  RVec lambda;  // W z = W^{-T} s
};

enum class Op { kW, kWt, kWinv, kWinvT };

namespace detail {

template <typename Fn>
void for_each_cone(const ConeDims& dims, Fn&& fn) {
  Eigen::Index off = 0;
  if (dims.nonneg > 0) fn(0, 0, off, dims.nonneg);
  off += dims.nonneg;
  for (std::size_t k = 0; k < dims.soc.size(); ++k) {
    fn(1, k, off, dims.soc[k]);
    off += dims.soc[k];
  }
  for (std::size_t k = 0; k < dims.psd.size(); ++k) {
    fn(2, k, off, dims.psd[k]);
    off += ConeDims::svec_size(dims.psd[k]);
  }
}

inline double soc_jnorm2(const Eigen::Ref<const RVec>& x) {
  return x(0) * x(0) - x.tail(x.size() - 1).squaredNorm();
}

}  // namespace detail

/// Applies W, W^T, W^{-1} or W^{-T} to a vector in the cone space.
inline RVec apply_scaling(const ConeDims& dims, const Scaling& w, Op op, const RVec& x) {
  RVec out(x.size());
  detail::for_each_cone(dims, [&](int kind, std::size_t k, Eigen::Index off, Eigen::Index len) {
    if (kind == 0) {
      const auto seg = x.segment(off, len);
      if (op == Op::kW || op == Op::kWt) {
        out.segment(off, len) = w.d.cwiseProduct(seg);
      } else {
        out.segment(off, len) = seg.cwiseQuotient(w.d);
      }
    } else if (kind == 1) {
      const SocScale& sc = w.soc[k];
      RVec seg = x.segment(off, len);
      if (op == Op::kW || op == Op::kWt) {
        RVec jx = seg;
        jx.tail(len - 1) *= -1.0;
        out.segment(off, len) = sc.beta * (2.0 * sc.v * sc.v.dot(seg) - jx);
      } else {
        RVec jv = sc.v;
        jv.tail(len - 1) *= -1.0;
        RVec jx = seg;
        jx.tail(len - 1) *= -1.0;
        out.segment(off, len) = (2.0 * jv * jv.dot(seg) - jx) / sc.beta;
      }
    } else {
      const PsdScale& sc = w.psd[k];
      const RMat m = smat(x.segment(off, ConeDims::svec_size(len)), len);
      RMat res;
      switch (op) {
        case Op::kW: res = sc.r.transpose() * m * sc.r; break;
        case Op::kWt: res = sc.r * m * sc.r.transpose(); break;
        case Op::kWinv: res = sc.rinv.transpose() * m * sc.rinv; break;
        case Op::kWinvT: res = sc.rinv * m * sc.rinv.transpose(); break;
      }
      svec_into(res, out.segment(off, ConeDims::svec_size(len)));
    }
  });
  return out;
}

/// Nesterov-Todd scaling at interior (s, z). Empty when either point has
/// left the cone interior numerically.
inline std::optional<Scaling> nt_scaling(const ConeDims& dims, const RVec& s, const RVec& z) {
  Scaling w;
  w.lambda.resize(s.size());
  bool ok = true;
  detail::for_each_cone(dims, [&](int kind, std::size_t, Eigen::Index off, Eigen::Index len) {
    if (!ok) return;
    if (kind == 0) {
      const auto ss = s.segment(off, len);
      const auto zz = z.segment(off, len);
      if ((ss.array() <= 0.0).any() || (zz.array() <= 0.0).any()) {
        ok = false;
        return;
      }
      w.d = (ss.array() / zz.array()).sqrt();
      w.lambda.segment(off, len) = (ss.array() * zz.array()).sqrt();
    } else if (kind == 1) {
      const RVec ss = s.segment(off, len);
      const RVec zz = z.segment(off, len);
      const double sn = detail::soc_jnorm2(ss);
      const double zn = detail::soc_jnorm2(zz);
      if (!(sn > 0.0) || !(zn > 0.0) || ss(0) <= 0.0 || zz(0) <= 0.0) {
        ok = false;
        return;
      }
      const RVec sb = ss / std::sqrt(sn);
      const RVec zb = zz / std::sqrt(zn);
      const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
      RVec jz = zb;
      jz.tail(len - 1) *= -1.0;
      const RVec wb = (sb + jz) / (2.0 * gamma);
      RVec v = wb;
      v(0) += 1.0;
      v /= std::sqrt(2.0 * (wb(0) + 1.0));
      SocScale sc{std::pow(sn / zn, 0.25), v};
      RVec wz(len);
      RVec jzz = zz;
      jzz.tail(len - 1) *= -1.0;
      wz = sc.beta * (2.0 * v * v.dot(zz) - jzz);
      w.lambda.segment(off, len) = wz;
      w.soc.push_back(std::move(sc));
    } else {
      const RMat sm = smat(s.segment(off, ConeDims::svec_size(len)), len);
      const RMat zm = smat(z.segment(off, ConeDims::svec_size(len)), len);
      Eigen::LLT<RMat> ls(sm);
      Eigen::LLT<RMat> lz(zm);
      if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) {
        ok = false;
        return;
      }
      const RMat l_s = ls.matrixL();
      const RMat l_z = lz.matrixL();
      Eigen::JacobiSVD<RMat> svd(l_z.transpose() * l_s, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const RVec sig = svd.singularValues();
      if (!(sig.minCoeff() > 0.0)) {
        ok = false;
        return;
      }
      const RVec isq = sig.cwiseSqrt().cwiseInverse();
      PsdScale sc;
      sc.r = l_s * svd.matrixV() * isq.asDiagonal();
      sc.rinv = isq.asDiagonal() * svd.matrixU().transpose() * l_z.transpose();
      sc.lambda = sig;
      svec_into(RMat(sig.asDiagonal()), w.lambda.segment(off, ConeDims::svec_size(len)));
      w.psd.push_back(std::move(sc));
    }
  });
  if (!ok || !w.lambda.allFinite()) return std::nullopt;
  return w;
}

// -------------------------------------------------------- Jordan algebra

/// x o y.
inline RVec jordan_product(const ConeDims& dims, const RVec& x, const RVec& y) {
  RVec out(x.size());
  detail::for_each_cone(dims, [&](int kind, std::size_t, Eigen::Index off, Eigen::Index len) {
    if (kind == 0) {
      out.segment(off, len) = x.segment(off, len).cwiseProduct(y.segment(off, len));
    } else if (kind == 1) {
      const auto xs = x.segment(off, len);
      const auto ys = y.segment(off, len);
      out(off) = xs.dot(ys);
      out.segment(off + 1, len - 1) = xs(0) * ys.tail(len - 1) + ys(0) * xs.tail(len - 1);
    } else {
      const Eigen::Index n = ConeDims::svec_size(len);
      const RMat xm = smat(x.segment(off, n), len);
      const RMat ym = smat(y.segment(off, n), len);
      svec_into(0.5 * (xm * ym + ym * xm), out.segment(off, n));
    }
  });
  return out;
}

/// Solves lambda o u = x for u, with lambda the scaled point.
inline RVec jordan_solve(const ConeDims& dims, const Scaling& w, const RVec& x) {
  RVec out(x.size());
  std::size_t psd_k = 0;
  detail::for_each_cone(dims, [&](int kind, std::size_t, Eigen::Index off, Eigen::Index len) {
    const auto lam = w.lambda.segment(off, kind == 2 ? ConeDims::svec_size(len) : len);
    if (kind == 0) {
      out.segment(off, len) = x.segment(off, len).cwiseQuotient(lam);
    } else if (kind == 1) {
      const auto xs = x.segment(off, len);
      const double det = detail::soc_jnorm2(lam);
      const double u0 = (lam(0) * xs(0) - lam.tail(len - 1).dot(xs.tail(len - 1))) / det;
      out(off) = u0;
      out.segment(off + 1, len - 1) = (xs.tail(len - 1) - u0 * lam.tail(len - 1)) / lam(0);
    } else {
      const RVec& l = w.psd[psd_k++].lambda;
      Eigen::Index k = off;
      for (Eigen::Index j = 0; j < len; ++j) {
        for (Eigen::Index i = j; i < len; ++i) {
          out(k) = 2.0 * x(k) / (l(i) + l(j));
          ++k;
        }
      }
    }
  });
  return out;
}

inline RVec cone_identity(const ConeDims& dims) {
  RVec e = RVec::Zero(dims.total());
  detail::for_each_cone(dims, [&](int kind, std::size_t, Eigen::Index off, Eigen::Index len) {
    if (kind == 0) {
      e.segment(off, len).setOnes();
    } else if (kind == 1) {
      e(off) = 1.0;
    } else {
      svec_into(RMat::Identity(len, len), e.segment(off, ConeDims::svec_size(len)));
    }
  });
  return e;
}

/// Smallest "eigenvalue" over all cones: min entry, x0 - |x1|, lambda_min.
inline double cone_min_eig(const ConeDims& dims, const RVec& x) {
  double out = std::numeric_limits<double>::infinity();
  detail::for_each_cone(dims, [&](int kind, std::size_t, Eigen::Index off, Eigen::Index len) {
    if (kind == 0) {
      out = std::min(out, x.segment(off, len).minCoeff());
    } else if (kind == 1) {
      out = std::min(out, x(off) - x.segment(off + 1, len - 1).norm());
    } else {
      const RMat m = smat(x.segment(off, ConeDims::svec_size(len)), len);
      Eigen::SelfAdjointEigenSolver<RMat> eig(m, Eigen::EigenvaluesOnly);
      out = std::min(out, eig.eigenvalues()(0));
    }
  });
  return out;
}

/// Largest alpha with lambda + alpha * dir in the cone, for the scaled point
/// lambda (diagonal within PSD blocks). Returns +inf when unbounded.
inline double max_step(const ConeDims& dims, const Scaling& w, const RVec& dir) {
  double alpha = std::numeric_limits<double>::infinity();
  std::size_t psd_k = 0;
  detail::for_each_cone(dims, [&](int kind, std::size_t, Eigen::Index off, Eigen::Index len) {
    if (kind == 0) {
      for (Eigen::Index i = off; i < off + len; ++i) {
        if (dir(i) < 0.0) alpha = std::min(alpha, -w.lambda(i) / dir(i));
      }
    } else if (kind == 1) {
      const auto lam = w.lambda.segment(off, len);
      const auto d = dir.segment(off, len);
      // (lam0 + a d0)^2 - |lam1 + a d1|^2 >= 0 with lam0 + a d0 >= 0
      const double qa = detail::soc_jnorm2(d);
      const double qb = 2.0 * (lam(0) * d(0) - lam.tail(len - 1).dot(d.tail(len - 1)));
      const double qc = detail::soc_jnorm2(lam);
      double root = std::numeric_limits<double>::infinity();
      if (std::abs(qa) < 1e-300) {
        if (qb < 0.0) root = -qc / qb;
      } else {
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc >= 0.0) {
          const double sq = std::sqrt(disc);
          const double t = -0.5 * (qb + (qb >= 0.0 ? sq : -sq));
          const double r1 = t / qa;
          const double r2 = t != 0.0 ? qc / t : std::numeric_limits<double>::infinity();
          for (double r : {r1, r2}) {
            if (r > 0.0) root = std::min(root, r);
          }
        }
      }
      if (d(0) < 0.0) root = std::min(root, -lam(0) / d(0));
      alpha = std::min(alpha, root);
    } else {
      const RVec& l = w.psd[psd_k++].lambda;
      const RMat dm = smat(dir.segment(off, ConeDims::svec_size(len)), len);
      const RVec isq = l.cwiseSqrt().cwiseInverse();
      const RMat m = -(isq.asDiagonal() * dm * isq.asDiagonal());
      Eigen::SelfAdjointEigenSolver<RMat> eig(m, Eigen::EigenvaluesOnly);
      const double top = eig.eigenvalues()(len - 1);
      if (top > 0.0) alpha = std::min(alpha, 1.0 / top);
    }
  });
  return alpha;
}

// ------------------------------------------------------------ KKT system

/// W^{-T} G, cone by cone. PSD columns with few nonzeros use the rank-two
/// form R (E_ij + E_ji) R^T = r_i r_j^T + r_j r_i^T instead of two dense
/// matrix products.
inline RMat scaled_constraints(const StandardForm& f, const Scaling& w) {
  const Eigen::Index n = f.g.cols();
  RMat gs(f.g.rows(), n);
  const double r2 = std::sqrt(0.5);
  detail::for_each_cone(f.cones, [&](int kind, std::size_t k, Eigen::Index off, Eigen::Index len) {
    if (kind == 0) {
      gs.middleRows(off, len) = w.d.cwiseInverse().asDiagonal() * f.g.middleRows(off, len);
    } else if (kind == 1) {
      const SocScale& sc = w.soc[k];
      RVec jv = sc.v;
      jv.tail(len - 1) *= -1.0;
      RMat winv = 2.0 * jv * jv.transpose();
      winv.diagonal()(0) -= 1.0;
      winv.diagonal().tail(len - 1).array() += 1.0;
      gs.middleRows(off, len) = (winv / sc.beta) * f.g.middleRows(off, len);
    } else {
      const RMat& rinv = w.psd[k].rinv;
      const Eigen::Index sz = ConeDims::svec_size(len);
      std::vector<std::pair<Eigen::Index, Eigen::Index>> index(static_cast<std::size_t>(sz));
      Eigen::Index t = 0;
      for (Eigen::Index j = 0; j < len; ++j) {
        for (Eigen::Index i = j; i < len; ++i) index[static_cast<std::size_t>(t++)] = {i, j};
      }
      RMat acc(len, len);
      for (Eigen::Index col = 0; col < n; ++col) {
        const auto seg = f.g.col(col).segment(off, sz);
        Eigen::Index nnz = 0;
        for (Eigen::Index e = 0; e < sz; ++e) nnz += seg(e) != 0.0;
        if (nnz == 0) {
          gs.col(col).segment(off, sz).setZero();
          continue;
        }
        if (nnz <= len) {
          acc.setZero();
          for (Eigen::Index e = 0; e < sz; ++e) {
            if (seg(e) == 0.0) continue;
            const auto [i, j] = index[static_cast<std::size_t>(e)];
            if (i == j) {
              acc.noalias() += seg(e) * rinv.col(i) * rinv.col(i).transpose();
            } else {
              acc.noalias() += (seg(e) * r2) * (rinv.col(i) * rinv.col(j).transpose() +
                                                rinv.col(j) * rinv.col(i).transpose());
            }
          }
        } else {
          acc = rinv * smat(seg, len) * rinv.transpose();
        }
        svec_into(acc, gs.col(col).segment(off, sz));
      }
    }
  });
  return gs;
}


/// Factorization of
///   [ 0  A^T  G^T    ]
///   [ A  0    0      ]
///   [ G  0   -W^T W  ]
/// through the reduced normal equations in (dx, dy).
class KktSystem {
 public:
  KktSystem(const StandardForm& f, const Scaling& w) : f_(f), w_(w) {
    const Eigen::Index n = f.c.size();
    const Eigen::Index p = f.b.size();
    gs_ = scaled_constraints(f, w);
    if (p == 0) {
      qr_.compute(gs_);
      if (qr_.rank() == n) return;
      use_qr_ = false;
    }
    saddle_ = RMat::Zero(n + p, n + p);
    saddle_.topLeftCorner(n, n) = gs_.transpose() * gs_;
    if (p > 0) {
      saddle_.topRightCorner(n, p) = f.a.transpose();
      saddle_.bottomLeftCorner(p, n) = f.a;
    }
    const double scale = std::max(1.0, saddle_.diagonal().cwiseAbs().maxCoeff());
    RMat reg = saddle_;
    reg.diagonal().head(n).array() += 1e-13 * scale;
    reg.diagonal().tail(p).array() -= 1e-13 * scale;
    lu_.compute(reg);
  }

  struct Step {
    RVec dx, dy, dz, wdz;  // wdz = W dz
  };

  Step solve(const RVec& px, const RVec& py, const RVec& pz) const {
    Step st = solve_once(px, py, pz);
    for (int it = 0; it < 2; ++it) {
      // Residual of the unreduced system; W^T W dz = W^T (W dz).
      const RVec rx = px - f_.a.transpose() * st.dy - f_.g.transpose() * st.dz;
      const RVec ry = py - f_.a * st.dx;
      const RVec rz = pz - f_.g * st.dx + apply_scaling(f_.cones, w_, Op::kWt, st.wdz);
      const Step corr = solve_once(rx, ry, rz);
      st.dx += corr.dx;
      st.dy += corr.dy;
      st.dz += corr.dz;
      st.wdz += corr.wdz;
    }
    return st;
  }

 private:
  Step solve_once(const RVec& px, const RVec& py, const RVec& pz) const {
    const Eigen::Index n = f_.c.size();
    const Eigen::Index p = f_.b.size();
    const RVec wpz = apply_scaling(f_.cones, w_, Op::kWinvT, pz);
    RVec rhs(n + p);
    rhs.head(n) = px + gs_.transpose() * wpz;
    rhs.tail(p) = py;
    if (use_qr_ && p == 0) {
      // H = P R^T R P^T
      const auto r = qr_.matrixQR().topLeftCorner(n, n).template triangularView<Eigen::Upper>();
      RVec y = qr_.colsPermutation().transpose() * rhs;
      r.transpose().solveInPlace(y);
      r.solveInPlace(y);
      Step st;
      st.dx = qr_.colsPermutation() * y;
      st.dy = RVec::Zero(0);
      st.wdz = gs_ * st.dx - wpz;
      st.dz = apply_scaling(f_.cones, w_, Op::kWinv, st.wdz);
      return st;
    }
    RVec sol = lu_.solve(rhs);
    const RVec res = rhs - saddle_ * sol;
    sol += lu_.solve(res);
    Step st;
    st.dx = sol.head(n);
    st.dy = sol.tail(p);
    st.wdz = gs_ * st.dx - wpz;
    st.dz = apply_scaling(f_.cones, w_, Op::kWinv, st.wdz);
    return st;
  }

  const StandardForm& f_;
  const Scaling& w_;
  RMat gs_;
  RMat saddle_;
  Eigen::PartialPivLU<RMat> lu_;
  Eigen::ColPivHouseholderQR<RMat> qr_;
  bool use_qr_ = true;
};

// ---------------------------------------------------------------- driver

inline Result solve(const StandardForm& f, const Settings& st = {}) {
  const ConeDims& dims = f.cones;
  const Eigen::Index n = f.c.size();
  const Eigen::Index m = f.h.size();
  const Eigen::Index p = f.b.size();
  if (f.g.rows() != m || f.g.cols() != n || f.a.rows() != p || (p > 0 && f.a.cols() != n) ||
      dims.total() != m) {
    throw DimensionError("ipm::solve: inconsistent problem dimensions");
  }

  Result res;
  const double degree = dims.degree();
  const RVec e = cone_identity(dims);
  const double resx0 = std::max(1.0, f.c.norm());
  const double resy0 = std::max(1.0, f.b.norm());
  const double resz0 = std::max(1.0, f.h.norm());

  // Starting point from two least-squares solves with W = I.
  Scaling ident;
  ident.d = RVec::Ones(dims.nonneg);
  for (auto k : dims.soc) {
    RVec v = RVec::Zero(k);
    v(0) = 1.0;
    ident.soc.push_back({1.0, v});
  }
  for (auto d : dims.psd) {
    ident.psd.push_back({RMat::Identity(d, d), RMat::Identity(d, d), RVec::Ones(d)});
  }
  ident.lambda = e;

  RVec x, y, z, s;
  {
    const KktSystem kkt(f, ident);
    const KktSystem::Step primal = kkt.solve(RVec::Zero(n), f.b, f.h);
    x = primal.dx;
    s = -primal.dz;
    const KktSystem::Step dual = kkt.solve(-f.c, RVec::Zero(p), RVec::Zero(m));
    y = dual.dy;
    z = dual.dz;
  }
  auto shift_inside = [&](RVec& v) {
    const double t = -cone_min_eig(dims, v);
    if (t >= -1e-8 * std::max(1.0, v.norm())) v += (1.0 + t) * e;
  };
  shift_inside(s);
  shift_inside(z);
  double tau = 1.0;
  double kappa = 1.0;

  Result best;
  double best_merit = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int iter = 0; iter <= st.max_iters; ++iter) {
    res.iterations = iter;
    const RVec hrx = -(p > 0 ? RVec(f.a.transpose() * y) : RVec::Zero(n)) - f.g.transpose() * z;
    const RVec rx = -hrx + f.c * tau;  // A^T y + G^T z + c tau
    const RVec hry = p > 0 ? RVec(f.a * x) : RVec::Zero(0);
    const RVec ry = hry - f.b * tau;
    const RVec hrz = s + f.g * x;
    const RVec rz = hrz - f.h * tau;
    const double cx = f.c.dot(x);
    const double by = f.b.dot(y);
    const double hz = f.h.dot(z);
    const double rt = kappa + cx + by + hz;

    const double sz = s.dot(z);
    const double mu = (sz + kappa * tau) / (degree + 1.0);
    const double pcost = cx / tau;
    const double dcost = -(by + hz) / tau;
    const double gap = sz / (tau * tau);
    double relgap = std::numeric_limits<double>::infinity();
    if (pcost < 0.0) {
      relgap = gap / -pcost;
    } else if (dcost > 0.0) {
      relgap = gap / dcost;
    }
    const double pres = std::max(ry.size() > 0 ? ry.norm() / tau / resy0 : 0.0,
                                 rz.norm() / tau / resz0);
    const double dres = rx.norm() / tau / resx0;
    res.primal_residual = pres;
    res.dual_residual = dres;
    res.gap = gap;
    res.primal_objective = pcost;
    res.dual_objective = dcost;

    if (st.verbose) {
      std::fprintf(stderr, "%3d  pcost % .8e  dcost % .8e  gap %.2e  pres %.2e  dres %.2e  k/t %.2e\n",
                   iter, pcost, dcost, gap, pres, dres, kappa / tau);
    }
    auto finish = [&](Status status) {
      res.status = status;
      if (status == Status::kOptimal || status == Status::kIterationLimit ||
          status == Status::kNumericalFailure) {
        res.x = x / tau;
        res.y = y / tau;
        res.s = s / tau;
        res.z = z / tau;
      } else {
        res.x = x;
        res.y = y;
        res.s = s;
        res.z = z;
      }
      return res;
    };

    auto give_up = [&](Status status) {
      if (best_merit <= st.accept_tol) {
        best.status = Status::kOptimal;
        return best;
      }
      return finish(status);
    };

    if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(gap)) {
      return give_up(Status::kNumericalFailure);
    }
    if (pres <= st.feastol && dres <= st.feastol && (gap <= st.abstol || relgap <= st.reltol)) {
      return finish(Status::kOptimal);
    }
    const double merit =
        std::max({pres, dres, std::min(gap, relgap) * (st.accept_tol / st.accept_gap)});
    if (merit < 0.5 * best_merit || (merit < best_merit && best_merit > st.accept_tol)) {
      best_merit = merit;
      best = finish(Status::kOptimal);
      since_best = 0;
    } else if (++since_best >= st.stall_iters && best_merit <= st.accept_tol) {
      return give_up(Status::kNumericalFailure);
    }
    if (hz + by < 0.0) {
      const double pinf = hrx.norm() / resx0 / -(hz + by);
      if (pinf <= st.feastol) return finish(Status::kPrimalInfeasible);
    }
    if (cx < 0.0) {
      const double dinf =
          std::max(hry.size() > 0 ? hry.norm() / resy0 : 0.0, hrz.norm() / resz0) / -cx;
      if (dinf <= st.feastol) return finish(Status::kDualInfeasible);
    }
    if (iter == st.max_iters) return give_up(Status::kIterationLimit);

    const std::optional<Scaling> w = nt_scaling(dims, s, z);
    if (!w) return give_up(Status::kNumericalFailure);
    const KktSystem kkt(f, *w);
    const KktSystem::Step u1 = kkt.solve(-f.c, f.b, f.h);
    const double denom = -u1.wdz.squaredNorm() - kappa / tau;

    const RVec lam2 = jordan_product(dims, w->lambda, w->lambda);

    struct Dir {
      RVec dx, dy, dz, ds_scaled, dz_scaled;
      double dtau, dkappa;
    };
    auto direction = [&](const RVec& dcs, double dck, double sigma) {
      const RVec ls = jordan_solve(dims, *w, dcs);
      const RVec bz = -(1.0 - sigma) * rz - apply_scaling(dims, *w, Op::kWt, ls);
      const KktSystem::Step u2 = kkt.solve(-(1.0 - sigma) * rx, -(1.0 - sigma) * ry, bz);
      const double btau = -(1.0 - sigma) * rt - dck / tau;
      const double num = btau - (f.c.dot(u2.dx) + f.b.dot(u2.dy) + f.h.dot(u2.dz));
      Dir d;
      d.dtau = num / denom;
      d.dx = u2.dx + d.dtau * u1.dx;
      d.dy = u2.dy + d.dtau * u1.dy;
      d.dz = u2.dz + d.dtau * u1.dz;
      d.dz_scaled = u2.wdz + d.dtau * u1.wdz;
      d.ds_scaled = ls - d.dz_scaled;
      d.dkappa = (dck - kappa * d.dtau) / tau;
      return d;
    };
    auto step_to_boundary = [&](const Dir& d) {
      double a = std::min(max_step(dims, *w, d.ds_scaled), max_step(dims, *w, d.dz_scaled));
      if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
      if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
      return a;
    };

    const Dir aff = direction(-lam2, -kappa * tau, 0.0);
    const double a_aff = std::min(1.0, step_to_boundary(aff));
    const double sigma = std::pow(1.0 - a_aff, 3);

    const RVec corr = jordan_product(dims, aff.ds_scaled, aff.dz_scaled);
    const RVec dcs = -lam2 + sigma * mu * e - corr;
    const double dck = -kappa * tau + sigma * mu - aff.dkappa * aff.dtau;
    const Dir d = direction(dcs, dck, sigma);
    const double alpha = std::min(1.0, st.step_fraction * step_to_boundary(d));
    if (!std::isfinite(alpha) || !d.dx.allFinite() || !d.dz.allFinite()) {
      return give_up(Status::kNumericalFailure);
    }

    const RVec ds = apply_scaling(dims, *w, Op::kWt, d.ds_scaled);
    x += alpha * d.dx;
    y += alpha * d.dy;
    z += alpha * d.dz;
    s += alpha * ds;
    tau += alpha * d.dtau;
    kappa += alpha * d.dkappa;
  }
  res.status = Status::kIterationLimit;
  return res;
}

}  // namespace relaysec::ipm
