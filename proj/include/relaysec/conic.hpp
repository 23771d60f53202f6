#pragma once

// Solver-agnostic description of a real conic program: named variable
// blocks, a linear objective, affine equalities/inequalities, second-order
// cone rows and PSD blocks.
//
// Block coordinates:
//   scalar      1 value
//   vector      dim values
//   symmetric   upper triangle X(i,j), i <= j, column by column
//   hermitian   complex n x n Z: n diagonal reals, then (Re, Im) of Z(i,j)
//               for i < j, column by column. Its real matrix view is the
//               2n x 2n embedding [[Re Z, -Im Z], [Im Z, Re Z]].
//
// The factor-of-two relations between complex traces and embedded traces all
// live in this file (hermitian_trace_coeffs, embedded_hermitian,
// unembed_hermitian).

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "relaysec/linalg.hpp"

namespace relaysec {

enum class BlockKind { kScalar, kVector, kSymmetric, kHermitian };

inline Eigen::Index coordinate_count(BlockKind kind, Eigen::Index dim) {
  switch (kind) {
    case BlockKind::kScalar: return 1;
    case BlockKind::kVector: return dim;
    case BlockKind::kSymmetric: return dim * (dim + 1) / 2;
    case BlockKind::kHermitian: return dim * dim;
  }
  return 0;
}

struct Block {
  std::string name;
  BlockKind kind = BlockKind::kScalar;
  Eigen::Index dim = 1;
  bool psd = false;

  Eigen::Index coords() const { return coordinate_count(kind, dim); }
  /// Side length of the real matrix view (0 for scalar/vector blocks).
  Eigen::Index matrix_side() const {
    if (kind == BlockKind::kSymmetric) return dim;
    if (kind == BlockKind::kHermitian) return 2 * dim;
    return 0;
  }
};

// --------------------------------------------------------- coordinate maps

inline RMat symmetric_from_coords(const RVec& c, Eigen::Index d) {
  RMat x(d, d);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      x(i, j) = c(k);
      x(j, i) = c(k);
      ++k;
    }
  }
  return x;
}

inline RVec symmetric_to_coords(const RMat& x) {
  const Eigen::Index d = x.rows();
  RVec c(d * (d + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) c(k++) = 0.5 * (x(i, j) + x(j, i));
  }
  return c;
}

inline CMat hermitian_from_coords(const RVec& c, Eigen::Index n) {
  CMat z(n, n);
  for (Eigen::Index i = 0; i < n; ++i) z(i, i) = cplx(c(i), 0.0);
  Eigen::Index k = n;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) {
      z(i, j) = cplx(c(k), c(k + 1));
      z(j, i) = std::conj(z(i, j));
      k += 2;
    }
  }
  return z;
}

inline RVec hermitian_to_coords(const CMat& z_in) {
  const CMat z = symmetrize(z_in);
  const Eigen::Index n = z.rows();
  RVec c(n * n);
  for (Eigen::Index i = 0; i < n; ++i) c(i) = z(i, i).real();
  Eigen::Index k = n;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) {
      c(k) = z(i, j).real();
      c(k + 1) = z(i, j).imag();
      k += 2;
    }
  }
  return c;
}

/// Hermitian basis matrix for coordinate k of an n x n hermitian block.
inline CMat hermitian_basis(Eigen::Index n, Eigen::Index k) {
  RVec c = RVec::Zero(n * n);
  c(k) = 1.0;
  return hermitian_from_coords(c, n);
}

/// Coefficients a with a . coords(Z) = Re Tr(C Z) for every Hermitian Z.
inline RVec hermitian_trace_coeffs(const CMat& c) {
  require_square(c, "hermitian_trace_coeffs");
  const Eigen::Index n = c.rows();
  RVec a(n * n);
  for (Eigen::Index i = 0; i < n; ++i) a(i) = c(i, i).real();
  Eigen::Index k = n;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) {
      a(k) = (c(i, j) + c(j, i)).real();
      a(k + 1) = (c(i, j) - c(j, i)).imag();
      k += 2;
    }
  }
  return a;
}

/// Coefficients a with a . coords(X) = Tr(C X) for every symmetric X.
inline RVec symmetric_trace_coeffs(const RMat& c) {
  const Eigen::Index d = c.rows();
  RVec a(d * (d + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) a(k++) = i == j ? c(i, i) : c(i, j) + c(j, i);
  }
  return a;
}

/// Real-stacked coefficient matrix of an R-linear map f: Hermitian -> C^k,
/// found by probing f with the basis matrices. Row r < k holds Re f_r, row
/// k + r holds Im f_r.
inline RMat probe_hermitian_map(Eigen::Index n, Eigen::Index k,
                                const std::function<CVec(const CMat&)>& f) {
  RMat out(2 * k, n * n);
  for (Eigen::Index col = 0; col < n * n; ++col) {
    const CVec value = f(hermitian_basis(n, col));
    if (value.size() != k) throw DimensionError("probe_hermitian_map: output length changed");
    out.col(col) = real_embed_vec(value);
  }
  return out;
}

/// Embedded (2n x 2n real) view of a hermitian block's coordinates.
inline RMat embedded_hermitian(const RVec& coords, Eigen::Index n) {
  return real_embed(hermitian_from_coords(coords, n));
}

struct UnembedResult {
  CMat value;
  double structure_defect = 0.0;
};

/// Inverse of real_embed. A 2n x 2n symmetric X is mapped to the Hermitian
/// whose embedding is the average of X and its block-rotated copy; the
/// defect reports how far X was from embedding structure.
inline UnembedResult unembed_hermitian(const RMat& x) {
  if (x.rows() != x.cols() || x.rows() % 2 != 0) {
    throw DimensionError("unembed_hermitian: expected an even square matrix");
  }
  const Eigen::Index n = x.rows() / 2;
  const RMat a = x.topLeftCorner(n, n);
  const RMat b = x.topRightCorner(n, n);
  const RMat c = x.bottomLeftCorner(n, n);
  const RMat d = x.bottomRightCorner(n, n);
  UnembedResult out;
  const RMat re = 0.5 * (a + d);
  const RMat im = 0.5 * (c - b);
  out.value = CMat(n, n);
  out.value.real() = 0.5 * (re + re.transpose());
  out.value.imag() = 0.5 * (im - im.transpose());
  double defect = 0.0;
  if (n > 0) {
    defect = std::max({(a - d).cwiseAbs().maxCoeff(), (b + c).cwiseAbs().maxCoeff(),
                       (x - x.transpose()).cwiseAbs().maxCoeff()});
  }
  out.structure_defect = defect;
  return out;
}

// -------------------------------------------------------------- expressions

struct LinearExpr {
  std::vector<std::pair<int, RVec>> terms;  // (block index, coefficients)
  double constant = 0.0;

  LinearExpr& add(int block, const RVec& coeffs) {
    for (auto& [b, c] : terms) {
      if (b == block) {
        c += coeffs;
        return *this;
      }
    }
    terms.emplace_back(block, coeffs);
    return *this;
  }
  LinearExpr& add_constant(double v) {
    constant += v;
    return *this;
  }
};

class Assignment {
 public:
  Assignment() = default;
  Assignment(std::vector<Block> blocks, std::vector<RVec> values)
      : blocks_(std::move(blocks)), values_(std::move(values)) {}

  const std::vector<Block>& blocks() const { return blocks_; }
  const RVec& coords(int block) const { return values_.at(static_cast<std::size_t>(block)); }
  const RVec& coords(const std::string& name) const { return coords(index_of(name)); }

  int index_of(const std::string& name) const {
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      if (blocks_[k].name == name) return static_cast<int>(k);
    }
    throw std::out_of_range("no variable block named '" + name + "'");
  }

  double scalar(const std::string& name) const { return coords(name)(0); }

  /// Real matrix view: the symmetric matrix, or the 2n x 2n embedding.
  RMat matrix(const std::string& name) const {
    const int k = index_of(name);
    const Block& b = blocks_[static_cast<std::size_t>(k)];
    if (b.kind == BlockKind::kSymmetric) return symmetric_from_coords(coords(k), b.dim);
    if (b.kind == BlockKind::kHermitian) return embedded_hermitian(coords(k), b.dim);
    throw std::invalid_argument("block '" + name + "' has no matrix view");
  }

  CMat hermitian(const std::string& name) const {
    const int k = index_of(name);
    const Block& b = blocks_[static_cast<std::size_t>(k)];
    if (b.kind != BlockKind::kHermitian) {
      throw std::invalid_argument("block '" + name + "' is not hermitian");
    }
    return hermitian_from_coords(coords(k), b.dim);
  }

 private:
  std::vector<Block> blocks_;
  std::vector<RVec> values_;
};

struct SocConstraint {
  std::vector<LinearExpr> vector_part;  // ||(e_1, ..., e_k)|| <= bound
  LinearExpr bound;
};

class ConicProblem {
 public:
  int add_scalar(const std::string& name) { return add_block({name, BlockKind::kScalar, 1, false}); }
  int add_vector(const std::string& name, Eigen::Index n) {
    return add_block({name, BlockKind::kVector, n, false});
  }
  int add_symmetric(const std::string& name, Eigen::Index d, bool psd) {
    return add_block({name, BlockKind::kSymmetric, d, psd});
  }
  int add_hermitian(const std::string& name, Eigen::Index n, bool psd) {
    return add_block({name, BlockKind::kHermitian, n, psd});
  }

  void set_objective(LinearExpr e) {
    check_expr(e);
    objective_ = std::move(e);
  }
  /// e == 0
  void add_equality(LinearExpr e) {
    check_expr(e);
    equalities_.push_back(std::move(e));
  }
  /// e >= 0
  void add_inequality(LinearExpr e) {
    check_expr(e);
    inequalities_.push_back(std::move(e));
  }
  void add_soc(SocConstraint c) {
    check_expr(c.bound);
    for (const auto& e : c.vector_part) check_expr(e);
    socs_.push_back(std::move(c));
  }

  const std::vector<Block>& blocks() const { return blocks_; }
  const LinearExpr& objective() const { return objective_; }
  const std::vector<LinearExpr>& equalities() const { return equalities_; }
  const std::vector<LinearExpr>& inequalities() const { return inequalities_; }
  const std::vector<SocConstraint>& socs() const { return socs_; }

  int index_of(const std::string& name) const {
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      if (blocks_[k].name == name) return static_cast<int>(k);
    }
    throw std::out_of_range("no variable block named '" + name + "'");
  }

  std::vector<Block> psd_blocks() const {
    std::vector<Block> out;
    for (const auto& b : blocks_) {
      if (b.psd) out.push_back(b);
    }
    return out;
  }

  double evaluate(const LinearExpr& e, const Assignment& a) const {
    double v = e.constant;
    for (const auto& [block, coeffs] : e.terms) v += coeffs.dot(a.coords(block));
    return v;
  }

  double evaluate_objective(const Assignment& a) const { return evaluate(objective_, a); }

  /// Assignment with the given blocks set (others zero).
  Assignment make_assignment(const std::map<std::string, RVec>& values) const {
    std::vector<RVec> v;
    for (const auto& b : blocks_) {
      auto it = values.find(b.name);
      if (it == values.end()) {
        v.push_back(RVec::Zero(b.coords()));
      } else {
        if (it->second.size() != b.coords()) {
          throw DimensionError("make_assignment: wrong coordinate count for '" + b.name + "'");
        }
        v.push_back(it->second);
      }
    }
    return Assignment(blocks_, std::move(v));
  }

  /// Largest violation of any constraint (0 when feasible). PSD blocks count
  /// their most negative eigenvalue.
  double max_violation(const Assignment& a) const {
    double worst = 0.0;
    for (const auto& e : equalities_) worst = std::max(worst, std::abs(evaluate(e, a)));
    for (const auto& e : inequalities_) worst = std::max(worst, -evaluate(e, a));
    for (const auto& c : socs_) {
      double sq = 0.0;
      for (const auto& e : c.vector_part) sq += std::pow(evaluate(e, a), 2);
      worst = std::max(worst, std::sqrt(sq) - evaluate(c.bound, a));
    }
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      if (!blocks_[k].psd) continue;
      const RMat m = a.matrix(blocks_[k].name);
      Eigen::SelfAdjointEigenSolver<RMat> eig(m, Eigen::EigenvaluesOnly);
      worst = std::max(worst, -eig.eigenvalues()(0));
    }
    return worst;
  }

 private:
  int add_block(Block b) {
    for (const auto& existing : blocks_) {
      if (existing.name == b.name) {
        throw std::invalid_argument("duplicate variable block '" + b.name + "'");
      }
    }
    if (b.dim < 1) throw DimensionError("block '" + b.name + "' must have positive size");
    if (b.psd && b.kind != BlockKind::kSymmetric && b.kind != BlockKind::kHermitian) {
      throw std::invalid_argument("only matrix blocks can be PSD");
    }
    blocks_.push_back(std::move(b));
    return static_cast<int>(blocks_.size() - 1);
  }

  void check_expr(const LinearExpr& e) const {
    if (!std::isfinite(e.constant)) throw std::invalid_argument("non-finite constant");
    for (const auto& [block, coeffs] : e.terms) {
      if (block < 0 || static_cast<std::size_t>(block) >= blocks_.size()) {
        throw std::invalid_argument("expression references an undeclared block");
      }
      if (coeffs.size() != blocks_[static_cast<std::size_t>(block)].coords()) {
        throw DimensionError("coefficient length does not match block '" +
                             blocks_[static_cast<std::size_t>(block)].name + "'");
      }
      if (!coeffs.allFinite()) throw std::invalid_argument("non-finite coefficient");
    }
  }

  std::vector<Block> blocks_;
  LinearExpr objective_;
  std::vector<LinearExpr> equalities_;
  std::vector<LinearExpr> inequalities_;
  std::vector<SocConstraint> socs_;
};

}  // namespace relaysec
