#pragma once

// Dense complex linear algebra used throughout the beamforming pipeline.
//
// Conventions: matrices are Eigen column-major, vec() stacks columns, and
// every Hermitian input is symmetrized as (A + A^H)/2 after checking that the
// asymmetry is below kHermitianTol (relative to the largest entry).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace relaysec {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotHermitianError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kHermitianTol = 1e-9;
inline constexpr double kPsdTol = 1e-8;

inline std::string dims_of(const CMat& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

inline void require_square(const CMat& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw DimensionError(std::string(what) + ": expected a square matrix, got " +
                         dims_of(a));
  }
}

inline bool all_finite(const CMat& a) {
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    if (!std::isfinite(a.data()[k].real()) || !std::isfinite(a.data()[k].imag())) {
      return false;
    }
  }
  return true;
}

/// Column-major stacking of `a` into a single column.
inline CVec vec(const CMat& a) {
  return Eigen::Map<const CVec>(a.data(), a.size());
}

/// Inverse of vec() for a rows x cols target.
inline CMat unvec(const CVec& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) {
    throw DimensionError("unvec: length " + std::to_string(v.size()) +
                         " does not match " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  return Eigen::Map<const CMat>(v.data(), rows, cols);
}

inline CMat kron(const CMat& a, const CMat& b) {
  CMat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// Permutation stored as a row -> column index map. As a dense matrix it has
/// a single 1 in every row and column.
class PermutationMatrix {
 public:
  PermutationMatrix() = default;
  explicit PermutationMatrix(std::vector<std::size_t> mapping)
      : mapping_(std::move(mapping)) {
    std::vector<bool> seen(mapping_.size(), false);
    for (std::size_t col : mapping_) {
      if (col >= mapping_.size() || seen[col]) {
        throw std::invalid_argument("PermutationMatrix: mapping is not a bijection");
      }
      seen[col] = true;
    }
  }

  std::size_t dimension() const { return mapping_.size(); }
  const std::vector<std::size_t>& mapping() const { return mapping_; }

  /// (P v)[row] = v[mapping[row]].
  CVec apply(const CVec& v) const {
    if (static_cast<std::size_t>(v.size()) != mapping_.size()) {
      throw DimensionError("PermutationMatrix::apply: length mismatch");
    }
    CVec out(v.size());
    for (std::size_t row = 0; row < mapping_.size(); ++row) {
      out(static_cast<Eigen::Index>(row)) = v(static_cast<Eigen::Index>(mapping_[row]));
    }
    return out;
  }

  RMat to_dense() const {
    const auto n = static_cast<Eigen::Index>(mapping_.size());
    RMat out = RMat::Zero(n, n);
    for (std::size_t row = 0; row < mapping_.size(); ++row) {
      out(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(mapping_[row])) = 1.0;
    }
    return out;
  }

 private:
  std::vector<std::size_t> mapping_;
};

/// The 0/1 matrix T with vec(conj(F) (x) F) = T vec(f f^H), f = vec(F), for
/// any p x q matrix F.
///
/// Entry conj(F(i1,j1)) * F(i2,j2) sits at row (i1 p + i2), column (j1 q + j2)
/// of the Kronecker product and at row (j2 p + i2), column (j1 p + i1) of
/// f f^H; the map pairs the two column-major positions.
inline PermutationMatrix build_tf(std::size_t p, std::size_t q) {
  if (p == 0 || q == 0) {
    throw DimensionError("build_tf: dimensions must be positive");
  }
  const std::size_t pq = p * q;
  std::vector<std::size_t> mapping(pq * pq);
  for (std::size_t j1 = 0; j1 < q; ++j1) {
    for (std::size_t j2 = 0; j2 < q; ++j2) {
      for (std::size_t i1 = 0; i1 < p; ++i1) {
        for (std::size_t i2 = 0; i2 < p; ++i2) {
          const std::size_t kron_pos = (j1 * q + j2) * (p * p) + (i1 * p + i2);
          const std::size_t outer_pos = (j1 * p + i1) * pq + (j2 * p + i2);
          mapping[kron_pos] = outer_pos;
        }
      }
    }
  }
  return PermutationMatrix(std::move(mapping));
}

/// Partial map P_y(z) = sum_{k,l} y(l,k) z_{kl}, where z_{kl} are the n x n
/// blocks of z. Tr(z (y (x) x)) = Tr(P_y(z) x) for every n x n x.
inline CMat kron_partial(const CMat& z, const CMat& y) {
  require_square(z, "kron_partial");
  require_square(y, "kron_partial");
  const Eigen::Index m = y.rows();
  if (m == 0 || z.rows() % m != 0) {
    throw DimensionError("kron_partial: " + dims_of(z) + " is not conformable with " +
                         dims_of(y));
  }
  const Eigen::Index n = z.rows() / m;
  CMat out = CMat::Zero(n, n);
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index l = 0; l < m; ++l) {
      if (y(l, k) != cplx(0.0, 0.0)) {
        out += y(l, k) * z.block(k * n, l * n, n, n);
      }
    }
  }
  return out;
}

/// Block traces T(k,l) = Tr(z_{kl} c), with z_{kl} the n x n blocks of z and
/// c n x n. Tr(z (y (x) c)) = Tr(y T) for every outer factor y.
inline CMat block_trace(const CMat& z, const CMat& c) {
  require_square(z, "block_trace");
  require_square(c, "block_trace");
  const Eigen::Index n = c.rows();
  if (n == 0 || z.rows() % n != 0) {
    throw DimensionError("block_trace: " + dims_of(z) + " is not conformable with " +
                         dims_of(c));
  }
  const Eigen::Index m = z.rows() / n;
  CMat out(m, m);
  for (Eigen::Index l = 0; l < m; ++l) {
    for (Eigen::Index k = 0; k < m; ++k) {
      out(k, l) = (z.block(k * n, l * n, n, n) * c).trace();
    }
  }
  return out;
}

/// Tr(z (y (x) x)) evaluated through kron_partial, so the x dependence is a
/// plain trace pairing.
inline cplx trace_kron(const CMat& z, const CMat& y, const CMat& x) {
  require_square(x, "trace_kron");
  require_square(y, "trace_kron");
  if (z.rows() != y.rows() * x.rows() || z.cols() != z.rows()) {
    throw DimensionError("trace_kron: z is " + dims_of(z) + ", expected " +
                         std::to_string(y.rows() * x.rows()) + " square");
  }
  return (kron_partial(z, y) * x).trace();
}

enum class Sense { kMax, kMin };

struct BallExtreme {
  double value = 0.0;
  CVec argument;
};

/// Extreme of Re(x^H y) over the ball |x| <= delta.
inline BallExtreme ball_lin_extreme(const CVec& y, double delta, Sense sense) {
  if (!(delta >= 0.0)) {
    throw std::invalid_argument("ball_lin_extreme: delta must be nonnegative");
  }
  const double ny = y.norm();
  BallExtreme out;
  if (ny == 0.0) {
    out.argument = CVec::Zero(y.size());
    return out;
  }
  const double sign = sense == Sense::kMax ? 1.0 : -1.0;
  out.argument = (sign * delta / ny) * y;
  out.value = sign * delta * ny;
  return out;
}

/// (a + a^H)/2, rejecting inputs whose asymmetry exceeds the tolerance.
inline CMat symmetrize(const CMat& a, double tol = kHermitianTol) {
  require_square(a, "symmetrize");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double defect = a.size() == 0 ? 0.0 : (a - a.adjoint()).cwiseAbs().maxCoeff();
  if (defect > tol * scale) {
    throw NotHermitianError("matrix is not Hermitian (asymmetry " +
                            std::to_string(defect) + ")");
  }
  return 0.5 * (a + a.adjoint());
}

struct HermitianEig {
  RVec values;   // descending
  CMat vectors;  // columns match values
};

inline HermitianEig hermitian_eig(const CMat& a) {
  require_square(a, "hermitian_eig");
  const CMat h = symmetrize(a);
  Eigen::SelfAdjointEigenSolver<CMat> solver(h);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("hermitian_eig: eigen-decomposition failed");
  }
  const Eigen::Index n = h.rows();
  HermitianEig out{RVec(n), CMat(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = solver.eigenvalues()(n - 1 - k);
    out.vectors.col(k) = solver.eigenvectors().col(n - 1 - k);
  }
  return out;
}

/// S with S S^H = a for a Hermitian PSD `a`; tiny negative eigenvalues are
/// clamped to zero.
inline CMat psd_factor(const CMat& a) {
  const HermitianEig eig = hermitian_eig(a);
  if (eig.values.size() == 0) return CMat(0, 0);
  const double top = std::max(1.0, eig.values(0));
  const double bottom = eig.values(eig.values.size() - 1);
  if (bottom < -kPsdTol * top) {
    throw NumericalError("psd_factor: matrix has eigenvalue " + std::to_string(bottom) +
                         ", not positive semidefinite");
  }
  const RVec roots = eig.values.cwiseMax(0.0).cwiseSqrt();
  return eig.vectors * roots.asDiagonal();
}

/// [[Re a, -Im a], [Im a, Re a]] for Hermitian a.
inline RMat real_embed(const CMat& a) {
  const CMat h = symmetrize(a);
  const Eigen::Index n = h.rows();
  RMat out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = h.real();
  out.topRightCorner(n, n) = -h.imag();
  out.bottomLeftCorner(n, n) = h.imag();
  out.bottomRightCorner(n, n) = h.real();
  return out;
}

inline RVec real_embed_vec(const CVec& u) {
  RVec out(2 * u.size());
  out.head(u.size()) = u.real();
  out.tail(u.size()) = u.imag();
  return out;
}

}  // namespace relaysec
