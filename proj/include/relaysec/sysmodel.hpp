#pragma once

// Two-hop amplify-and-forward relay link with one legitimate receiver (Bob)
// and one eavesdropper whose relay channel is known only up to a norm-bounded
// error. Powers and SNRs are provided in direct (q, W) form and in lifted
// (Q = q q^H, Z = vec(W) vec(W)^H) form.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "relaysec/linalg.hpp"
#include "relaysec/random.hpp"

namespace relaysec {

class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

struct SystemConfig {
  int n_src = 3;    // N
  int n_relay = 3;  // M
  double sigma2_r = 1.0;
  double sigma2_b = 1.0;
  double sigma2_e = 1.0;
  double r_b = 2.0;  // Bob SNR floor, linear
  double r_e = 1.0;  // eavesdropper SNR cap, linear
  double eps = 0.01;

  void validate() const {
    if (n_src < 1 || n_relay < 1) throw InvalidConfig("antenna counts must be >= 1");
    if (!(sigma2_r > 0.0) || !(sigma2_b > 0.0) || !(sigma2_e > 0.0)) {
      throw InvalidConfig("noise variances must be > 0");
    }
    if (!(r_b > 0.0) || !(r_e > 0.0)) throw InvalidConfig("SNR thresholds must be > 0");
    if (!(eps >= 0.0) || !std::isfinite(eps)) {
      throw InvalidConfig("uncertainty radius must be >= 0");
    }
  }
};

struct ChannelSet {
  CMat h;        // M x N, source -> relay
  CMat g_b;      // 1 x M, relay -> Bob
  CMat g_e_hat;  // 1 x M, estimated relay -> eavesdropper
};

struct BeamformingPair {
  CVec q;      // N
  CMat w_mat;  // M x M

  CVec w() const { return vec(w_mat); }
};

struct LiftedPair {
  CMat q_big;  // N x N
  CMat z_big;  // M^2 x M^2
};

struct EveError {
  CMat delta;  // 1 x M
};

inline LiftedPair lift(const BeamformingPair& pair) {
  const CVec w = pair.w();
  return {pair.q * pair.q.adjoint(), w * w.adjoint()};
}

inline void check_channels(const ChannelSet& ch, const SystemConfig& cfg) {
  const Eigen::Index m = cfg.n_relay;
  const Eigen::Index n = cfg.n_src;
  if (ch.h.rows() != m || ch.h.cols() != n || ch.g_b.rows() != 1 || ch.g_b.cols() != m ||
      ch.g_e_hat.rows() != 1 || ch.g_e_hat.cols() != m) {
    throw DimensionError("channel set does not match an " + std::to_string(m) +
                         "-antenna relay and " + std::to_string(n) + "-antenna source");
  }
}

inline void check_pair(const BeamformingPair& pair, const SystemConfig& cfg) {
  if (pair.q.size() != cfg.n_src || pair.w_mat.rows() != cfg.n_relay ||
      pair.w_mat.cols() != cfg.n_relay) {
    throw DimensionError("beamforming pair does not match the system dimensions");
  }
}

inline void check_lifted(const LiftedPair& lp, const SystemConfig& cfg) {
  const Eigen::Index m2 = static_cast<Eigen::Index>(cfg.n_relay) * cfg.n_relay;
  if (lp.q_big.rows() != cfg.n_src || lp.q_big.cols() != cfg.n_src ||
      lp.z_big.rows() != m2 || lp.z_big.cols() != m2) {
    throw DimensionError("lifted pair does not match the system dimensions");
  }
}

// ---------------------------------------------------------------- sampling

inline ChannelSet sample_channels(const SystemConfig& cfg, Rng& rng) {
  ChannelSet ch;
  ch.h = complex_normal(rng, cfg.n_relay, cfg.n_src);
  ch.g_b = complex_normal(rng, 1, cfg.n_relay);
  ch.g_e_hat = complex_normal(rng, 1, cfg.n_relay);
  return ch;
}

inline ChannelSet sample_channels(const SystemConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return sample_channels(cfg, rng);
}

/// Uniform draw from the complex eps-ball in C^M (a real 2M-ball).
inline EveError sample_eve_error(const SystemConfig& cfg, Rng& rng) {
  EveError err{CMat::Zero(1, cfg.n_relay)};
  if (cfg.eps == 0.0) return err;
  CMat dir = complex_normal(rng, 1, cfg.n_relay);
  double norm = dir.norm();
  while (norm == 0.0) {
    dir = complex_normal(rng, 1, cfg.n_relay);
    norm = dir.norm();
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double radius = cfg.eps * std::pow(unif(rng), 1.0 / (2.0 * cfg.n_relay));
  err.delta = (radius / norm) * dir;
  return err;
}

inline EveError sample_eve_error(const SystemConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return sample_eve_error(cfg, rng);
}

// ------------------------------------------------------------------ powers

/// g^H g for a 1 x M channel row.
inline CMat gram(const CMat& g) { return g.adjoint() * g; }

// With w = vec(W) (column stacking), |g W x|^2 summed over a covariance X is
// Tr(W X W^H g^H g) = w^H (X^T (x) g^H g) w, so every lifted quadratic form
// below carries the covariance transposed in the outer Kronecker slot.

/// X^T (x) g^H g.
inline CMat lifted_form(const CMat& x, const CMat& g) { return kron(x.transpose(), gram(g)); }

inline double source_power(const LiftedPair& lp) { return lp.q_big.trace().real(); }
inline double source_power(const BeamformingPair& pair) { return pair.q.squaredNorm(); }

inline double relay_power(const BeamformingPair& pair, const ChannelSet& ch,
                          const SystemConfig& cfg) {
  check_channels(ch, cfg);
  check_pair(pair, cfg);
  return (pair.w_mat * ch.h * pair.q).squaredNorm() +
         cfg.sigma2_r * pair.w_mat.squaredNorm();
}

/// Relay covariance seen through W: H Q H^H + sigma_r^2 I.
inline CMat relay_input_cov(const CMat& q_big, const ChannelSet& ch, const SystemConfig& cfg) {
  return ch.h * q_big * ch.h.adjoint() +
         cfg.sigma2_r * CMat::Identity(cfg.n_relay, cfg.n_relay);
}

inline double relay_power(const LiftedPair& lp, const ChannelSet& ch,
                          const SystemConfig& cfg) {
  check_channels(ch, cfg);
  check_lifted(lp, cfg);
  const CMat eye = CMat::Identity(cfg.n_relay, cfg.n_relay);
  return trace_kron(lp.z_big, relay_input_cov(lp.q_big, ch, cfg).transpose(), eye).real();
}

inline double total_power(const BeamformingPair& pair, const ChannelSet& ch,
                          const SystemConfig& cfg) {
  return source_power(pair) + relay_power(pair, ch, cfg);
}

inline double total_power(const LiftedPair& lp, const ChannelSet& ch, const SystemConfig& cfg) {
  return source_power(lp) + relay_power(lp, ch, cfg);
}

// -------------------------------------------------------------------- SNRs

inline double snr_bob(const BeamformingPair& pair, const ChannelSet& ch,
                      const SystemConfig& cfg) {
  check_channels(ch, cfg);
  check_pair(pair, cfg);
  const CMat gw = ch.g_b * pair.w_mat;
  const double num = std::norm((gw * ch.h * pair.q)(0, 0));
  const double den = cfg.sigma2_r * gw.squaredNorm() + cfg.sigma2_b;
  return num / den;
}

inline double snr_bob(const LiftedPair& lp, const ChannelSet& ch, const SystemConfig& cfg) {
  check_channels(ch, cfg);
  check_lifted(lp, cfg);
  const CMat gb = gram(ch.g_b);
  const CMat hqh = ch.h * lp.q_big * ch.h.adjoint();
  const double num = trace_kron(lp.z_big, hqh.transpose(), gb).real();
  const double den = cfg.sigma2_r * block_trace(lp.z_big, gb).trace().real() + cfg.sigma2_b;
  return num / den;
}

struct EveSnrParts {
  double numerator = 0.0;
  double denominator = 0.0;
  double snr() const { return numerator / denominator; }
};

/// Exact eavesdropper SNR terms at g_e = g_e_hat + delta, direct form only.
inline EveSnrParts eve_snr_parts(const BeamformingPair& pair, const ChannelSet& ch,
                                 const SystemConfig& cfg, const EveError& err) {
  check_channels(ch, cfg);
  check_pair(pair, cfg);
  if (err.delta.rows() != 1 || err.delta.cols() != cfg.n_relay) {
    throw DimensionError("eavesdropper error must be 1 x M");
  }
  const CMat gw = (ch.g_e_hat + err.delta) * pair.w_mat;
  return {std::norm((gw * ch.h * pair.q)(0, 0)),
          cfg.sigma2_r * gw.squaredNorm() + cfg.sigma2_e};
}

inline double snr_eve_exact(const BeamformingPair& pair, const ChannelSet& ch,
                            const SystemConfig& cfg, const EveError& err) {
  return eve_snr_parts(pair, ch, cfg, err).snr();
}

// ------------------------------------------------- worst-case bound terms

/// Linear operator Z -> (vec(X)^T (x) (conj(g) (x) I_M)) T_f vec(Z), the
/// vector whose norm bounds the first-order error term. For Z = w w^H it
/// equals W X W^H g^H.
class LeakOperator {
 public:
  LeakOperator(const CMat& x, const CMat& g_bar)
      : m_(g_bar.cols()), tf_(build_tf(static_cast<std::size_t>(g_bar.cols()),
                                       static_cast<std::size_t>(g_bar.cols()))) {
    require_square(x, "LeakOperator");
    if (g_bar.rows() != 1 || x.rows() != m_) {
      throw DimensionError("LeakOperator: expected 1 x M channel and M x M matrix");
    }
    const CMat left = kron(g_bar.conjugate(), CMat::Identity(m_, m_));
    coeff_ = kron(vec(x).transpose(), left);
  }

  Eigen::Index output_size() const { return m_; }
  Eigen::Index input_dim() const { return m_ * m_; }

  CVec apply(const CMat& z) const {
    if (z.rows() != m_ * m_ || z.cols() != m_ * m_) {
      throw DimensionError("LeakOperator::apply: Z must be M^2 x M^2");
    }
    return coeff_ * tf_.apply(vec(z));
  }

 private:
  Eigen::Index m_;
  PermutationMatrix tf_;
  CMat coeff_;  // M x M^4
};

/// u(Q, Z): the numerator's error-coupling vector.
inline CVec numerator_leak(const CMat& q_big, const CMat& z_big, const ChannelSet& ch) {
  return LeakOperator(ch.h * q_big * ch.h.adjoint(), ch.g_e_hat).apply(z_big);
}

/// v(Z): the denominator's error-coupling vector (without the sigma_r^2 factor).
inline CVec denominator_leak(const CMat& z_big, const ChannelSet& ch) {
  const Eigen::Index m = ch.g_e_hat.cols();
  return LeakOperator(CMat::Identity(m, m), ch.g_e_hat).apply(z_big);
}

/// First-order upper bound on the eavesdropper's received signal power over
/// the error ball.
inline double eve_num_ub(const LiftedPair& lp, const ChannelSet& ch, const SystemConfig& cfg) {
  check_channels(ch, cfg);
  check_lifted(lp, cfg);
  const CMat hqh = ch.h * lp.q_big * ch.h.adjoint();
  const double nominal = trace_kron(lp.z_big, hqh.transpose(), gram(ch.g_e_hat)).real();
  if (cfg.eps == 0.0) return nominal;
  return nominal + 2.0 * cfg.eps * numerator_leak(lp.q_big, lp.z_big, ch).norm();
}

/// Lower bound on the eavesdropper's noise-plus-forwarded-noise power over
/// the error ball, sigma_e^2 included.
inline double eve_den_lb(const LiftedPair& lp, const ChannelSet& ch, const SystemConfig& cfg) {
  check_channels(ch, cfg);
  check_lifted(lp, cfg);
  const double nominal = cfg.sigma2_r * block_trace(lp.z_big, gram(ch.g_e_hat)).trace().real();
  const double leak =
      cfg.eps == 0.0 ? 0.0 : 2.0 * cfg.eps * cfg.sigma2_r * denominator_leak(lp.z_big, ch).norm();
  return nominal - leak + cfg.sigma2_e;
}

/// A(Q) = (H Q H^H)^T (x) g_b^H g_b - r_b sigma_r^2 I (x) g_b^H g_b.
inline CMat matrix_a(const LiftedPair& lp, const ChannelSet& ch, const SystemConfig& cfg) {
  check_channels(ch, cfg);
  const CMat hqh = ch.h * lp.q_big * ch.h.adjoint();
  const CMat eye = CMat::Identity(cfg.n_relay, cfg.n_relay);
  return lifted_form(hqh, ch.g_b) - cfg.r_b * lifted_form(cfg.sigma2_r * eye, ch.g_b);
}

/// B(Q) = r_e sigma_r^2 I (x) g_e^H g_e - (H Q H^H)^T (x) g_e^H g_e.
inline CMat matrix_b(const LiftedPair& lp, const ChannelSet& ch, const SystemConfig& cfg) {
  check_channels(ch, cfg);
  const CMat hqh = ch.h * lp.q_big * ch.h.adjoint();
  const CMat eye = CMat::Identity(cfg.n_relay, cfg.n_relay);
  return cfg.r_e * lifted_form(cfg.sigma2_r * eye, ch.g_e_hat) - lifted_form(hqh, ch.g_e_hat);
}

enum class BoundTarget { kNumerator, kDenominator };

/// Closed-form extremal error: maximizes the numerator's linear term or
/// minimizes the denominator's. Always on the boundary of the ball.
inline EveError worst_delta(const BeamformingPair& pair, const ChannelSet& ch,
                            const SystemConfig& cfg, BoundTarget target) {
  check_channels(ch, cfg);
  check_pair(pair, cfg);
  if (!(cfg.eps > 0.0)) throw std::invalid_argument("worst_delta: eps must be > 0");
  const CMat& w = pair.w_mat;
  CVec y;
  Sense sense;
  if (target == BoundTarget::kNumerator) {
    const CVec whq = w * ch.h * pair.q;
    y = whq * (whq.adjoint() * ch.g_e_hat.adjoint())(0, 0);
    sense = Sense::kMax;
  } else {
    y = cfg.sigma2_r * (w * w.adjoint() * ch.g_e_hat.adjoint());
    sense = Sense::kMin;
  }
  // Re(delta y) = Re(x^H y) with x = delta^H.
  BallExtreme ext = ball_lin_extreme(y, cfg.eps, sense);
  if (y.norm() == 0.0) {
    ext.argument = CVec::Zero(cfg.n_relay);
    ext.argument(0) = cfg.eps;
  }
  return {ext.argument.adjoint()};
}

}  // namespace relaysec
