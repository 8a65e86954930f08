#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

#include "riglab/norms.hpp"
#include "riglab/rigging.hpp"

namespace riglab {

struct FrameSymmetryError : std::invalid_argument {
  double defect;
  FrameSymmetryError(const std::string& msg, double d)
      : std::invalid_argument(msg + " (defect " + std::to_string(d) + ")"), defect(d) {}
};

struct Spectrum {
  Eigen::VectorXcd eigenvalues;
  Eigen::MatrixXcd basis;
  bool diagonalizable = false;
};

inline Spectrum spectrum(const Eigen::MatrixXd& M) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(M);
  Spectrum s;
  s.eigenvalues = es.eigenvalues();
  s.basis = es.eigenvectors();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(s.basis);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  const double residual =
      (M.cast<std::complex<double>>() * s.basis - s.basis * s.eigenvalues.asDiagonal())
          .norm();
  s.diagonalizable =
      smax > 0.0 && smin > 1e-12 * smax && residual <= 1e-8 * std::max(1.0, M.norm());
  return s;
}

/// Principal square root of M = W^{-1/2} S W^{1/2} with S symmetric PSD:
/// symmetrize in the W frame, eigendecompose, clamp tiny negatives, map back.
/// The result has nonnegative spectrum and S*S = M up to roundoff.
inline Eigen::MatrixXd sqrt_psd_like(const Eigen::MatrixXd& M, const Eigen::MatrixXd& W) {
  const Eigen::Index n = M.rows();
  if (M.cols() != n || W.rows() != n || W.cols() != n)
    throw std::invalid_argument("sqrt_psd_like: shape mismatch");
  const Eigen::MatrixXd Whalf = detail::spd_power(W, 0.5);
  const Eigen::MatrixXd Whalfinv = detail::spd_power(W, -0.5);
  const Eigen::MatrixXd S = Whalf * M * Whalfinv;
  const double sym_defect = (S - S.transpose()).norm();
  if (sym_defect > 1e-8 * std::max(1.0, S.norm()))
    throw FrameSymmetryError("sqrt_psd_like: matrix is not symmetric in the given frame",
                             sym_defect);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
  Eigen::VectorXd d = es.eigenvalues();
  const double dmax = d.maxCoeff();
  if (d.minCoeff() < -1e-8 * std::max(1.0, std::abs(dmax)))
    throw FrameSymmetryError("sqrt_psd_like: spectrum is not nonnegative", -d.minCoeff());
  const double clamp = 1e-12 * std::max(dmax, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) d[i] = d[i] <= clamp ? 0.0 : std::sqrt(d[i]);
  const Eigen::MatrixXd root =
      es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
  return Whalfinv * root * Whalf;
}

namespace detail {

// Pade numerator/denominator pairs for exp, degrees 3..13 (Higham 2005).
// On exit exp(A) ~ (V - U)^{-1} (V + U).
inline void exp_pade3(const Eigen::MatrixXd& A, Eigen::MatrixXd& U, Eigen::MatrixXd& V) {
  static const double b[] = {120., 60., 12., 1.};
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(A.rows(), A.cols());
  const Eigen::MatrixXd A2 = A * A;
  U = A * (b[3] * A2 + b[1] * I);
  V = b[2] * A2 + b[0] * I;
}

inline void exp_pade5(const Eigen::MatrixXd& A, Eigen::MatrixXd& U, Eigen::MatrixXd& V) {
  static const double b[] = {30240., 15120., 3360., 420., 30., 1.};
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(A.rows(), A.cols());
  const Eigen::MatrixXd A2 = A * A;
  const Eigen::MatrixXd A4 = A2 * A2;
  U = A * (b[5] * A4 + b[3] * A2 + b[1] * I);
  V = b[4] * A4 + b[2] * A2 + b[0] * I;
}

inline void exp_pade7(const Eigen::MatrixXd& A, Eigen::MatrixXd& U, Eigen::MatrixXd& V) {
  static const double b[] = {17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.};
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(A.rows(), A.cols());
  const Eigen::MatrixXd A2 = A * A;
  const Eigen::MatrixXd A4 = A2 * A2;
  const Eigen::MatrixXd A6 = A4 * A2;
  U = A * (b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
  V = b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
}

inline void exp_pade9(const Eigen::MatrixXd& A, Eigen::MatrixXd& U, Eigen::MatrixXd& V) {
  static const double b[] = {17643225600., 8821612800., 2075673600., 302702400., 30270240.,
                             2162160.,     110880.,     3960.,       90.,        1.};
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(A.rows(), A.cols());
  const Eigen::MatrixXd A2 = A * A;
  const Eigen::MatrixXd A4 = A2 * A2;
  const Eigen::MatrixXd A6 = A4 * A2;
  const Eigen::MatrixXd A8 = A6 * A2;
  U = A * (b[9] * A8 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
  V = b[8] * A8 + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
}

inline void exp_pade13(const Eigen::MatrixXd& A, Eigen::MatrixXd& U, Eigen::MatrixXd& V) {
  static const double b[] = {64764752532480000., 32382376266240000., 7771770303897600.,
                             1187353796428800.,  129060195264000.,   10559470521600.,
                             670442572800.,      33522128640.,       1323241920.,
                             40840800.,          960960.,            16380.,
                             182.,               1.};
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(A.rows(), A.cols());
  const Eigen::MatrixXd A2 = A * A;
  const Eigen::MatrixXd A4 = A2 * A2;
  const Eigen::MatrixXd A6 = A4 * A2;
  U = A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 +
           b[1] * I);
  V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 +
      b[0] * I;
}

}  // namespace detail

/// exp(t M) by scaling and squaring with diagonal Pade approximants
/// (degree chosen from the 1-norm; scaling by exact powers of two).
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& M, double t = 1.0) {
  if (M.rows() != M.cols()) throw std::invalid_argument("expm: matrix must be square");
  Eigen::MatrixXd A = t * M;
  if (!A.allFinite()) throw std::overflow_error("expm: non-finite scaled input");
  const double l1 = A.cwiseAbs().colwise().sum().maxCoeff();

  Eigen::MatrixXd U, V;
  int squarings = 0;
  if (l1 < 1.495585217958292e-2) {
    detail::exp_pade3(A, U, V);
  } else if (l1 < 2.539398330063230e-1) {
    detail::exp_pade5(A, U, V);
  } else if (l1 < 9.504178996162932e-1) {
    detail::exp_pade7(A, U, V);
  } else if (l1 < 2.097847961257068e+0) {
    detail::exp_pade9(A, U, V);
  } else {
    const double theta13 = 5.371920351148152;
    std::frexp(l1 / theta13, &squarings);
    if (squarings < 0) squarings = 0;
    if (squarings > 60) throw std::overflow_error("expm: t*||M|| too large");
    A *= std::ldexp(1.0, -squarings);
    detail::exp_pade13(A, U, V);
  }
  Eigen::MatrixXd R = (V - U).partialPivLu().solve(V + U);
  for (int i = 0; i < squarings; ++i) R = R * R;
  if (!R.allFinite()) throw std::overflow_error("expm: overflow in result");
  return R;
}

/// (lambda I - M)^{-1}, with the solve residual checked to 1e-10 * n.
inline Eigen::MatrixXd resolvent(const Eigen::MatrixXd& M, double lambda) {
  const Eigen::Index n = M.rows();
  if (M.cols() != n) throw std::invalid_argument("resolvent: matrix must be square");
  const Eigen::MatrixXd K = lambda * Eigen::MatrixXd::Identity(n, n) - M;
  const Eigen::MatrixXd R = K.partialPivLu().solve(Eigen::MatrixXd::Identity(n, n));
  const double residual = (K * R - Eigen::MatrixXd::Identity(n, n)).norm();
  if (!R.allFinite() || residual > 1e-10 * static_cast<double>(n))
    throw std::runtime_error("resolvent: lambda = " + std::to_string(lambda) +
                             " is in (or too close to) the spectrum, residual " +
                             std::to_string(residual));
  return R;
}

/// Moore-Penrose pseudo-inverse; singular values below 1e-12 * sigma_max are
/// treated as zero.
inline Eigen::MatrixXd pinv(const Eigen::MatrixXd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = 1e-12 * (s.size() ? s.maxCoeff() : 0.0);
  Eigen::VectorXd sinv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > cutoff) sinv[i] = 1.0 / s[i];
  return svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose();
}

struct OperatorNorm {
  double value = 0.0;
  bool exact = true;  // false when the value is an ascent lower-bound estimate
};

namespace detail {

// A space tag resolves to either a quadratic norm (both Hilbert layers, and
// the Banach layer when p = 2) or a p-norm with coordinate weights.
struct SpaceRep {
  bool quadratic = false;
  Eigen::MatrixXd Whalf, Whalfinv;  // quadratic only
  BanachNorm bn;                    // p-norm only
};

inline SpaceRep space_rep(Space s, const Rigging& r) {
  SpaceRep rep;
  if (s == Space::H1) {
    rep.quadratic = true;
    rep.Whalf = r.W1_half;
    rep.Whalfinv = r.W1_half_inv;
    return rep;
  }
  if (s == Space::H2) {
    rep.quadratic = true;
    rep.Whalf = r.W2_half;
    rep.Whalfinv = r.W2_half_inv;
    return rep;
  }
  if (s != Space::B) throw std::invalid_argument("opnorm: unknown space tag");
  if (r.b_norm.exponent() == 2.0) {
    rep.quadratic = true;
    Eigen::VectorXd d = Eigen::VectorXd::Ones(r.n);
    if (r.b_norm.has_weights()) d = r.b_norm.weights;
    rep.Whalf = d.asDiagonal();
    rep.Whalfinv = d.cwiseInverse().asDiagonal();
    return rep;
  }
  rep.bn = r.b_norm;
  return rep;
}

inline double eval_space_norm(const SpaceRep& rep, const Eigen::VectorXd& x) {
  if (rep.quadratic) return (rep.Whalf * x).norm();
  return rep.bn.value(x);
}

inline double eval_space_dual(const SpaceRep& rep, const Eigen::VectorXd& f) {
  if (rep.quadratic) return (rep.Whalfinv * f).norm();
  return rep.bn.dual_value(f);
}

inline NormFunction space_norm_function(const SpaceRep& rep) {
  if (rep.quadratic) {
    const Eigen::MatrixXd W = rep.Whalf * rep.Whalf;
    return quadratic_norm_function(W);
  }
  return norm_function(rep.bn);
}

}  // namespace detail

/// Induced operator norm between the spaces of a rigging. Exact closed forms:
/// quadratic -> quadratic (largest singular value of the frame matrix),
/// source l1-type (ball vertices: scaled column maxima, any target),
/// target sup-type (dual norms of rows, any source). Anything else is a
/// power-ascent lower bound with 32 restarts, flagged inexact.
inline OperatorNorm opnorm(const Eigen::MatrixXd& M, Space from, Space to,
                           const Rigging& r) {
  if (from == Space::BDual || to == Space::BDual)
    throw std::invalid_argument("opnorm: unknown space tag");
  if (M.rows() != r.n || M.cols() != r.n)
    throw std::invalid_argument("opnorm: matrix shape mismatch");
  const detail::SpaceRep f = detail::space_rep(from, r);
  const detail::SpaceRep g = detail::space_rep(to, r);

  if (f.quadratic && g.quadratic) {
    const Eigen::MatrixXd F = g.Whalf * M * f.Whalfinv;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(F);
    return {svd.singularValues().size() ? svd.singularValues()(0) : 0.0, true};
  }
  if (!f.quadratic && f.bn.exponent() == 1.0) {
    double best = 0.0;
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      best = std::max(best, detail::eval_space_norm(g, M.col(j)) / f.bn.weight(j));
    return {best, true};
  }
  if (!g.quadratic && std::isinf(g.bn.exponent())) {
    double best = 0.0;
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      const Eigen::VectorXd row = M.row(i).transpose();
      best = std::max(best, g.bn.weight(i) * detail::eval_space_dual(f, row));
    }
    return {best, true};
  }

  NormFunction target = detail::space_norm_function(g);
  NormFunction source = detail::space_norm_function(f);
  NormFunction image{[&M, target](const Eigen::VectorXd& x) { return target.value(M * x); },
                     [&M, target](const Eigen::VectorXd& x) {
                       return Eigen::VectorXd(M.transpose() * target.grad(M * x));
                     }};
  const double est = maximize_norm_ratio(image, source, r.n, 32, 200,
                                         detail::kConstantSeed ^ 0x6F706E6FULL);
  return {est, false};
}

}  // namespace riglab
