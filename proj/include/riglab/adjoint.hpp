#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <utility>

#include "riglab/matfun.hpp"
#include "riglab/report.hpp"
#include "riglab/rigging.hpp"
#include "riglab/rng.hpp"

namespace riglab {

/// A bounded operator on the Banach layer: a dense matrix acting on
/// coordinates, together with the rigging it lives on.
struct Operator {
  Rigging rig;
  Eigen::MatrixXd M;

  Operator(Rigging r, Eigen::MatrixXd m) : rig(std::move(r)), M(std::move(m)) {
    if (M.rows() != rig.n || M.cols() != rig.n)
      throw std::invalid_argument("Operator: matrix shape must match the rigging");
    if (!M.allFinite()) throw std::invalid_argument("Operator: non-finite entries");
  }

  int n() const { return rig.n; }
};

/// The embedding adjoint: J_1^{-1} A'_1 J_2 restricted to coordinates, i.e.
/// W1^{-1} A^T W2. Reduces to the transpose when W1 = W2 = I.
inline Operator adjoint(const Operator& A) {
  Eigen::MatrixXd Mstar = A.rig.W1_llt.solve(A.M.transpose() * A.rig.W2);
  return Operator(A.rig, std::move(Mstar));
}

struct GramPair {
  Operator astar_a;   // A* A
  Operator inv_i_plus;  // (I + A* A)^{-1}
};

inline GramPair gram(const Operator& A) {
  const Eigen::Index n = A.n();
  Operator astar = adjoint(A);
  Eigen::MatrixXd G = astar.M * A.M;
  const Eigen::MatrixXd IG = Eigen::MatrixXd::Identity(n, n) + G;
  Eigen::MatrixXd inv = IG.partialPivLu().solve(Eigen::MatrixXd::Identity(n, n));
  const double residual = (IG * inv - Eigen::MatrixXd::Identity(n, n)).norm();
  if (!inv.allFinite() || residual > 1e-10 * static_cast<double>(n))
    throw std::runtime_error("gram: inversion of I + A*A failed, residual " +
                             std::to_string(residual));
  return GramPair{Operator(A.rig, std::move(G)), Operator(A.rig, std::move(inv))};
}

// Executable content of the von Neumann-style theorem for the embedding
// adjoint. Asserted: accretivity of A*A in the H1 duality pairing (which
// equals (||x||_B/||x||_H1)^2 * ||Ax||_H2^2 exactly) and of AA* in the H2
// duality pairing (the y^T W1^{-1} y form); realness and nonnegativity of the
// spectrum of A*A; H1-self-adjointness; the residual of (I + A*A)^{-1}.
// Measured only: the star-residual ||(A*A)* - A*A||_F, the H2-symmetry defect
// of A*A, and the minimum of the literal H2 duality pairing of A*A, which is
// indefinite when W1 and W2 have different coordinate spread.
inline PropertyReport check_vonneumann(const Operator& A, long n_x, std::uint64_t seed) {
  if (n_x < 1) throw std::invalid_argument("check_vonneumann: n_x must be >= 1");
  const Rigging& r = A.rig;
  const Eigen::Index n = r.n;
  PropertyReport rep;
  rep.name = "vonneumann";
  rep.seed = seed;
  rep.trials = n_x;

  const GramPair g = gram(A);
  const Eigen::MatrixXd& G = g.astar_a.M;
  const Eigen::MatrixXd AAstar = A.M * adjoint(A).M;
  const double normA = A.M.norm();
  const double normG = G.norm();

  SplitMix64 rng(seed);
  WorstCase accretive_h1, accretive_gram, pairing_identity, selfadjoint_h1;
  double literal_min = 0.0;
  json literal_witness;
  bool literal_seen = false;

  for (long t = 0; t < n_x; ++t) {
    const Eigen::VectorXd x = rng.normal_vector(n);
    const Eigen::VectorXd y = rng.normal_vector(n);
    const double nb = norm(r, x, Space::B);
    if (nb == 0.0) continue;
    const double nh1 = norm(r, x, Space::H1);
    const double nh2 = norm(r, x, Space::H2);
    const double scale = std::max(1e-300, normA * normA * nb * nb);
    const json wit{{"x", to_json_array(x)}};

    // <A*Ax, phi^s_x> with the H1-associated duality map; equals
    // (nb/nh1)^2 * ||Ax||_{H2}^2, which doubles as an oracle for the
    // adjoint formula itself.
    const double ratio1 = nb * nb / (nh1 * nh1);
    const double pair_h1 = (G * x).dot(ratio1 * (r.W1 * x));
    accretive_h1.update(-pair_h1 / scale, wit);
    const Eigen::VectorXd Ax = A.M * x;
    const double oracle = ratio1 * Ax.dot(r.W2 * Ax);
    pairing_identity.update(std::abs(pair_h1 - oracle) / scale, wit);

    // <AA*x, phi^s_x> with the H2 map; equals (nb/nh2)^2 * y^T W1^{-1} y,
    // y = A^T W2 x.
    const double ratio2 = nb * nb / (nh2 * nh2);
    const double pair_gram = (AAstar * x).dot(ratio2 * (r.W2 * x));
    accretive_gram.update(-pair_gram / scale, wit);

    // Literal H2 pairing of A*A: indefinite in weighted models, report only.
    const double pair_literal = (G * x).dot(ratio2 * (r.W2 * x)) / scale;
    if (!literal_seen || pair_literal < literal_min) {
      literal_min = pair_literal;
      literal_witness = wit;
      literal_seen = true;
    }

    // (A*A x, y)_H1 = (x, A*A y)_H1.
    const double sscale =
        std::max(1e-300, normG * r.W1.norm() * x.norm() * y.norm());
    const double d = std::abs((G * x).dot(r.W1 * y) - x.dot(r.W1 * (G * y)));
    selfadjoint_h1.update(d / sscale, json{{"x", to_json_array(x)}, {"y", to_json_array(y)}});
  }

  rep.asserted.push_back(accretive_h1.as_asserted("accretive_h1_duality", 1e-10));
  rep.asserted.push_back(pairing_identity.as_asserted("h1_pairing_identity", 1e-10));
  rep.asserted.push_back(accretive_gram.as_asserted("accretive_gram_form", 1e-10));
  rep.asserted.push_back(selfadjoint_h1.as_asserted("selfadjoint_h1", 1e-10));

  // Spectrum of A*A: similar to a symmetric PSD matrix, so real and >= 0.
  Eigen::EigenSolver<Eigen::MatrixXd> es(G);
  const double spec_scale = std::max(1.0, normG);
  double max_imag = 0.0, min_real = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    max_imag = std::max(max_imag, std::abs(es.eigenvalues()[i].imag()));
    min_real = std::min(min_real, es.eigenvalues()[i].real());
  }
  rep.asserted.push_back(
      AssertedProperty{"spectrum_real", max_imag <= 1e-8 * spec_scale, max_imag / spec_scale,
                       json()});
  rep.asserted.push_back(AssertedProperty{"spectrum_nonnegative",
                                          min_real >= -1e-8 * spec_scale,
                                          -min_real / spec_scale, json()});

  const Eigen::MatrixXd IG = Eigen::MatrixXd::Identity(n, n) + G;
  const double inv_residual =
      (IG * g.inv_i_plus.M - Eigen::MatrixXd::Identity(n, n)).norm();
  rep.asserted.push_back(AssertedProperty{
      "inverse_residual", inv_residual <= 1e-10 * static_cast<double>(n), inv_residual,
      json()});

  const Eigen::MatrixXd Gstar = adjoint(g.astar_a).M;
  rep.measured.push_back(MeasuredQuantity{"star_residual", (Gstar - G).norm(), json()});
  rep.measured.push_back(
      MeasuredQuantity{"h2_symmetry_defect", (r.W2 * G - G.transpose() * r.W2).norm(), json()});
  rep.measured.push_back(MeasuredQuantity{"literal_h2_duality_pairing_min", literal_min,
                                          literal_witness});
  return rep;
}

/// Lax-style bound: an H2-symmetric operator satisfies
/// ||A||_{H2} <= ||A||_B. Requires W2 M = M^T W2 within 1e-12; rejected with
/// the measured symmetry defect otherwise. When the induced B-norm is only
/// estimable (general p), the comparison is reported instead of asserted.
inline PropertyReport check_lax(const Operator& A) {
  const Rigging& r = A.rig;
  const double sym_defect = (r.W2 * A.M - A.M.transpose() * r.W2).norm();
  if (sym_defect > 1e-12 * std::max(1.0, (r.W2 * A.M).norm()))
    throw std::invalid_argument("check_lax: operator is not H2-symmetric, defect " +
                                std::to_string(sym_defect));
  PropertyReport rep;
  rep.name = "lax";
  rep.trials = 1;

  // Exact for H2-symmetric A: the induced H2 norm is the spectral radius.
  const Eigen::MatrixXd S = r.W2_half * A.M * r.W2_half_inv;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
  const double h2_norm = es.eigenvalues().cwiseAbs().maxCoeff();

  const OperatorNorm b = opnorm(A.M, Space::B, Space::B, r);
  rep.measured.push_back(MeasuredQuantity{"h2_norm", h2_norm, json()});
  rep.measured.push_back(MeasuredQuantity{"b_norm", b.value, json{{"exact", b.exact}}});
  const double defect = (h2_norm - b.value) / std::max(1e-300, b.value);
  if (b.exact) {
    rep.asserted.push_back(
        AssertedProperty{"h2_norm_le_b_norm", h2_norm <= (1.0 + 1e-10) * b.value, defect,
                         json()});
  } else {
    rep.measured.push_back(MeasuredQuantity{"h2_over_b_estimate", defect, json()});
  }
  return rep;
}

/// Norm chain of the H2-extension bound: records (||A||_{H2}^2, ||A*A||_B,
/// ||A||_B^2) and the constant C = ||A||_{H2}^2 / ||A||_B^2; asserts only
/// finiteness. Whether ||A||_{H2}^2 <= ||A*A||_B held is reported, since that
/// step needs H2-self-adjointness of A*A.
inline PropertyReport check_h2_bound(const Operator& A) {
  const Rigging& r = A.rig;
  PropertyReport rep;
  rep.name = "h2_bound";
  rep.trials = 1;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(r.W2_half * A.M * r.W2_half_inv);
  const double h2 = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  const GramPair g = gram(A);
  const OperatorNorm gb = opnorm(g.astar_a.M, Space::B, Space::B, r);
  const OperatorNorm ab = opnorm(A.M, Space::B, Space::B, r);

  const bool finite = std::isfinite(h2) && std::isfinite(gb.value) && std::isfinite(ab.value);
  rep.asserted.push_back(AssertedProperty{"finite_norms", finite, finite ? 0.0 : kInf, json()});
  rep.measured.push_back(MeasuredQuantity{"h2_norm_sq", h2 * h2, json()});
  rep.measured.push_back(
      MeasuredQuantity{"gram_b_norm", gb.value, json{{"exact", gb.exact}}});
  rep.measured.push_back(MeasuredQuantity{"b_norm_sq", ab.value * ab.value,
                                          json{{"exact", ab.exact}}});
  rep.measured.push_back(MeasuredQuantity{
      "ratio_C", ab.value > 0.0 ? h2 * h2 / (ab.value * ab.value) : 0.0, json()});
  rep.measured.push_back(MeasuredQuantity{
      "lax_chain_holds", h2 * h2 <= gb.value * (1.0 + 1e-10) ? 1.0 : 0.0, json()});
  return rep;
}

/// Subspace orthogonality through the duality map: U _|_ V iff
/// <y, phi^s_x> = 0 for all x in U, y in V, which reduces to V^T W2 U = 0.
/// Empty subspaces are orthogonal by vacuity.
inline bool is_orthogonal(const Rigging& r, const Eigen::MatrixXd& U,
                          const Eigen::MatrixXd& V) {
  if (U.cols() == 0 || V.cols() == 0) return true;
  if (U.rows() != r.n || V.rows() != r.n)
    throw std::invalid_argument("is_orthogonal: column length mismatch");
  const double defect = (V.transpose() * r.W2 * U).norm();
  const double scale = std::max(1e-300, U.norm() * V.norm() * r.W2.norm());
  return defect <= 1e-12 * scale;
}

}  // namespace riglab
