#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "riglab/report.hpp"
#include "riglab/rigging.hpp"
#include "riglab/rng.hpp"

namespace riglab {

// A biorthogonal system {x_i, x_i^*} with unit B-norm vectors and unit
// dual-norm functionals, built from the common eigenbasis of W2 and T12.
struct MBasis {
  Rigging rig;
  Eigen::MatrixXd vectors;      // columns x_i
  Eigen::MatrixXd functionals;  // rows x_i^*

  json to_json() const {
    return json{{"rigging", rig.to_json()},
                {"vectors", to_json_array(vectors)},
                {"functionals", to_json_array(functionals)}};
  }
};

namespace detail {

/// Common orthonormal eigenbasis of two commuting symmetric matrices:
/// eigendecompose the first, then rediagonalize the second inside each
/// eigenspace. Throws if the pair does not commute.
inline Eigen::MatrixXd joint_eigenbasis(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const Eigen::Index n = A.rows();
  const double comm_scale = std::max(1.0, A.norm() * B.norm());
  if ((A * B - B * A).norm() > 1e-10 * comm_scale)
    throw std::invalid_argument("joint_eigenbasis: matrices do not commute");
  if (is_exactly_diagonal(A) && is_exactly_diagonal(B))
    return Eigen::MatrixXd::Identity(n, n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esA(A);
  Eigen::MatrixXd Q = esA.eigenvectors();
  const Eigen::VectorXd d = esA.eigenvalues();
  const double spread = std::max(1e-300, d.cwiseAbs().maxCoeff());

  Eigen::Index start = 0;
  while (start < n) {
    Eigen::Index end = start + 1;
    while (end < n && std::abs(d[end] - d[start]) <= 1e-8 * spread) ++end;
    if (end - start > 1) {
      const Eigen::MatrixXd Qg = Q.middleCols(start, end - start);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esB(Qg.transpose() * B * Qg);
      Q.middleCols(start, end - start) = Qg * esB.eigenvectors();
    }
    start = end;
  }

  auto offdiag = [](const Eigen::MatrixXd& M) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < M.rows(); ++i)
      for (Eigen::Index j = 0; j < M.cols(); ++j)
        if (i != j) m = std::max(m, std::abs(M(i, j)));
    return m;
  };
  if (offdiag(Q.transpose() * A * Q) > 1e-10 * std::max(1.0, A.norm()) ||
      offdiag(Q.transpose() * B * Q) > 1e-10 * std::max(1.0, B.norm()))
    throw std::invalid_argument("joint_eigenbasis: no common eigenbasis found");
  return Q;
}

}  // namespace detail

/// Unit-norm biorthogonal basis: x_i = v_i / ||v_i||_B for the common
/// eigenvectors v_i of (W2, T12), and x_i^* = J_2(x_i) / ||x_i||_{H2}^2.
/// Requires a rigging whose weights share an eigenbasis (diagonal models
/// always do); rejects non-commuting riggings.
inline MBasis markushevich(const Rigging& r) {
  const Eigen::MatrixXd V = detail::joint_eigenbasis(r.W2, r.T12);
  MBasis b;
  b.rig = r;
  b.vectors.resize(r.n, r.n);
  b.functionals.resize(r.n, r.n);
  for (int i = 0; i < r.n; ++i) {
    Eigen::VectorXd v = V.col(i);
    const double nb = norm(r, v, Space::B);
    v /= nb;
    b.vectors.col(i) = v;
    const Eigen::VectorXd jv = r.W2 * v;
    b.functionals.row(i) = (jv / v.dot(jv)).transpose();
  }
  return b;
}

/// Verifies the basis contract: biorthogonality, unit primal and dual norms
/// (dual norms via the closed-form dual exponent), monotone partial sums
/// under the B-norm on random coefficient vectors, full rank of both
/// families, and the dual pairing bound |<y, x_n^*>| <= ||y||_B.
inline PropertyReport check_basis(const MBasis& b, long coeff_trials = 200,
                                  std::uint64_t seed = 0x4d426173ULL) {
  const Rigging& r = b.rig;
  const Eigen::Index n = r.n;
  PropertyReport rep;
  rep.name = "basis";
  rep.seed = seed;
  rep.trials = coeff_trials;

  WorstCase biorth, unit_primal, unit_dual;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double pair = b.functionals.row(j).dot(b.vectors.col(i));
      const double want = i == j ? 1.0 : 0.0;
      biorth.update(std::abs(pair - want), json{{"i", i}, {"j", j}});
    }
    unit_primal.update(std::abs(norm(r, b.vectors.col(i), Space::B) - 1.0), json{{"i", i}});
    const Eigen::VectorXd f = b.functionals.row(i).transpose();
    unit_dual.update(std::abs(norm(r, f, Space::BDual) - 1.0), json{{"i", i}});
  }
  rep.asserted.push_back(biorth.as_asserted("biorthogonality", 1e-12));
  rep.asserted.push_back(unit_primal.as_asserted("unit_b_norms", 1e-12));
  rep.asserted.push_back(unit_dual.as_asserted("unit_dual_norms", 1e-12));

  SplitMix64 rng(seed);
  WorstCase monotone, dual_bound;
  for (long t = 0; t < coeff_trials; ++t) {
    const Eigen::VectorXd a = rng.normal_vector(n);
    std::vector<double> partial(static_cast<std::size_t>(n));
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    for (Eigen::Index m = 0; m < n; ++m) {
      s += a[m] * b.vectors.col(m);
      partial[static_cast<std::size_t>(m)] = norm(r, s, Space::B);
    }
    for (Eigen::Index m = 0; m + 1 < n; ++m)
      for (Eigen::Index k = m + 1; k < n; ++k)
        monotone.update(partial[static_cast<std::size_t>(m)] -
                            partial[static_cast<std::size_t>(k)],
                        json{{"a", to_json_array(a)}, {"m", m + 1}, {"k", k + 1}});

    const double ynorm = partial[static_cast<std::size_t>(n - 1)];
    if (ynorm > 0.0) {
      const Eigen::VectorXd y = s / ynorm;
      for (Eigen::Index i = 0; i < n; ++i)
        dual_bound.update(std::abs(b.functionals.row(i).dot(y)) - 1.0,
                          json{{"a", to_json_array(a)}, {"n", i + 1}});
    }
  }
  rep.asserted.push_back(monotone.as_asserted("monotone_partial_sums", 1e-12));
  rep.asserted.push_back(dual_bound.as_asserted("dual_pairing_bound", 1e-12));

  auto rank_of = [](const Eigen::MatrixXd& M) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return Eigen::Index(0);
    Eigen::Index rk = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s[i] > 1e-12 * s(0)) ++rk;
    return rk;
  };
  const bool full_v = rank_of(b.vectors) == n;
  const bool full_f = rank_of(b.functionals) == n;
  rep.asserted.push_back(
      AssertedProperty{"full_rank_vectors", full_v, full_v ? 0.0 : 1.0, json()});
  rep.asserted.push_back(
      AssertedProperty{"full_rank_functionals", full_f, full_f ? 0.0 : 1.0, json()});
  return rep;
}

}  // namespace riglab
