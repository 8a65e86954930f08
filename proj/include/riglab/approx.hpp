#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "riglab/adjoint.hpp"
#include "riglab/matfun.hpp"
#include "riglab/report.hpp"

namespace riglab {

namespace detail {

/// Pseudo-inverse of a frame-symmetric matrix, taken in its own frame:
/// pinv_W(M) = W^{-1/2} pinv(W^{1/2} M W^{-1/2}) W^{1/2}.
inline Eigen::MatrixXd frame_pinv(const Eigen::MatrixXd& M, const Eigen::MatrixXd& Whalf,
                                  const Eigen::MatrixXd& Whalfinv, int* rank = nullptr) {
  const Eigen::MatrixXd S = Whalf * M * Whalfinv;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
  Eigen::VectorXd d = es.eigenvalues();
  const double cutoff = 1e-12 * d.cwiseAbs().maxCoeff();
  int rk = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (std::abs(d[i]) > cutoff) {
      d[i] = 1.0 / d[i];
      ++rk;
    } else {
      d[i] = 0.0;
    }
  }
  if (rank) *rank = rk;
  const Eigen::MatrixXd P = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
  return Whalfinv * P * Whalf;
}

}  // namespace detail

// Polar data of A: T = -(A*A)^{1/2} (W1 frame), Tbar = -(AA*)^{1/2} (W2
// frame), and the partial isometry U with A = U T. U is an isometry from the
// H1 norm on range(T) to the H2 norm, so opnorm(U, H1->H2) = 1 for A != 0.
struct PolarData {
  Operator T;
  Operator Tbar;
  Operator U;
  int rank_T = 0;
  int rank_Tbar = 0;
};

inline PolarData polar_factors(const Operator& A) {
  const Rigging& r = A.rig;
  const GramPair g = gram(A);
  const Eigen::MatrixXd AAstar = A.M * adjoint(A).M;

  Eigen::MatrixXd T = -sqrt_psd_like(g.astar_a.M, r.W1);
  Eigen::MatrixXd Tbar = -sqrt_psd_like(AAstar, r.W2);

  int rank_T = 0, rank_Tbar = 0;
  const Eigen::MatrixXd Tpinv = detail::frame_pinv(T, r.W1_half, r.W1_half_inv, &rank_T);
  {
    Eigen::MatrixXd dummy = detail::frame_pinv(Tbar, r.W2_half, r.W2_half_inv, &rank_Tbar);
    (void)dummy;
  }
  Eigen::MatrixXd U = A.M * Tpinv;

  const double factor_defect = (U * T - A.M).norm();
  if (factor_defect > 1e-8 * std::max(1.0, A.M.norm()))
    throw std::runtime_error("polar_factors: U*T does not reproduce A, defect " +
                             std::to_string(factor_defect));
  if (A.M.norm() > 0.0) {
    const OperatorNorm un = opnorm(U, Space::H1, Space::H2, r);
    if (std::abs(un.value - 1.0) > 1e-8)
      throw std::runtime_error("polar_factors: U is not an H1->H2 partial isometry, norm " +
                               std::to_string(un.value));
  }
  return PolarData{Operator(r, std::move(T)), Operator(r, std::move(Tbar)),
                   Operator(r, std::move(U)), rank_T, rank_Tbar};
}

/// Resolvent-smoothed approximation of A through its modulus:
/// A_lambda = lambda A R(lambda, T) with T = -(A*A)^{1/2}. Always defined for
/// lambda > 0 since T has nonpositive spectrum. Satisfies
/// A_lambda = lambda^2 U R(lambda, T) - lambda U and
/// lambda A R(lambda, T) = lambda R(lambda, Tbar) A.
inline Operator yosida_general(const Operator& A, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("yosida_general: lambda must be > 0");
  const PolarData p = polar_factors(A);
  const Eigen::MatrixXd R = resolvent(p.T.M, lambda);
  return Operator(A.rig, lambda * A.M * R);
}

/// Classical resolvent smoothing A_lambda = lambda A R(lambda, A); defined
/// only above the spectral abscissa of A.
inline Operator yosida_classical(const Operator& A, double lambda) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(A.M);
  double abscissa = -kInf;
  for (Eigen::Index i = 0; i < A.n(); ++i)
    abscissa = std::max(abscissa, es.eigenvalues()[i].real());
  if (!(lambda > abscissa))
    throw std::invalid_argument("yosida_classical: lambda = " + std::to_string(lambda) +
                                " does not exceed the spectral abscissa " +
                                std::to_string(abscissa));
  const Eigen::MatrixXd R = resolvent(A.M, lambda);
  return Operator(A.rig, lambda * A.M * R);
}

struct ConvergenceRow {
  double lambda = 0.0;
  double approx_err = 0.0;    // max_x ||A_lambda x - A x||_B / ||A x||_B
  double t = 0.0;
  double semigroup_err = 0.0; // max_x ||exp(t A_lambda) x - exp(t A) x||_B
  double expm_norm_B = 0.0;   // induced B-norm of exp(t A_lambda)
};

// One row per (lambda, t) cell, lambdas strictly increasing. `checks`
// carries the rate assertions (monotone decrease, halving ratios) and the
// measured semigroup growth factors.
struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  PropertyReport checks;

  static std::string csv_header() { return "lambda,approx_err,t,semigroup_err,expm_norm_B"; }

  std::string to_csv() const {
    std::ostringstream out;
    out << csv_header() << "\n";
    char buf[512];
    for (const auto& row : rows) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g", row.lambda,
                    row.approx_err, row.t, row.semigroup_err, row.expm_norm_B);
      out << buf << "\n";
    }
    return out.str();
  }

  json to_json() const {
    json jrows = json::array();
    for (const auto& row : rows)
      jrows.push_back(json{{"lambda", row.lambda},
                           {"approx_err", row.approx_err},
                           {"t", row.t},
                           {"semigroup_err", row.semigroup_err},
                           {"expm_norm_B", row.expm_norm_B}});
    return json{{"rows", jrows}, {"checks", checks.to_json()}};
  }
};

/// Sweeps the approximator over a lambda grid: records approximation and
/// semigroup errors over the sample vectors and the induced B-norm of each
/// exp(t A_lambda). Asserts that both error families are nonincreasing in
/// lambda (5% slack) and that the approximation error halves with lambda
/// (ratio in [0.35, 0.65] over the last three doubling pairs). The semigroup
/// growth factor ||exp(t A_lambda)||_B is measured, never asserted: it
/// exceeds 1 already for nilpotent A on the identity rigging.
inline ConvergenceTable semigroup_experiment(const Operator& A,
                                             const std::vector<double>& lambdas,
                                             const std::vector<double>& ts,
                                             const std::vector<Eigen::VectorXd>& xs) {
  if (lambdas.empty()) throw std::invalid_argument("semigroup_experiment: empty lambda grid");
  if (ts.empty()) throw std::invalid_argument("semigroup_experiment: empty time grid");
  if (xs.empty()) throw std::invalid_argument("semigroup_experiment: no sample vectors");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0))
      throw std::invalid_argument("semigroup_experiment: lambdas must be positive");
    if (i > 0 && !(lambdas[i] > lambdas[i - 1]))
      throw std::invalid_argument("semigroup_experiment: lambdas must be strictly increasing");
  }
  for (double t : ts)
    if (!(t >= 0.0)) throw std::invalid_argument("semigroup_experiment: times must be >= 0");
  for (const auto& x : xs)
    if (x.size() != A.n()) throw std::invalid_argument("semigroup_experiment: vector length");

  const Rigging& r = A.rig;
  const PolarData polar = polar_factors(A);

  std::vector<Eigen::MatrixXd> expA(ts.size());
  for (std::size_t k = 0; k < ts.size(); ++k) expA[k] = expm(A.M, ts[k]);

  ConvergenceTable table;
  table.checks.name = "semigroup";
  table.checks.trials = static_cast<long>(lambdas.size() * ts.size());

  std::vector<double> approx_errs, semigroup_errs;
  WorstCase growth;
  for (double lambda : lambdas) {
    const Eigen::MatrixXd R = resolvent(polar.T.M, lambda);
    const Eigen::MatrixXd Al = lambda * A.M * R;

    double aerr = 0.0;
    for (const auto& x : xs) {
      const double den = norm(r, A.M * x, Space::B);
      const double num = norm(r, Al * x - A.M * x, Space::B);
      if (den > 0.0)
        aerr = std::max(aerr, num / den);
      else if (num > 0.0)
        aerr = kInf;
    }
    approx_errs.push_back(aerr);

    double serr_lambda = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
      const Eigen::MatrixXd E = expm(Al, ts[k]);
      double serr = 0.0;
      for (const auto& x : xs) serr = std::max(serr, norm(r, E * x - expA[k] * x, Space::B));
      serr_lambda = std::max(serr_lambda, serr);
      const double nu = opnorm(E, Space::B, Space::B, r).value;
      growth.update(nu, json{{"lambda", lambda}, {"t", ts[k]}});
      table.rows.push_back(ConvergenceRow{lambda, aerr, ts[k], serr, nu});
    }
    semigroup_errs.push_back(serr_lambda);
  }

  const double err_floor = 1e-14 * std::max(1.0, A.M.norm());
  auto monotone = [&](const std::vector<double>& e, const char* prop) {
    WorstCase w;
    for (std::size_t i = 0; i + 1 < e.size(); ++i) {
      if (e[i] <= err_floor && e[i + 1] <= err_floor) continue;
      const double excess = (e[i + 1] - 1.05 * e[i]) / std::max(e[i], err_floor);
      w.update(excess, json{{"lambda", lambdas[i + 1]}});
    }
    table.checks.asserted.push_back(w.as_asserted(prop, 0.0));
  };
  monotone(approx_errs, "approx_err_nonincreasing");
  monotone(semigroup_errs, "semigroup_err_nonincreasing");

  // Halving ratios over doubling-spaced lambdas; only the last three count.
  std::vector<std::size_t> doubling;
  for (std::size_t i = 0; i + 1 < lambdas.size(); ++i)
    if (std::abs(lambdas[i + 1] - 2.0 * lambdas[i]) <= 1e-9 * lambdas[i]) doubling.push_back(i);
  WorstCase halving;
  const std::size_t first = doubling.size() > 3 ? doubling.size() - 3 : 0;
  for (std::size_t k = first; k < doubling.size(); ++k) {
    const std::size_t i = doubling[k];
    if (approx_errs[i] <= err_floor) continue;
    const double ratio = approx_errs[i + 1] / approx_errs[i];
    const double excess = std::max(0.35 - ratio, ratio - 0.65);
    halving.update(excess, json{{"lambda", lambdas[i]}, {"ratio", ratio}});
  }
  table.checks.asserted.push_back(halving.as_asserted("approx_err_halving_ratio", 0.0));

  table.checks.measured.push_back(
      MeasuredQuantity{"max_expm_norm_B", growth.defect(), growth.witness()});
  return table;
}

/// Distance between operators through the bounded transform
/// A0 = A (I + A*A)^{-1/2}: d(A, B) = ||A0 - B0||_B.
inline Eigen::MatrixXd bounded_transform(const Operator& A) {
  const Rigging& r = A.rig;
  const GramPair g = gram(A);
  const Eigen::MatrixXd IG =
      Eigen::MatrixXd::Identity(r.n, r.n) + g.astar_a.M;
  const Eigen::MatrixXd root = sqrt_psd_like(IG, r.W1);
  // A0 = A root^{-1}: solve X root = A.
  return root.transpose().partialPivLu().solve(A.M.transpose()).transpose();
}

inline double operator_metric(const Operator& A, const Operator& B) {
  if (!same_rigging(A.rig, B.rig))
    throw std::invalid_argument("operator_metric: operators live on different riggings");
  const Eigen::MatrixXd A0 = bounded_transform(A);
  const Eigen::MatrixXd B0 = bounded_transform(B);
  return opnorm(A0 - B0, Space::B, Space::B, A.rig).value;
}

}  // namespace riglab
