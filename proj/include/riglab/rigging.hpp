#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "riglab/norms.hpp"
#include "riglab/report.hpp"
#include "riglab/rng.hpp"

namespace riglab {

enum class Space { B, H1, H2, BDual };

inline std::string space_name(Space s) {
  switch (s) {
    case Space::B: return "B";
    case Space::H1: return "H1";
    case Space::H2: return "H2";
    case Space::BDual: return "B-dual";
  }
  return "?";
}

/// A functional acting by the coordinate pairing <x, f> = sum_i x_i f_i.
struct Functional {
  Eigen::VectorXd coords;
  double operator()(const Eigen::VectorXd& x) const { return coords.dot(x); }
};

namespace detail {

inline bool is_exactly_diagonal(const Eigen::MatrixXd& M) {
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      if (i != j && M(i, j) != 0.0) return false;
  return true;
}

inline void require_spd(const Eigen::MatrixXd& M, const std::string& what) {
  if (M.rows() != M.cols()) throw std::invalid_argument(what + ": matrix must be square");
  if (!M.allFinite()) throw std::invalid_argument(what + ": non-finite entries");
  const double scale = std::max(1.0, M.norm());
  if ((M - M.transpose()).norm() > 1e-12 * scale)
    throw std::invalid_argument(what + ": matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument(what + ": matrix must be positive definite");
}

/// W^exponent for SPD W via symmetric eigendecomposition; entrywise (exact)
/// for diagonal W with exponent +-1/2 or -1.
inline Eigen::MatrixXd spd_power(const Eigen::MatrixXd& W, double exponent) {
  const Eigen::Index n = W.rows();
  if (is_exactly_diagonal(W)) {
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (exponent == 0.5)
        R(i, i) = std::sqrt(W(i, i));
      else if (exponent == -0.5)
        R(i, i) = 1.0 / std::sqrt(W(i, i));
      else if (exponent == -1.0)
        R(i, i) = 1.0 / W(i, i);
      else
        R(i, i) = std::pow(W(i, i), exponent);
    }
    return R;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W);
  Eigen::VectorXd d = es.eigenvalues();
  for (Eigen::Index i = 0; i < n; ++i) d[i] = std::pow(d[i], exponent);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

// sup_x ||x||_W / ||x||_B and sup_x ||x||_B / ||x||_W for SPD W.
//
// Weighted-p layers reduce to plain p via z = D x (D the coordinate weights),
// turning W into V = D^{-1} W D^{-1}. Closed forms:
//   upper, V diagonal:   p <= 2 -> max_i sqrt(V_ii); p > 2 -> ||sqrt(V_ii)||_s,
//                        s = 2p/(p-2) (Hoelder with 1/2 = 1/s + 1/p).
//   lower, V diagonal:   p >= 2 -> max_i 1/sqrt(V_ii); p < 2 ->
//                        ||1/sqrt(V_ii)||_s, s = 2p/(2-p).
//   general V: p = 2 via extreme eigenvalues; p = 1 / p = inf via ball
//   vertices (sign enumeration, guarded by dimension) or the Cauchy-Schwarz
//   row bound max_i sqrt((V^{-1})_ii) for the inf-lower case.
// Everything else falls back to projected-gradient ascent with 64 restarts.

inline Eigen::MatrixXd fold_banach_weights(const Eigen::MatrixXd& W, const BanachNorm& b) {
  if (!b.has_weights()) return W;
  Eigen::VectorXd dinv = b.weights.cwiseInverse();
  return dinv.asDiagonal() * W * dinv.asDiagonal();
}

inline double max_sign_quadratic(const Eigen::MatrixXd& V) {
  const Eigen::Index n = V.rows();
  double best = 0.0;
  Eigen::VectorXd s = Eigen::VectorXd::Ones(n);
  const std::uint64_t total = 1ULL << (n - 1);  // s and -s are equivalent
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    for (Eigen::Index i = 0; i + 1 < n; ++i) s[i + 1] = (mask >> i) & 1 ? -1.0 : 1.0;
    best = std::max(best, s.dot(V * s));
  }
  return std::sqrt(best);
}

inline constexpr int kSignEnumLimit = 20;
inline constexpr std::uint64_t kConstantSeed = 0x52494C414221ULL;

inline double sup_quad_over_banach(const Eigen::MatrixXd& W, const BanachNorm& b) {
  const Eigen::Index n = W.rows();
  const Eigen::MatrixXd V = fold_banach_weights(W, b);
  const double p = b.exponent();
  if (is_exactly_diagonal(V)) {
    if (p <= 2.0) {
      double m = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) m = std::max(m, V(i, i));
      return std::sqrt(m);
    }
    const double s = std::isinf(p) ? 2.0 : 2.0 * p / (p - 2.0);
    if (s == 2.0) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) acc += V(i, i);
      return std::sqrt(acc);
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) acc += std::pow(V(i, i), s / 2.0);
    return std::pow(acc, 1.0 / s);
  }
  if (p == 2.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(V);
    return std::sqrt(es.eigenvalues().maxCoeff());
  }
  if (p == 1.0) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) m = std::max(m, V(i, i));
    return std::sqrt(m);
  }
  if (std::isinf(p) && n <= kSignEnumLimit) return max_sign_quadratic(V);
  return maximize_norm_ratio(quadratic_norm_function(W), norm_function(b), n, 64, 200,
                             kConstantSeed);
}

inline double sup_banach_over_quad(const BanachNorm& b, const Eigen::MatrixXd& W) {
  const Eigen::Index n = W.rows();
  const Eigen::MatrixXd V = fold_banach_weights(W, b);
  const double p = b.exponent();
  if (is_exactly_diagonal(V)) {
    if (p >= 2.0) {
      double m = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) m = std::max(m, 1.0 / V(i, i));
      return std::sqrt(m);
    }
    const double s = 2.0 * p / (2.0 - p);  // p = 1 -> s = 2
    if (s == 2.0) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) acc += 1.0 / V(i, i);
      return std::sqrt(acc);
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) acc += std::pow(V(i, i), -s / 2.0);
    return std::pow(acc, 1.0 / s);
  }
  const Eigen::MatrixXd Vinv = V.llt().solve(Eigen::MatrixXd::Identity(n, n));
  if (p == 2.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Vinv);
    return std::sqrt(es.eigenvalues().maxCoeff());
  }
  if (std::isinf(p)) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) m = std::max(m, Vinv(i, i));
    return std::sqrt(m);
  }
  if (p == 1.0 && n <= kSignEnumLimit) return max_sign_quadratic(Vinv);
  return maximize_norm_ratio(norm_function(b), quadratic_norm_function(W), n, 64, 200,
                             kConstantSeed);
}

}  // namespace detail

// The finite model of a continuously embedded triple H1 <= B <= H2: one
// coordinate space carrying three norms, with (x,y)_i = x^T W_i y and
// W1 = c1^2 * W2 * T12^{-1}. Immutable after construction.
struct Rigging {
  int n = 0;
  BanachNorm b_norm;
  Eigen::MatrixXd W2, T12, W1;
  Eigen::Vector2d c_scale{1.0, 1.0};  // (c1, c2) normalization factors

  // cached spectral roots and factorizations
  Eigen::MatrixXd W1_half, W1_half_inv, W2_half, W2_half_inv;
  Eigen::LLT<Eigen::MatrixXd> W1_llt, W2_llt;

  Rigging() = default;

  Rigging(int dim, BanachNorm b, Eigen::MatrixXd w2, Eigen::MatrixXd t12,
          Eigen::MatrixXd w1, Eigen::Vector2d cs)
      : n(dim),
        b_norm(std::move(b)),
        W2(std::move(w2)),
        T12(std::move(t12)),
        W1(std::move(w1)),
        c_scale(cs) {
    if (n <= 0) throw std::invalid_argument("Rigging: dimension must be positive");
    b_norm.validate(n);
    detail::require_spd(W2, "Rigging W2");
    detail::require_spd(T12, "Rigging T12");
    detail::require_spd(W1, "Rigging W1");
    const double comm = (W2 * T12 - T12 * W2).norm();
    if (comm > 1e-12 * std::max(1.0, W2.norm() * T12.norm()))
      throw std::invalid_argument("Rigging: W2 and T12 must commute");
    W1_half = detail::spd_power(W1, 0.5);
    W1_half_inv = detail::spd_power(W1, -0.5);
    W2_half = detail::spd_power(W2, 0.5);
    W2_half_inv = detail::spd_power(W2, -0.5);
    W1_llt.compute(W1);
    W2_llt.compute(W2);
  }

  bool is_diagonal_model() const {
    return detail::is_exactly_diagonal(W2) && detail::is_exactly_diagonal(T12);
  }

  /// Identity weights with the plain Euclidean Banach layer: every operation
  /// collapses to classical Hilbert-space linear algebra.
  bool is_hilbert_identity() const {
    if (b_norm.kind != NormKind::LpNorm || b_norm.p != 2.0) return false;
    return W1.isIdentity(0.0) && W2.isIdentity(0.0);
  }

  json to_json() const {
    auto pack = [](const Eigen::MatrixXd& M) {
      if (detail::is_exactly_diagonal(M)) {
        json d = json::array();
        for (Eigen::Index i = 0; i < M.rows(); ++i) d.push_back(M(i, i));
        return d;
      }
      return to_json_array(M);
    };
    return json{{"n", n},
                {"b_norm", b_norm.to_json()},
                {"w2", pack(W2)},
                {"t12", pack(T12)},
                {"c_scale", json::array({c_scale[0], c_scale[1]})}};
  }

  static Eigen::MatrixXd unpack_matrix(const json& a, Eigen::Index n) {
    if (a.size() == static_cast<std::size_t>(n)) {
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
      for (Eigen::Index i = 0; i < n; ++i) M(i, i) = a[static_cast<std::size_t>(i)].get<double>();
      return M;
    }
    if (a.size() == static_cast<std::size_t>(n * n)) return matrix_from_json(a, n, n);
    throw std::invalid_argument("Rigging: matrix array must have length n or n^2");
  }

  static Rigging from_json(const json& j);
};

/// Builds the triple from raw SPD data, rescaling so the norm ordering
/// ||x||_{H2} <= ||x||_B <= ||x||_{H1} holds with equality attained:
/// c2 = 1/sup(||x||_{w2}/||x||_B), then W1 = c1^2 * W2 T12^{-1} with
/// c1 = sup(||x||_B/||x||_{W2 T12^{-1}}).
inline Rigging make_rigging(int n, BanachNorm b_norm, Eigen::MatrixXd w2_raw,
                            Eigen::MatrixXd t12) {
  if (n <= 0) throw std::invalid_argument("make_rigging: dimension must be positive");
  if (w2_raw.rows() != n || w2_raw.cols() != n || t12.rows() != n || t12.cols() != n)
    throw std::invalid_argument("make_rigging: matrix shape mismatch");
  b_norm.validate(n);
  detail::require_spd(w2_raw, "make_rigging w2");
  detail::require_spd(t12, "make_rigging t12");
  const double comm = (w2_raw * t12 - t12 * w2_raw).norm();
  if (comm > 1e-12 * std::max(1.0, w2_raw.norm() * t12.norm()))
    throw std::invalid_argument("make_rigging: w2 and t12 must commute");

  const double K2 = detail::sup_quad_over_banach(w2_raw, b_norm);
  const double c2 = 1.0 / K2;
  Eigen::MatrixXd W2 = (c2 * c2) * w2_raw;

  Eigen::MatrixXd W1raw;
  if (detail::is_exactly_diagonal(W2) && detail::is_exactly_diagonal(t12)) {
    W1raw = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) W1raw(i, i) = W2(i, i) / t12(i, i);
  } else {
    // W2 T12^{-1} = T12^{-1} W2 by commutation; symmetrize away roundoff.
    Eigen::MatrixXd X = t12.llt().solve(W2);
    W1raw = 0.5 * (X + X.transpose());
  }

  const double c1 = detail::sup_banach_over_quad(b_norm, W1raw);
  Eigen::MatrixXd W1 = (c1 * c1) * W1raw;
  return Rigging(n, std::move(b_norm), std::move(W2), std::move(t12), std::move(W1),
                 Eigen::Vector2d(c1, c2));
}

inline Rigging Rigging::from_json(const json& j) {
  const int n = j.at("n").get<int>();
  BanachNorm b = BanachNorm::from_json(j.at("b_norm"));
  Eigen::MatrixXd w2 = unpack_matrix(j.at("w2"), n);
  Eigen::MatrixXd t12 = unpack_matrix(j.at("t12"), n);
  if (!j.contains("c_scale")) return make_rigging(n, std::move(b), std::move(w2), std::move(t12));
  const double c1 = j.at("c_scale")[0].get<double>();
  const double c2 = j.at("c_scale")[1].get<double>();
  // w2 is stored already normalized; rebuild W1 from the stored factors.
  Eigen::MatrixXd w1;
  if (detail::is_exactly_diagonal(w2) && detail::is_exactly_diagonal(t12)) {
    w1 = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) w1(i, i) = c1 * c1 * w2(i, i) / t12(i, i);
  } else {
    Eigen::MatrixXd X = t12.llt().solve(w2);
    w1 = (c1 * c1) * 0.5 * (X + X.transpose());
  }
  return Rigging(n, std::move(b), std::move(w2), std::move(t12), std::move(w1),
                 Eigen::Vector2d(c1, c2));
}

/// Grid-function preset: B carries the sup norm, H2 the mean-square inner
/// product (1/n) I, and T12 is the inverse of the Dirichlet second-difference
/// matrix, so H1 is a discrete first-order Sobolev space.
inline Rigging wiener_like_rigging(int n) {
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    L(i, i) = 2.0;
    if (i + 1 < n) {
      L(i, i + 1) = -1.0;
      L(i + 1, i) = -1.0;
    }
  }
  Eigen::MatrixXd t12 = L.llt().solve(Eigen::MatrixXd::Identity(n, n));
  t12 = 0.5 * (t12 + t12.transpose());
  Eigen::MatrixXd w2 = (1.0 / n) * Eigen::MatrixXd::Identity(n, n);
  return make_rigging(n, BanachNorm::sup_grid(), std::move(w2), std::move(t12));
}

inline double norm(const Rigging& r, const Eigen::VectorXd& x, Space space) {
  if (x.size() != r.n) throw std::invalid_argument("norm: vector length mismatch");
  switch (space) {
    case Space::B: return r.b_norm.value(x);
    case Space::H1: return std::sqrt(std::max(0.0, x.dot(r.W1 * x)));
    case Space::H2: return std::sqrt(std::max(0.0, x.dot(r.W2 * x)));
    case Space::BDual: return r.b_norm.dual_value(x);
  }
  throw std::invalid_argument("norm: unknown space tag");
}

/// Conjugate isomorphism J_i: x -> (x, .)_{H_i}; coordinates W_i x.
inline Functional j_map(const Rigging& r, const Eigen::VectorXd& x, int i) {
  if (x.size() != r.n) throw std::invalid_argument("j_map: vector length mismatch");
  if (i == 1) return Functional{r.W1 * x};
  if (i == 2) return Functional{r.W2 * x};
  throw std::invalid_argument("j_map: index must be 1 or 2");
}

inline Eigen::VectorXd j_inverse(const Rigging& r, const Functional& f, int i) {
  if (f.coords.size() != r.n) throw std::invalid_argument("j_inverse: length mismatch");
  if (i == 1) return r.W1_llt.solve(f.coords);
  if (i == 2) return r.W2_llt.solve(f.coords);
  throw std::invalid_argument("j_inverse: index must be 1 or 2");
}

/// Special duality map phi^s_x = (||x||_B^2 / ||x||_{H2}^2) J_2(x); pairs with
/// x to ||x||_B^2 exactly.
inline Functional special_duality(const Rigging& r, const Eigen::VectorXd& x) {
  if (x.size() != r.n) throw std::invalid_argument("special_duality: length mismatch");
  if (x.lpNorm<Eigen::Infinity>() == 0.0)
    throw std::domain_error("special_duality: undefined at x = 0");
  const double nb = norm(r, x, Space::B);
  const double nh2 = norm(r, x, Space::H2);
  return Functional{(nb * nb / (nh2 * nh2)) * (r.W2 * x)};
}

/// Samples random vectors and asserts the norm ordering within 1e-12 relative
/// slack; measures (never asserts) the dual-norm ratio of the duality map.
inline PropertyReport check_embedding(const Rigging& r, long trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("check_embedding: trials must be >= 1");
  PropertyReport rep;
  rep.name = "embedding";
  rep.seed = seed;
  rep.trials = trials;
  SplitMix64 rng(seed);
  WorstCase lower, upper, dual_ratio;
  for (long t = 0; t < trials; ++t) {
    const Eigen::VectorXd x = rng.normal_vector(r.n);
    const double nb = norm(r, x, Space::B);
    if (nb == 0.0) continue;
    const double nh2 = norm(r, x, Space::H2);
    const double nh1 = norm(r, x, Space::H1);
    const json wit{{"x", to_json_array(x)}};
    lower.update((nh2 - nb) / nb, wit);
    upper.update((nb - nh1) / nb, wit);
    const Functional phi = special_duality(r, x);
    dual_ratio.update(norm(r, phi.coords, Space::BDual) / nb, wit);
  }
  rep.asserted.push_back(lower.as_asserted("h2_norm_le_b_norm", 1e-12));
  rep.asserted.push_back(upper.as_asserted("b_norm_le_h1_norm", 1e-12));
  rep.measured.push_back(
      MeasuredQuantity{"special_duality_dual_norm_ratio_max", dual_ratio.defect(),
                       dual_ratio.witness()});
  return rep;
}

inline bool same_rigging(const Rigging& a, const Rigging& b) {
  if (a.n != b.n || !(a.b_norm == b.b_norm)) return false;
  auto eq = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  return eq(a.W2, b.W2) && eq(a.T12, b.T12) && eq(a.W1, b.W1) && a.c_scale == b.c_scale;
}

}  // namespace riglab
