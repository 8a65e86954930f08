#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "riglab/rng.hpp"

namespace riglab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Dual exponent q with 1/p + 1/q = 1; p = 1 and p = inf map to each other.
inline double dual_exponent(double p) {
  if (p == 1.0) return kInf;
  if (std::isinf(p)) return 1.0;
  return p / (p - 1.0);
}

enum class NormKind { LpNorm, WeightedLp, SupGrid };

// Norm on the coordinate space of the Banach layer. WeightedLp scales
// coordinates before the p-sum: ||x|| = ||(w_i x_i)||_p with w_i > 0.
// SupGrid is the sup norm over grid values (a preset, numerically l-inf).
struct BanachNorm {
  NormKind kind = NormKind::LpNorm;
  double p = 2.0;
  Eigen::VectorXd weights;  // WeightedLp only

  static BanachNorm lp(double exponent) {
    BanachNorm b;
    b.kind = NormKind::LpNorm;
    b.p = exponent;
    b.check_exponent();
    return b;
  }

  static BanachNorm weighted_lp(double exponent, Eigen::VectorXd w) {
    BanachNorm b;
    b.kind = NormKind::WeightedLp;
    b.p = exponent;
    b.weights = std::move(w);
    b.check_exponent();
    if ((b.weights.array() <= 0.0).any())
      throw std::invalid_argument("BanachNorm: weights must be strictly positive");
    return b;
  }

  static BanachNorm sup_grid() {
    BanachNorm b;
    b.kind = NormKind::SupGrid;
    b.p = kInf;
    return b;
  }

  double exponent() const { return kind == NormKind::SupGrid ? kInf : p; }
  bool has_weights() const { return kind == NormKind::WeightedLp; }
  double weight(Eigen::Index i) const { return has_weights() ? weights[i] : 1.0; }

  void check_exponent() const {
    if (!(p >= 1.0))  // also rejects NaN
      throw std::invalid_argument("BanachNorm: exponent must satisfy p >= 1");
  }

  void validate(Eigen::Index n) const {
    check_exponent();
    if (has_weights() && weights.size() != n)
      throw std::invalid_argument("BanachNorm: weight vector length mismatch");
  }

  double value(const Eigen::VectorXd& x) const {
    const double pe = exponent();
    const Eigen::Index n = x.size();
    if (std::isinf(pe)) {
      double m = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) m = std::max(m, weight(i) * std::abs(x[i]));
      return m;
    }
    if (pe == 1.0) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) s += weight(i) * std::abs(x[i]);
      return s;
    }
    // Scaled p-sum; exact on coordinate vectors.
    double m = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) m = std::max(m, weight(i) * std::abs(x[i]));
    if (m == 0.0) return 0.0;
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += std::pow(weight(i) * std::abs(x[i]) / m, pe);
    return m * std::pow(s, 1.0 / pe);
  }

  /// The dual norm, acting on functional coordinates: exponent q, weights 1/w.
  BanachNorm dual() const {
    const double q = dual_exponent(exponent());
    if (has_weights()) return weighted_lp(q, weights.cwiseInverse());
    return lp(q);
  }

  double dual_value(const Eigen::VectorXd& f) const { return dual().value(f); }

  /// A subgradient of the norm at x (any member of the subdifferential; used
  /// by the ratio-ascent estimators). Zero vector at x = 0.
  Eigen::VectorXd subgradient(const Eigen::VectorXd& x) const {
    const double pe = exponent();
    const Eigen::Index n = x.size();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    if (std::isinf(pe)) {
      Eigen::Index jmax = 0;
      double m = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double wi = weight(i) * std::abs(x[i]);
        if (wi > m) {
          m = wi;
          jmax = i;
        }
      }
      if (m > 0.0) g[jmax] = weight(jmax) * (x[jmax] > 0 ? 1.0 : -1.0);
      return g;
    }
    if (pe == 1.0) {
      for (Eigen::Index i = 0; i < n; ++i)
        g[i] = x[i] == 0.0 ? 0.0 : weight(i) * (x[i] > 0 ? 1.0 : -1.0);
      return g;
    }
    const double nrm = value(x);
    if (nrm == 0.0) return g;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (x[i] == 0.0) continue;
      const double r = weight(i) * std::abs(x[i]) / nrm;
      g[i] = weight(i) * (x[i] > 0 ? 1.0 : -1.0) * std::pow(r, pe - 1.0);
    }
    return g;
  }

  bool operator==(const BanachNorm& o) const {
    if (kind != o.kind || p != o.p) return false;
    if (has_weights() != o.has_weights()) return false;
    if (has_weights() && (weights.size() != o.weights.size() || weights != o.weights))
      return false;
    return true;
  }

  json to_json() const {
    json j;
    switch (kind) {
      case NormKind::LpNorm: j["kind"] = "lp"; break;
      case NormKind::WeightedLp: j["kind"] = "weighted-lp"; break;
      case NormKind::SupGrid: j["kind"] = "sup-grid"; break;
    }
    if (std::isinf(p))
      j["p"] = "inf";
    else
      j["p"] = p;
    if (has_weights()) {
      json w = json::array();
      for (Eigen::Index i = 0; i < weights.size(); ++i) w.push_back(weights[i]);
      j["weights"] = w;
    }
    return j;
  }

  static double exponent_from_json(const json& jp) {
    if (jp.is_string()) {
      const auto s = jp.get<std::string>();
      if (s == "inf" || s == "Inf" || s == "infinity") return kInf;
      throw std::invalid_argument("BanachNorm: unknown exponent string '" + s + "'");
    }
    return jp.get<double>();
  }

  static BanachNorm from_json(const json& j) {
    const std::string k = j.at("kind").get<std::string>();
    if (k == "sup-grid") return sup_grid();
    const double pe = exponent_from_json(j.at("p"));
    if (k == "lp") return lp(pe);
    if (k == "weighted-lp") {
      const auto& jw = j.at("weights");
      Eigen::VectorXd w(static_cast<Eigen::Index>(jw.size()));
      for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = jw[static_cast<std::size_t>(i)].get<double>();
      return weighted_lp(pe, std::move(w));
    }
    throw std::invalid_argument("BanachNorm: unknown kind '" + k + "'");
  }
};

// A norm together with a subgradient, the interface the ascent estimators
// consume. Quadratic norms pass sqrt(x^T W x) with gradient W x / value.
struct NormFunction {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad;
};

inline NormFunction norm_function(const BanachNorm& b) {
  return NormFunction{[b](const Eigen::VectorXd& x) { return b.value(x); },
                      [b](const Eigen::VectorXd& x) { return b.subgradient(x); }};
}

inline NormFunction quadratic_norm_function(const Eigen::MatrixXd& W) {
  return NormFunction{
      [W](const Eigen::VectorXd& x) { return std::sqrt(std::max(0.0, x.dot(W * x))); },
      [W](const Eigen::VectorXd& x) {
        const double v = std::sqrt(std::max(0.0, x.dot(W * x)));
        if (v == 0.0) return Eigen::VectorXd(Eigen::VectorXd::Zero(x.size()));
        return Eigen::VectorXd((W * x) / v);
      }};
}

// Projected-gradient ascent for sup_x num(x) / den(x) over the unit sphere.
// Every iterate is a feasible point, so the returned value is a lower bound
// on the true supremum up to roundoff. Deterministic given the seed;
// coordinate vectors are always tried as starting points.
inline double maximize_norm_ratio(const NormFunction& num, const NormFunction& den,
                                  Eigen::Index n, int restarts, int iters,
                                  std::uint64_t seed,
                                  Eigen::VectorXd* argmax = nullptr) {
  SplitMix64 rng(seed);
  double best = 0.0;
  Eigen::VectorXd best_x = Eigen::VectorXd::Zero(n);

  auto consider = [&](const Eigen::VectorXd& x) -> double {
    const double d = den.value(x);
    if (!(d > 0.0)) return 0.0;
    const double v = num.value(x) / d;
    if (std::isfinite(v) && v > best) {
      best = v;
      best_x = x;
    }
    return v;
  };

  auto climb = [&](Eigen::VectorXd x) {
    if (x.norm() == 0.0) return;
    x.normalize();
    double step = 0.5;
    for (int it = 0; it < iters; ++it) {
      consider(x);
      const double nv = num.value(x);
      const double dv = den.value(x);
      if (!(nv > 0.0) || !(dv > 0.0)) {
        x = (x + 0.1 * rng.normal_vector(n)).normalized();
        continue;
      }
      const Eigen::VectorXd g = num.grad(x) / nv - den.grad(x) / dv;
      Eigen::VectorXd next = x + step * g;
      if (next.norm() == 0.0) break;
      next.normalize();
      x = next;
      step *= 0.97;
    }
    consider(x);
  };

  for (Eigen::Index i = 0; i < n; ++i) consider(Eigen::VectorXd::Unit(n, i));
  climb(Eigen::VectorXd::Ones(n));
  for (int rst = 0; rst < restarts; ++rst) climb(rng.normal_vector(n));

  if (argmax) *argmax = best_x;
  return best;
}

}  // namespace riglab
