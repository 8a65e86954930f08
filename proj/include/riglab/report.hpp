#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace riglab {

using json = nlohmann::json;

inline json to_json_array(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

/// Row-major flattening; the convention used by every matrix field on the wire.
inline json to_json_array(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
  return a;
}

inline Eigen::VectorXd vector_from_json(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = a[static_cast<std::size_t>(i)].get<double>();
  return v;
}

inline Eigen::MatrixXd matrix_from_json(const json& a, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = a[k++].get<double>();
  return m;
}

struct AssertedProperty {
  std::string prop;
  bool pass = true;
  double defect = 0.0;  // worst signed violation seen, scaled as documented per checker
  json witness;         // input that reproduces the worst case; null if none

  json to_json() const {
    return json{{"prop", prop}, {"pass", pass}, {"defect", defect}, {"witness", witness}};
  }
};

struct MeasuredQuantity {
  std::string quantity;
  double value = 0.0;
  json witness;

  json to_json() const {
    return json{{"quantity", quantity}, {"value", value}, {"witness", witness}};
  }
};

// Outcome record of one checker run. Asserted entries gate exit codes;
// measured entries never do.
struct PropertyReport {
  std::string name;
  std::uint64_t seed = 0;
  long trials = 0;
  std::vector<AssertedProperty> asserted;
  std::vector<MeasuredQuantity> measured;

  bool all_passed() const {
    for (const auto& a : asserted)
      if (!a.pass) return false;
    return true;
  }

  const AssertedProperty* find_asserted(const std::string& prop) const {
    for (const auto& a : asserted)
      if (a.prop == prop) return &a;
    return nullptr;
  }

  const MeasuredQuantity* find_measured(const std::string& quantity) const {
    for (const auto& m : measured)
      if (m.quantity == quantity) return &m;
    return nullptr;
  }

  json to_json() const {
    json ja = json::array();
    for (const auto& a : asserted) ja.push_back(a.to_json());
    json jm = json::array();
    for (const auto& m : measured) jm.push_back(m.to_json());
    return json{{"name", name}, {"seed", seed},         {"trials", trials},
                {"asserted", ja}, {"measured", jm}};
  }
};

// Tracks the worst case of a <= bound over many trials.
class WorstCase {
 public:
  void update(double defect, const json& witness) {
    if (!seen_ || defect > defect_) {
      defect_ = defect;
      witness_ = witness;
      seen_ = true;
    }
  }
  double defect() const { return seen_ ? defect_ : 0.0; }
  const json& witness() const { return witness_; }
  bool seen() const { return seen_; }

  /// pass iff worst defect <= tol.
  AssertedProperty as_asserted(const std::string& prop, double tol) const {
    return AssertedProperty{prop, defect() <= tol, defect(), seen_ ? witness_ : json()};
  }

 private:
  bool seen_ = false;
  double defect_ = 0.0;
  json witness_;
};

}  // namespace riglab
