#pragma once

#include <stdexcept>

#include "cepnet/numerics.hpp"

namespace cep {

/// Thrown when a retraction step lands (numerically) on the origin of one
/// of the circles, where the phase is undefined.
class DegenerateRetraction : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A transmit vector on the complex-circle product manifold: every entry has
/// modulus 1/sqrt(Nt) (total transmit power fixed to 1).
class ManifoldPoint {
 public:
  static constexpr double kModulusTolerance = 1e-9;

  /// Validates the modulus invariant; throws ContractError otherwise.
  explicit ManifoldPoint(ComplexVec x);

  /// Skips validation. Only for producers that normalize by construction.
  static ManifoldPoint unchecked(ComplexVec x);

  std::size_t size() const { return x_.size(); }
  const ComplexVec& vec() const { return x_; }
  const cplx& operator[](std::size_t i) const { return x_[i]; }
  double radius() const;
  double max_modulus_deviation() const;

  friend bool operator==(const ManifoldPoint&, const ManifoldPoint&) = default;

 private:
  struct NoCheck {};
  ManifoldPoint(ComplexVec x, NoCheck) : x_(std::move(x)) {}
  ComplexVec x_;
};

/// A direction z with Re{z_n conj(x_n)} = 0 at the point it was produced for.
struct TangentVector {
  ComplexVec z;

  std::size_t size() const { return z.size(); }
  /// max_n |Re{z_n conj(x_n)}|.
  double residual(const ManifoldPoint& base) const;
};

/// f(x) = ||Hx - s||^2 for one (H, s) sample. Holds references; the channel
/// and symbols must outlive the objective.
class MuiObjective {
 public:
  MuiObjective(const ComplexMat& h, const ComplexVec& s);
  MuiObjective(ComplexMat&&, const ComplexVec&) = delete;
  MuiObjective(const ComplexMat&, ComplexVec&&) = delete;

  const ComplexMat& channel() const { return *h_; }
  const ComplexVec& symbols() const { return *s_; }
  std::size_t users() const { return h_->rows(); }
  std::size_t antennas() const { return h_->cols(); }

 private:
  const ComplexMat* h_;
  const ComplexVec* s_;
};

/// ||Hx - s||^2. The ComplexVec overload evaluates off the manifold too.
double mui(const MuiObjective& obj, const ManifoldPoint& x);
double mui(const MuiObjective& obj, const ComplexVec& x);

/// -2 H^H (s - Hx). With x = a + jb this equals df/da + j df/db, so the
/// directional derivative along v is Re{grad^H v}.
ComplexVec euclidean_grad(const MuiObjective& obj, const ComplexVec& x);
ComplexVec euclidean_grad(const MuiObjective& obj, const ManifoldPoint& x);

/// z - Nt * Re{z o conj(x)} o x.
TangentVector project_to_tangent(const ManifoldPoint& x, const ComplexVec& z);

TangentVector riemannian_grad(const MuiObjective& obj, const ManifoldPoint& x);

/// f(x), the Euclidean gradient and its tangent projection from one residual.
struct Evaluation {
  double value = 0.0;
  ComplexVec euclidean;
  TangentVector riemannian;
};
Evaluation evaluate(const MuiObjective& obj, const ManifoldPoint& x);

/// Per-entry normalization of x + v back onto the circles. Entries with
/// v_n == 0 are returned unchanged. Entries whose
/// |x_n + v_n| falls in [1e-300, 1e-12] keep the phase of x_n; below 1e-300
/// DegenerateRetraction is thrown.
ManifoldPoint retract(const ManifoldPoint& x, const ComplexVec& v);

/// x + alpha * d, retracted.
ManifoldPoint retract_scaled(const ManifoldPoint& x, double alpha, const ComplexVec& d);

inline constexpr double kRetractKeepPhaseBelow = 1e-12;
inline constexpr double kRetractFailBelow = 1e-300;

}  // namespace cep
