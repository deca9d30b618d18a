#include "cepnet/manifold.hpp"

#include <cmath>
#include <string>

namespace cep {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ContractError(what);
}

}  // namespace

ManifoldPoint::ManifoldPoint(ComplexVec x) : x_(std::move(x)) {
  require(!x_.empty(), "ManifoldPoint: empty vector");
  const double dev = max_modulus_deviation();
  if (!(dev < kModulusTolerance)) {
    throw ContractError("ManifoldPoint: entry modulus deviates from 1/sqrt(Nt) by " + std::to_string(dev));
  }
}

ManifoldPoint ManifoldPoint::unchecked(ComplexVec x) { return ManifoldPoint(std::move(x), NoCheck{}); }

double ManifoldPoint::radius() const { return 1.0 / std::sqrt(static_cast<double>(x_.size())); }

double ManifoldPoint::max_modulus_deviation() const {
  const double r = radius();
  double worst = 0.0;
  for (const cplx& v : x_) worst = std::max(worst, std::abs(std::abs(v) - r));
  return worst;
}

double TangentVector::residual(const ManifoldPoint& base) const {
  require(base.size() == z.size(), "TangentVector::residual: length mismatch");
  double worst = 0.0;
  for (std::size_t n = 0; n < z.size(); ++n) {
    const double re = z[n].real() * base[n].real() + z[n].imag() * base[n].imag();
    worst = std::max(worst, std::abs(re));
  }
  return worst;
}

MuiObjective::MuiObjective(const ComplexMat& h, const ComplexVec& s) : h_(&h), s_(&s) {
  require(h.rows() == s.size(), "MuiObjective: H.rows must equal s.length");
  require(h.cols() >= 1, "MuiObjective: H must have at least one column");
}

double mui(const MuiObjective& obj, const ComplexVec& x) {
  require(x.size() == obj.antennas(), "mui: x.length must equal H.cols");
  ComplexVec hx(obj.users());
  kernel::matvec(obj.channel(), x.span(), hx.span());
  double acc = 0.0;
  for (std::size_t m = 0; m < hx.size(); ++m) acc += std::norm(hx[m] - obj.symbols()[m]);
  return acc;
}

double mui(const MuiObjective& obj, const ManifoldPoint& x) { return mui(obj, x.vec()); }

ComplexVec euclidean_grad(const MuiObjective& obj, const ComplexVec& x) {
  require(x.size() == obj.antennas(), "euclidean_grad: x.length must equal H.cols");
  ComplexVec r(obj.users());
  kernel::matvec(obj.channel(), x.span(), r.span());
  for (std::size_t m = 0; m < r.size(); ++m) r[m] = 2.0 * (r[m] - obj.symbols()[m]);
  ComplexVec g(obj.antennas());
  kernel::matvec_adjoint(obj.channel(), r.span(), g.span());
  return g;
}

ComplexVec euclidean_grad(const MuiObjective& obj, const ManifoldPoint& x) { return euclidean_grad(obj, x.vec()); }

TangentVector project_to_tangent(const ManifoldPoint& x, const ComplexVec& z) {
  require(z.size() == x.size(), "project_to_tangent: length mismatch");
  const double nt = static_cast<double>(x.size());
  ComplexVec out(z.size());
  for (std::size_t n = 0; n < z.size(); ++n) {
    const double re = z[n].real() * x[n].real() + z[n].imag() * x[n].imag();
    out[n] = z[n] - (nt * re) * x[n];
  }
  return TangentVector{std::move(out)};
}

TangentVector riemannian_grad(const MuiObjective& obj, const ManifoldPoint& x) {
  return project_to_tangent(x, euclidean_grad(obj, x));
}

Evaluation evaluate(const MuiObjective& obj, const ManifoldPoint& x) {
  require(x.size() == obj.antennas(), "evaluate: x.length must equal H.cols");
  ComplexVec r(obj.users());
  kernel::matvec(obj.channel(), x.vec().span(), r.span());
  Evaluation ev;
  for (std::size_t m = 0; m < r.size(); ++m) {
    r[m] -= obj.symbols()[m];
    ev.value += std::norm(r[m]);
    r[m] *= 2.0;
  }
  ev.euclidean = ComplexVec(obj.antennas());
  kernel::matvec_adjoint(obj.channel(), r.span(), ev.euclidean.span());
  ev.riemannian = project_to_tangent(x, ev.euclidean);
  return ev;
}

ManifoldPoint retract_scaled(const ManifoldPoint& x, double alpha, const ComplexVec& d) {
  require(d.size() == x.size(), "retract: length mismatch");
  const double r = x.radius();
  ComplexVec out(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    const cplx step = alpha * d[n];
    if (step == cplx(0.0, 0.0)) {
      // Already on the circle; renormalizing would only add rounding.
      out[n] = x[n];
      continue;
    }
    const cplx u = x[n] + step;
    const double mag = std::abs(u);
    if (mag < kRetractFailBelow) {
      throw DegenerateRetraction("retract: |x_n + v_n| vanishes at entry " + std::to_string(n));
    }
    if (mag <= kRetractKeepPhaseBelow) {
      out[n] = x[n];
    } else {
      out[n] = u * (r / mag);
    }
  }
  return ManifoldPoint::unchecked(std::move(out));
}

ManifoldPoint retract(const ManifoldPoint& x, const ComplexVec& v) { return retract_scaled(x, 1.0, v); }

}  // namespace cep
