#include "cepnet/solvers.hpp"

#include <cmath>
#include <numbers>

namespace cep {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractError(what);
}

ComplexVec negate(const TangentVector& g) {
  ComplexVec d(g.size());
  for (std::size_t n = 0; n < d.size(); ++n) d[n] = -g.z[n];
  return d;
}

double weight(const TangentVector& g, const ManifoldPoint& x, const TangentVector& g_prev, BetaRule rule) {
  if (rule == BetaRule::Zero) return 0.0;
  const double beta = polak_ribiere(g, project_to_tangent(x, g_prev.z), g_prev);
  return rule == BetaRule::PolakRibierePlus ? std::max(beta, 0.0) : beta;
}

}  // namespace

ComplexVec cg_direction(const TangentVector& g, double coef, const TangentVector& p) {
  ComplexVec d(g.size());
  for (std::size_t n = 0; n < d.size(); ++n) d[n] = -g.z[n] + coef * p.z[n];
  return d;
}

std::string to_string(InitPolicy p) { return p == InitPolicy::MatchedFilter ? "matched_filter" : "random_phase"; }

InitPolicy parse_init_policy(const std::string& s) {
  if (s == "matched_filter") return InitPolicy::MatchedFilter;
  if (s == "random_phase") return InitPolicy::RandomPhase;
  throw ContractError("unknown x0 policy '" + s + "' (expected matched_filter or random_phase)");
}

ManifoldPoint initial_point(const MuiObjective& obj, SeededRng& rng, InitPolicy policy) {
  const std::size_t nt = obj.antennas();
  const double r = 1.0 / std::sqrt(static_cast<double>(nt));
  ComplexVec x(nt);
  if (policy == InitPolicy::MatchedFilter) {
    const ComplexVec mf = matvec_adjoint(obj.channel(), obj.symbols());
    for (std::size_t n = 0; n < nt; ++n) {
      const double mag = std::abs(mf[n]);
      x[n] = mag == 0.0 ? cplx(r, 0.0) : mf[n] * (r / mag);
    }
  } else {
    for (std::size_t n = 0; n < nt; ++n) x[n] = std::polar(r, 2.0 * std::numbers::pi * rng.uniform());
  }
  return ManifoldPoint::unchecked(std::move(x));
}

void ArmijoConfig::validate() const {
  require(c1 > 0.0 && c1 < 1.0, "ArmijoConfig: c1 must lie in (0,1)");
  require(tau > 0.0 && tau < 1.0, "ArmijoConfig: tau must lie in (0,1)");
  require(alpha_init > 0.0 && std::isfinite(alpha_init), "ArmijoConfig: alpha_init must be positive");
  require(max_backtracks >= 1, "ArmijoConfig: max_backtracks must be positive");
}

ArmijoResult armijo_step(const MuiObjective& obj, const ManifoldPoint& x, const TangentVector& d,
                         const TangentVector& g, const ArmijoConfig& cfg, double fx) {
  cfg.validate();
  const double slope = kernel::real_inner(g.z.span(), d.z.span());
  ArmijoResult res;
  double alpha = cfg.alpha_init;
  for (int m = 0; m <= cfg.max_backtracks; ++m) {
    const double f_trial = mui(obj, retract_scaled(x, alpha, d.z));
    ++res.evals;
    res.alpha = alpha;
    res.value = f_trial;
    if (f_trial - fx <= cfg.c1 * alpha * slope) return res;
    alpha *= cfg.tau;
  }
  res.truncated = true;
  return res;
}

double polak_ribiere(const TangentVector& g, const TangentVector& g_prev_transported, const TangentVector& g_prev) {
  const double den = kernel::real_inner(g_prev.z.span(), g_prev.z.span());
  if (den < kBetaDenominatorFloor) return 0.0;
  double num = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    const cplx diff = g.z[n] - g_prev_transported.z[n];
    num += g.z[n].real() * diff.real() + g.z[n].imag() * diff.imag();
  }
  return num / den;
}

CepnetParams::CepnetParams(std::vector<double> alpha, std::vector<double> beta)
    : w_alpha(std::move(alpha)), w_beta(std::move(beta)) {
  validate();
}

std::vector<double> CepnetParams::flat() const {
  std::vector<double> v(w_alpha);
  v.insert(v.end(), w_beta.begin(), w_beta.end());
  return v;
}

CepnetParams CepnetParams::from_flat(const std::vector<double>& v) {
  require(v.size() % 2 == 0 && !v.empty(), "CepnetParams::from_flat: need 2K values");
  const auto k = static_cast<std::ptrdiff_t>(v.size() / 2);
  return CepnetParams({v.begin(), v.begin() + k}, {v.begin() + k, v.end()});
}

void CepnetParams::validate() const {
  require(!w_alpha.empty(), "CepnetParams: K must be at least 1");
  require(w_alpha.size() == w_beta.size(), "CepnetParams: w_alpha and w_beta must both have K entries");
  for (double w : w_alpha) require(std::isfinite(w), "CepnetParams: non-finite w_alpha");
  for (double w : w_beta) require(std::isfinite(w), "CepnetParams: non-finite w_beta");
}

int SolverTrace::objective_evals() const {
  int total = 0;
  for (const auto& it : iterations) total += it.objective_evals;
  return total;
}

int SolverTrace::gradient_evals() const {
  int total = 0;
  for (const auto& it : iterations) total += it.gradient_evals;
  return total;
}

SolveResult rmo_cg(const MuiObjective& obj, const ManifoldPoint& x0, int iterations, const CgOptions& opts) {
  require(iterations >= 1, "rmo_cg: iteration count must be at least 1");
  require(x0.size() == obj.antennas(), "rmo_cg: x0 length must equal H.cols");
  opts.armijo.validate();

  SolverTrace trace;
  trace.iterations.reserve(static_cast<std::size_t>(iterations));
  ManifoldPoint x = x0;
  TangentVector g_prev;
  TangentVector d;
  double f_next = 0.0;
  if (opts.record_path) trace.iterates.push_back(x);

  for (int k = 0; k < iterations; ++k) {
    IterationRecord rec;
    Evaluation ge = evaluate(obj, x);
    rec.gradient_evals = 1;
    rec.mui = ge.value;
    if (k == 0) {
      d.z = negate(ge.riemannian);
    } else {
      rec.beta = weight(ge.riemannian, x, g_prev, opts.beta_rule);
      d.z = cg_direction(ge.riemannian, rec.beta, project_to_tangent(x, d.z));
    }
    const ArmijoResult step = armijo_step(obj, x, d, ge.riemannian, opts.armijo, ge.value);
    rec.step_size = step.alpha;
    rec.objective_evals = step.evals;
    rec.truncated = step.truncated;
    f_next = step.value;

    if (opts.record_path) trace.directions.push_back(d.z);
    x = retract_scaled(x, step.alpha, d.z);
    if (opts.record_path) trace.iterates.push_back(x);
    g_prev = std::move(ge.riemannian);
    trace.iterations.push_back(rec);
  }
  trace.final_mui = f_next;
  return {std::move(x), std::move(trace)};
}

SolveResult rmo_gd(const MuiObjective& obj, const ManifoldPoint& x0, int iterations, CgOptions opts) {
  opts.beta_rule = BetaRule::Zero;
  return rmo_cg(obj, x0, iterations, opts);
}

SolveResult cepnet_forward(const MuiObjective& obj, const ManifoldPoint& x0, const CepnetParams& params,
                           bool record_path) {
  params.validate();
  require(x0.size() == obj.antennas(), "cepnet_forward: x0 length must equal H.cols");
  const std::size_t units = params.units();

  SolverTrace trace;
  trace.iterations.reserve(units);
  ManifoldPoint x = x0;
  TangentVector g_prev;
  ComplexVec d;
  if (record_path) trace.iterates.push_back(x);

  for (std::size_t k = 0; k < units; ++k) {
    IterationRecord rec;
    Evaluation ge = evaluate(obj, x);
    rec.gradient_evals = 1;
    rec.mui = ge.value;
    if (k == 0) {
      d = negate(ge.riemannian);
    } else {
      rec.beta = weight(ge.riemannian, x, g_prev, BetaRule::PolakRibiere);
      d = cg_direction(ge.riemannian, params.w_beta[k] * rec.beta, project_to_tangent(x, d));
    }
    rec.step_size = params.w_alpha[k];
    if (record_path) trace.directions.push_back(d);
    x = retract_scaled(x, params.w_alpha[k], d);
    if (record_path) trace.iterates.push_back(x);
    g_prev = std::move(ge.riemannian);
    trace.iterations.push_back(rec);
  }
  // Bookkeeping only; not part of the unrolled computation.
  trace.final_mui = mui(obj, x);
  return {std::move(x), std::move(trace)};
}

std::string to_string(SolverKind k) {
  switch (k) {
    case SolverKind::RmoCg:
      return "rmo_cg";
    case SolverKind::RmoGd:
      return "rmo_gd";
    case SolverKind::Cepnet:
      return "cepnet";
  }
  return "?";
}

SolverKind parse_solver_kind(const std::string& s) {
  if (s == "rmo_cg") return SolverKind::RmoCg;
  if (s == "rmo_gd") return SolverKind::RmoGd;
  if (s == "cepnet") return SolverKind::Cepnet;
  throw ContractError("unknown solver '" + s + "' (expected rmo_cg, rmo_gd or cepnet)");
}

SolveResult Precoder::run(const MuiObjective& obj, std::uint64_t sample_seed, bool record_path) const {
  SeededRng rng(sample_seed);
  const ManifoldPoint x0 = initial_point(obj, rng, init);
  switch (kind) {
    case SolverKind::RmoCg: {
      CgOptions o = cg;
      o.record_path = record_path;
      return rmo_cg(obj, x0, iterations, o);
    }
    case SolverKind::RmoGd: {
      CgOptions o = cg;
      o.record_path = record_path;
      return rmo_gd(obj, x0, iterations, o);
    }
    case SolverKind::Cepnet:
      require(params.has_value(), "Precoder '" + name + "': cepnet requires parameters");
      require(static_cast<int>(params->units()) == iterations,
              "Precoder '" + name + "': parameter K=" + std::to_string(params->units()) +
                  " does not match configured K=" + std::to_string(iterations));
      return cepnet_forward(obj, x0, *params, record_path);
  }
  throw ContractError("Precoder: unknown solver kind");
}

}  // namespace cep
