#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cepnet/manifold.hpp"

namespace cep {

enum class InitPolicy { MatchedFilter, RandomPhase };

std::string to_string(InitPolicy p);
InitPolicy parse_init_policy(const std::string& s);

/// x0 for a solve. MatchedFilter takes the phases of H^H s (phase 0 where
/// that entry is exactly zero); RandomPhase draws uniform phases from rng.
ManifoldPoint initial_point(const MuiObjective& obj, SeededRng& rng, InitPolicy policy);

struct ArmijoConfig {
  double c1 = 1e-4;
  double alpha_init = 0.1;
  double tau = 0.5;
  int max_backtracks = 30;

  void validate() const;
};

struct ArmijoResult {
  double alpha = 0.0;
  int evals = 0;
  /// No candidate met sufficient decrease; alpha is the smallest one tried.
  bool truncated = false;
  /// f at retract(x, alpha d).
  double value = 0.0;
};

/// Backtracking over alpha_init * tau^m, m = 0..max_backtracks. Accepts the
/// first alpha with f(R_x(alpha d)) - f(x) <= c1 alpha Re{g^H d}. `fx` is the
/// already-known f(x); `evals` counts trial evaluations only.
ArmijoResult armijo_step(const MuiObjective& obj, const ManifoldPoint& x, const TangentVector& d,
                         const TangentVector& g, const ArmijoConfig& cfg, double fx);

/// How the CG mixing weight is formed.
enum class BetaRule {
  PolakRibiere,      // raw, may be negative
  PolakRibierePlus,  // max(beta, 0)
  Zero,              // steepest descent
};

/// Stationarity guard on the beta denominator ||grad f(x_{k-1})||^2.
inline constexpr double kBetaDenominatorFloor = 1e-20;

/// Polak-Ribiere weight with the previous gradient transported to the
/// current point in the numerator only:
///   Re{g^H (g - P(g_prev))} / ||g_prev||^2
double polak_ribiere(const TangentVector& g, const TangentVector& g_prev_transported, const TangentVector& g_prev);

/// -g + coef * p.
ComplexVec cg_direction(const TangentVector& g, double coef, const TangentVector& p);

/// Per-sample seed for randomized initial points, shared by training and
/// evaluation so both see the same x0 for a given sample index.
inline std::uint64_t sample_seed(std::uint64_t base, std::size_t index) { return mix_seed(base, index); }

struct CepnetParams {
  std::vector<double> w_alpha;
  std::vector<double> w_beta;

  CepnetParams() = default;
  CepnetParams(std::vector<double> alpha, std::vector<double> beta);

  std::size_t units() const { return w_alpha.size(); }
  std::size_t count() const { return w_alpha.size() + w_beta.size(); }
  /// [w_alpha..., w_beta...].
  std::vector<double> flat() const;
  static CepnetParams from_flat(const std::vector<double>& v);
  void validate() const;

  friend bool operator==(const CepnetParams&, const CepnetParams&) = default;
};

struct IterationRecord {
  double mui = 0.0;  // at x_k, before the step
  double step_size = 0.0;
  double beta = 0.0;
  int objective_evals = 0;  // line-search trial evaluations
  int gradient_evals = 0;
  bool truncated = false;
};

struct SolverTrace {
  std::vector<IterationRecord> iterations;
  double final_mui = 0.0;
  /// x_0..x_K and d_0..d_{K-1}; filled only when path recording is on.
  std::vector<ManifoldPoint> iterates;
  std::vector<ComplexVec> directions;

  int objective_evals() const;
  int gradient_evals() const;
};

struct SolveResult {
  ManifoldPoint x;
  SolverTrace trace;
};

struct CgOptions {
  ArmijoConfig armijo{};
  BetaRule beta_rule = BetaRule::PolakRibiere;
  bool record_path = false;
};

/// Riemannian conjugate gradient with Armijo backtracking, run for exactly
/// `iterations` steps.
SolveResult rmo_cg(const MuiObjective& obj, const ManifoldPoint& x0, int iterations, const CgOptions& opts = {});

/// Same loop with beta fixed to 0.
SolveResult rmo_gd(const MuiObjective& obj, const ManifoldPoint& x0, int iterations, CgOptions opts = {});

/// Unrolled CG with learned step sizes and direction weights: unit k steps by
/// w_alpha[k] along -grad + w_beta[k] * beta_k * P(d_{k-1}). w_beta[0] has no
/// effect since the first direction is the negative gradient.
SolveResult cepnet_forward(const MuiObjective& obj, const ManifoldPoint& x0, const CepnetParams& params,
                           bool record_path = false);

enum class SolverKind { RmoCg, RmoGd, Cepnet };

std::string to_string(SolverKind k);
SolverKind parse_solver_kind(const std::string& s);

/// A configured precoder, runnable on any (H, s) sample.
struct Precoder {
  std::string name;
  SolverKind kind = SolverKind::RmoCg;
  int iterations = 20;
  CgOptions cg{};
  std::optional<CepnetParams> params;
  InitPolicy init = InitPolicy::MatchedFilter;

  /// `sample_seed` feeds the RandomPhase initializer; unused otherwise.
  SolveResult run(const MuiObjective& obj, std::uint64_t sample_seed, bool record_path = false) const;
};

}  // namespace cep
