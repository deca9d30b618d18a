#include <gtest/gtest.h>

#include "cepnet/eval.hpp"
#include "cepnet/experiment.hpp"
#include "cepnet/solvers.hpp"
#include "test_support.hpp"

namespace cep {
namespace {

using testing::max_abs;
using testing::max_abs_diff;
using testing::multipath_sample;
using testing::random_mat;
using testing::random_point;
using testing::random_vec;

ManifoldPoint mf_point(const MuiObjective& obj) {
  SeededRng rng(0);
  return initial_point(obj, rng, InitPolicy::MatchedFilter);
}

TEST(InitialPoint, RandomPhaseOnManifoldAndDeterministic) {
  SeededRng g(40);
  const ComplexMat h = random_mat(g, 4, 16);
  const ComplexVec s = random_vec(g, 4);
  const MuiObjective obj(h, s);
  for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
    SeededRng a(seed), b(seed);
    const ManifoldPoint x = initial_point(obj, a, InitPolicy::RandomPhase);
    EXPECT_LT(x.max_modulus_deviation(), 1e-12);
    EXPECT_EQ(x, initial_point(obj, b, InitPolicy::RandomPhase));
  }
}

TEST(InitialPoint, MatchedFilterPhase) {
  const ComplexMat h = ComplexMat::identity(1);
  const ComplexVec s{cplx(0, 1)};
  const ManifoldPoint x = mf_point(MuiObjective(h, s));
  EXPECT_NEAR(std::abs(x[0] - cplx(0, 1)), 0.0, 1e-15);
}

TEST(InitialPoint, MatchedFilterZeroEntryFallsBackToPhaseZero) {
  const ComplexMat h(1, 2, {cplx(1, 0), cplx(0, 0)});
  const ComplexVec s{cplx(-1, 0)};
  const ManifoldPoint x = mf_point(MuiObjective(h, s));
  EXPECT_NEAR(std::abs(x[0] - cplx(-M_SQRT1_2, 0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(x[1] - cplx(M_SQRT1_2, 0)), 0.0, 1e-15);
}

TEST(InitPolicy, StringRoundTrip) {
  for (auto p : {InitPolicy::MatchedFilter, InitPolicy::RandomPhase}) EXPECT_EQ(parse_init_policy(to_string(p)), p);
  EXPECT_THROW(parse_init_policy("zeros"), ContractError);
}

TEST(ArmijoConfig, RejectsOutOfRange) {
  EXPECT_THROW((ArmijoConfig{0.0, 0.1, 0.5, 30}.validate()), ContractError);
  EXPECT_THROW((ArmijoConfig{1.0, 0.1, 0.5, 30}.validate()), ContractError);
  EXPECT_THROW((ArmijoConfig{1e-4, 0.1, 1.0, 30}.validate()), ContractError);
  EXPECT_THROW((ArmijoConfig{1e-4, -1.0, 0.5, 30}.validate()), ContractError);
  EXPECT_THROW((ArmijoConfig{1e-4, 0.1, 0.5, 0}.validate()), ContractError);
  EXPECT_NO_THROW(ArmijoConfig{}.validate());
}

TEST(Armijo, TinyInitialStepAcceptedImmediately) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Sample smp = multipath_sample(100 + seed);
    const MuiObjective obj(smp.h, smp.s);
    const ManifoldPoint x = mf_point(obj);
    const Evaluation e = evaluate(obj, x);
    const TangentVector d{ComplexVec(e.riemannian.z)};
    TangentVector neg{ComplexVec(d.z.size())};
    for (std::size_t n = 0; n < d.size(); ++n) neg.z[n] = -d.z[n];
    ArmijoConfig cfg;
    cfg.alpha_init = 1e-6;
    const ArmijoResult r = armijo_step(obj, x, neg, e.riemannian, cfg, e.value);
    EXPECT_EQ(r.evals, 1);
    EXPECT_EQ(r.alpha, 1e-6);
    EXPECT_FALSE(r.truncated);
  }
}

TEST(Armijo, StationaryPointAcceptsFirstCandidate) {
  // Exactly representable fit, so f(x) = 0 and g = 0 hold without rounding.
  const ComplexMat h(2, 2, {cplx(1, 0), cplx(0, 0), cplx(0, 0), cplx(0, 2)});
  const ComplexVec s{cplx(M_SQRT1_2, 0), cplx(-M_SQRT2, 0)};
  const ManifoldPoint x(ComplexVec{cplx(M_SQRT1_2, 0), cplx(0, M_SQRT1_2)});
  const MuiObjective obj(h, s);
  const Evaluation e = evaluate(obj, x);
  ASSERT_EQ(e.value, 0.0);
  ASSERT_EQ(testing::max_abs(e.riemannian.z), 0.0);
  const TangentVector d{ComplexVec(2)};
  const ArmijoResult r = armijo_step(obj, x, d, e.riemannian, ArmijoConfig{}, e.value);
  EXPECT_EQ(r.evals, 1);
  EXPECT_EQ(r.alpha, 0.1);
  EXPECT_FALSE(r.truncated);
}

// First m in 0..max_backtracks with f(R(alpha_m d)) - f(x) <= c1 alpha_m <g,d>,
// found by evaluating every candidate.
std::pair<double, bool> scan_oracle(const MuiObjective& obj, const ManifoldPoint& x, const TangentVector& d,
                                    const TangentVector& g, const ArmijoConfig& cfg) {
  const double fx = mui(obj, x);
  double slope = 0.0;
  for (std::size_t n = 0; n < d.size(); ++n)
    slope += g.z[n].real() * d.z[n].real() + g.z[n].imag() * d.z[n].imag();
  std::vector<double> alphas;
  std::vector<bool> ok;
  for (int m = 0; m <= cfg.max_backtracks; ++m) {
    const double a = cfg.alpha_init * std::pow(cfg.tau, m);
    ComplexVec step(d.z);
    for (auto& z : step) z *= a;
    alphas.push_back(a);
    ok.push_back(mui(obj, retract(x, step)) - fx <= cfg.c1 * a * slope);
  }
  for (std::size_t i = 0; i < alphas.size(); ++i)
    if (ok[i]) return {alphas[i], false};
  return {alphas.back(), true};
}

TEST(Armijo, MatchesExhaustiveScan) {
  SeededRng g(42);
  for (int t = 0; t < 40; ++t) {
    const Sample smp = multipath_sample(200 + t);
    const MuiObjective obj(smp.h, smp.s);
    const ManifoldPoint x = random_point(g, 64);
    const Evaluation e = evaluate(obj, x);
    // Mix of descent and random tangent directions.
    TangentVector d = project_to_tangent(x, random_vec(g, 64));
    if (t % 2 == 0)
      for (std::size_t n = 0; n < 64; ++n) d.z[n] = -e.riemannian.z[n];
    ArmijoConfig cfg;
    cfg.max_backtracks = 12;
    const ArmijoResult r = armijo_step(obj, x, d, e.riemannian, cfg, e.value);
    const auto [alpha, truncated] = scan_oracle(obj, x, d, e.riemannian, cfg);
    EXPECT_NEAR(r.alpha, alpha, std::abs(alpha) * 1e-14);
    EXPECT_EQ(r.truncated, truncated);
  }
}

TEST(Armijo, AscentDirectionTruncates) {
  const Sample smp = multipath_sample(300);
  const MuiObjective obj(smp.h, smp.s);
  const ManifoldPoint x = mf_point(obj);
  const Evaluation e = evaluate(obj, x);
  ArmijoConfig cfg;
  cfg.max_backtracks = 5;
  const ArmijoResult r = armijo_step(obj, x, e.riemannian, e.riemannian, cfg, e.value);
  EXPECT_TRUE(r.truncated);
  EXPECT_EQ(r.evals, 6);
  EXPECT_DOUBLE_EQ(r.alpha, 0.1 * std::pow(0.5, 5));
}

TEST(PolakRibiere, GuardForcesZero) {
  const TangentVector g{ComplexVec{cplx(1, 1)}};
  const TangentVector zero{ComplexVec{cplx(0, 0)}};
  EXPECT_EQ(polak_ribiere(g, zero, zero), 0.0);
}

TEST(PolakRibiere, HandValue) {
  const TangentVector g{ComplexVec{cplx(1, 2), cplx(0, 1)}};
  const TangentVector gt{ComplexVec{cplx(1, 0), cplx(0, 0)}};
  const TangentVector gp{ComplexVec{cplx(2, 0), cplx(0, 0)}};
  // Re{g^H (g - gt)} = Re{(1-2j)(2j) + (-j)(j)} = 4 + 1 = 5 ; ||gp||^2 = 4
  EXPECT_DOUBLE_EQ(polak_ribiere(g, gt, gp), 1.25);
}

TEST(RmoCg, FixedPointStaysAtZero) {
  const ComplexMat h = ComplexMat::identity(1);
  const ComplexVec s{cplx(1, 0)};
  const MuiObjective obj(h, s);
  const ManifoldPoint x0(ComplexVec{cplx(1, 0)});
  for (const SolveResult& r : {rmo_cg(obj, x0, 10), rmo_gd(obj, x0, 10)}) {
    for (const auto& it : r.trace.iterations) {
      EXPECT_EQ(it.mui, 0.0);
      EXPECT_EQ(it.beta, 0.0);
    }
    EXPECT_EQ(r.trace.final_mui, 0.0);
    EXPECT_EQ(r.x, x0);
  }
}

TEST(RmoCg, TraceShapeAndCounts) {
  const Sample smp = multipath_sample(400);
  const MuiObjective obj(smp.h, smp.s);
  CgOptions opts;
  opts.record_path = true;
  const SolveResult r = rmo_cg(obj, mf_point(obj), 20, opts);
  ASSERT_EQ(r.trace.iterations.size(), 20u);
  ASSERT_EQ(r.trace.iterates.size(), 21u);
  ASSERT_EQ(r.trace.directions.size(), 20u);
  EXPECT_EQ(r.trace.gradient_evals(), 20);
  EXPECT_GE(r.trace.objective_evals(), 20);
  for (const auto& it : r.trace.iterations) EXPECT_GE(it.objective_evals, 1);
  EXPECT_EQ(r.trace.final_mui, mui(obj, r.x));
  EXPECT_EQ(r.x, r.trace.iterates.back());
}

TEST(RmoCg, FirstDirectionIsNegativeGradient) {
  const Sample smp = multipath_sample(401);
  const MuiObjective obj(smp.h, smp.s);
  const ManifoldPoint x0 = mf_point(obj);
  CgOptions opts;
  opts.record_path = true;
  const SolveResult r = rmo_cg(obj, x0, 3, opts);
  const TangentVector g = riemannian_grad(obj, x0);
  for (std::size_t n = 0; n < g.size(); ++n) EXPECT_EQ(r.trace.directions[0][n], -g.z[n]);
}

TEST(RmoCg, IteratesOnManifoldAndDirectionsTangent) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Sample smp = multipath_sample(500 + seed);
    const MuiObjective obj(smp.h, smp.s);
    CgOptions opts;
    opts.record_path = true;
    const SolveResult r = rmo_cg(obj, mf_point(obj), 20, opts);
    for (std::size_t k = 0; k < 20; ++k) {
      EXPECT_LT(r.trace.iterates[k].max_modulus_deviation(), 1e-9);
      EXPECT_LT(TangentVector{r.trace.directions[k]}.residual(r.trace.iterates[k]), 1e-6);
    }
  }
}

TEST(RmoCg, MostlyMonotone) {
  int steps = 0, monotone = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Sample smp = multipath_sample(1000 + seed);
    const MuiObjective obj(smp.h, smp.s);
    const SolveResult r = rmo_cg(obj, mf_point(obj), 20);
    const auto& it = r.trace.iterations;
    for (std::size_t k = 0; k < it.size(); ++k) {
      const double next = k + 1 < it.size() ? it[k + 1].mui : r.trace.final_mui;
      ++steps;
      monotone += next <= it[k].mui;
    }
  }
  EXPECT_GE(monotone, 0.95 * steps) << monotone << " of " << steps;
}

TEST(RmoGd, MatchesCgWhenBetaIsZero) {
  // K = 1: the only direction is -grad, so both solvers agree bitwise.
  const Sample smp = multipath_sample(600);
  const MuiObjective obj(smp.h, smp.s);
  const ManifoldPoint x0 = mf_point(obj);
  EXPECT_EQ(rmo_cg(obj, x0, 1).x, rmo_gd(obj, x0, 1).x);
  CgOptions zero;
  zero.beta_rule = BetaRule::Zero;
  EXPECT_EQ(rmo_cg(obj, x0, 20, zero).x, rmo_gd(obj, x0, 20).x);
}

TEST(RmoGd, CgWinsMajority) {
  int cg_better = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Sample smp = multipath_sample(2000 + seed);
    const MuiObjective obj(smp.h, smp.s);
    const ManifoldPoint x0 = mf_point(obj);
    cg_better += rmo_gd(obj, x0, 20).trace.final_mui >= rmo_cg(obj, x0, 20).trace.final_mui;
  }
  EXPECT_GT(cg_better, 100);
}

TEST(Cepnet, ZeroStepsReturnStart) {
  const Sample smp = multipath_sample(700);
  const MuiObjective obj(smp.h, smp.s);
  const ManifoldPoint x0 = mf_point(obj);
  const SolveResult r = cepnet_forward(obj, x0, CepnetParams(std::vector<double>(5, 0.0), std::vector<double>(5, 1.0)));
  EXPECT_LT(max_abs_diff(r.x.vec(), x0.vec()), 1e-15);
}

TEST(Cepnet, FixedPointStays) {
  const ComplexMat h = ComplexMat::identity(1);
  const ComplexVec s{cplx(1, 0)};
  const MuiObjective obj(h, s);
  const ManifoldPoint x0(ComplexVec{cplx(1, 0)});
  const SolveResult r = cepnet_forward(obj, x0, CepnetParams({0.1, 0.2, 0.3}, {1.0, 1.0, 1.0}));
  EXPECT_EQ(r.x, x0);
  for (const auto& it : r.trace.iterations) EXPECT_EQ(it.beta, 0.0);
}

TEST(Cepnet, CountsKGradientsAndNoLineSearch) {
  const Sample smp = multipath_sample(701);
  const MuiObjective obj(smp.h, smp.s);
  const SolveResult r = cepnet_forward(obj, mf_point(obj), CepnetParams(std::vector<double>(20, 0.01), std::vector<double>(20, 1.0)));
  EXPECT_EQ(r.trace.iterations.size(), 20u);
  EXPECT_EQ(r.trace.gradient_evals(), 20);
  EXPECT_EQ(r.trace.objective_evals(), 0);
}

TEST(Cepnet, ReproducesRmoCgTrajectory) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Sample smp = multipath_sample(800 + seed);
    const MuiObjective obj(smp.h, smp.s);
    const ManifoldPoint x0 = mf_point(obj);
    CgOptions opts;
    opts.record_path = true;
    const SolveResult cg = rmo_cg(obj, x0, 20, opts);
    std::vector<double> alpha;
    for (const auto& it : cg.trace.iterations) alpha.push_back(it.step_size);
    const SolveResult net = cepnet_forward(obj, x0, CepnetParams(alpha, std::vector<double>(20, 1.0)), true);
    ASSERT_EQ(net.trace.iterates.size(), cg.trace.iterates.size());
    for (std::size_t k = 0; k < cg.trace.iterates.size(); ++k)
      EXPECT_LT(max_abs_diff(net.trace.iterates[k].vec(), cg.trace.iterates[k].vec()), 1e-10);
  }
}

TEST(Cepnet, DeterministicTraces) {
  const Sample smp = multipath_sample(702);
  const MuiObjective obj(smp.h, smp.s);
  const CepnetParams p(std::vector<double>(20, 0.02), std::vector<double>(20, 0.7));
  const SolveResult a = cepnet_forward(obj, mf_point(obj), p, true);
  const SolveResult b = cepnet_forward(obj, mf_point(obj), p, true);
  EXPECT_EQ(a.x, b.x);
  for (std::size_t k = 0; k < 20; ++k) {
    EXPECT_EQ(a.trace.iterations[k].beta, b.trace.iterations[k].beta);
    EXPECT_EQ(a.trace.directions[k], b.trace.directions[k]);
  }
}

TEST(CepnetParams, Validation) {
  EXPECT_THROW(CepnetParams({}, {}), ContractError);
  EXPECT_THROW(CepnetParams({0.1}, {1.0, 1.0}), ContractError);
  EXPECT_THROW(CepnetParams({NAN}, {1.0}), ContractError);
  EXPECT_NO_THROW(CepnetParams({-0.1}, {-3.0}));
  const CepnetParams p({0.1, 0.2}, {1.0, 2.0});
  EXPECT_EQ(p.flat(), (std::vector<double>{0.1, 0.2, 1.0, 2.0}));
  EXPECT_EQ(CepnetParams::from_flat(p.flat()), p);
}

TEST(Precoder, KMismatchNamesBothValues) {
  const Sample smp = multipath_sample(703);
  const MuiObjective obj(smp.h, smp.s);
  Precoder p{"cepnet", SolverKind::Cepnet, 20, {}, CepnetParams(std::vector<double>(10, 0.01), std::vector<double>(10, 1.0)), InitPolicy::MatchedFilter};
  try {
    p.run(obj, 0);
    FAIL() << "expected ContractError";
  } catch (const ContractError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("K=10"), std::string::npos) << msg;
    EXPECT_NE(msg.find("K=20"), std::string::npos) << msg;
  }
}

TEST(Precoder, SolverKindStrings) {
  for (auto k : {SolverKind::RmoCg, SolverKind::RmoGd, SolverKind::Cepnet}) EXPECT_EQ(parse_solver_kind(to_string(k)), k);
  EXPECT_THROW(parse_solver_kind("sgd"), ContractError);
}

// Regression pin: rmo_cg average MUI on the desk test split.
TEST(Golden, RmoCgDeskTestMui) {
  const ExperimentConfig cfg = load_config(std::string(CEPNET_SOURCE_DIR) + "/configs/desk.json");
  const DatasetSplits splits = build_dataset(cfg.channel_kind, cfg.sizes, cfg.channel, cfg.data_seed(), 2);
  ExperimentConfig only_cg = cfg;
  only_cg.solvers = {SolverKind::RmoCg};
  const Estimate e = avg_mui_db(only_cg.precoders(std::nullopt).front(), splits.test, cfg.eval_options(2));
  EXPECT_NEAR(e.value, -16.3165, 0.1);
}

}  // namespace
}  // namespace cep
