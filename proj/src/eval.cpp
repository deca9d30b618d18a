#include "cepnet/eval.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <numbers>

#include "cepnet/learning.hpp"
#include "csv_util.hpp"

namespace cep {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractError(what);
}

constexpr double kZ95 = 1.959963984540054;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::size_t users_of(const PrecodedSet& set) {
  require(set.data != nullptr && !set.data->empty(), "eval: precoded set has no data");
  return set.data->samples.front().s.size();
}

// Per-user signal and interference energies summed over samples [begin, end).
double block_rate(const PrecodedSet& set, std::size_t begin, std::size_t end, double noise) {
  const std::size_t nu = users_of(set);
  std::vector<double> sig(nu, 0.0), inter(nu, 0.0);
  for (std::size_t i = begin; i < end; ++i) {
    const auto& s = set.data->samples[i].s;
    for (std::size_t m = 0; m < nu; ++m) {
      sig[m] += std::norm(s[m]);
      inter[m] += std::norm(set.received[i][m] - s[m]);
    }
  }
  const double count = static_cast<double>(end - begin);
  double rate = 0.0;
  for (std::size_t m = 0; m < nu; ++m) rate += std::log2(1.0 + (sig[m] / count) / (inter[m] / count + noise));
  return rate / static_cast<double>(nu);
}

}  // namespace

void SnrGrid::validate() const {
  require(!points_db.empty(), "SnrGrid: no points");
  for (std::size_t i = 0; i < points_db.size(); ++i) {
    require(std::isfinite(points_db[i]), "SnrGrid: points must be finite");
    if (i > 0) require(points_db[i] > points_db[i - 1], "SnrGrid: points must be strictly increasing");
  }
}

PrecodedSet precode_dataset(const Precoder& precoder, const Dataset& data, const EvalOptions& opts,
                            const std::vector<ComplexMat>* estimates) {
  require(!data.empty(), "precode_dataset: dataset must be nonempty");
  if (estimates) require(estimates->size() == data.size(), "precode_dataset: one estimate per sample required");
  const std::size_t n = data.size();
  PrecodedSet out;
  out.solver = precoder.name;
  out.data = &data;
  out.received.resize(n);
  out.residual.resize(n);
  out.objective_evals.resize(n);
  out.gradient_evals.resize(n);
  out.seconds.resize(n);
  parallel_for(n, opts.threads, [&](std::size_t i) {
    const Sample& smp = data.samples[i];
    const ComplexMat& design = estimates ? (*estimates)[i] : smp.h;
    const MuiObjective obj(design, smp.s);
    const auto t0 = std::chrono::steady_clock::now();
    const SolveResult res = precoder.run(obj, sample_seed(opts.x0_seed, i));
    const auto t1 = std::chrono::steady_clock::now();
    out.seconds[i] = std::chrono::duration<double>(t1 - t0).count();
    out.received[i] = matvec(smp.h, res.x.vec());
    out.residual[i] = estimates ? mui(MuiObjective(smp.h, smp.s), res.x) : res.trace.final_mui;
    out.objective_evals[i] = res.trace.objective_evals();
    out.gradient_evals[i] = res.trace.gradient_evals();
  });
  return out;
}

Estimate mui_db(const PrecodedSet& set) {
  const std::size_t nu = users_of(set);
  Estimate e;
  e.n = set.residual.size();
  e.value = mean_residual_db(set.residual, nu);
  std::vector<double> per_user(set.residual.size());
  for (std::size_t i = 0; i < per_user.size(); ++i) per_user[i] = set.residual[i] / static_cast<double>(nu);
  const double m = mean_of(per_user);
  const double se = sample_sd(per_user, m) / std::sqrt(static_cast<double>(per_user.size()));
  e.ci = m > 0.0 ? 10.0 / std::numbers::ln10 * kZ95 * se / m : 0.0;
  e.reliable = e.n >= kMinMetricSamples;
  return e;
}

Estimate achievable_rate(const PrecodedSet& set, double snr_db, std::size_t blocks) {
  require(std::isfinite(snr_db), "achievable_rate: snr_db must be finite");
  const std::size_t n = set.received.size();
  const double noise = SnrGrid::noise_variance(snr_db);
  Estimate e;
  e.n = n;
  e.value = block_rate(set, 0, n, noise);
  e.reliable = n >= kMinMetricSamples;
  blocks = std::min(blocks, n);
  if (blocks >= 2) {
    std::vector<double> rates;
    for (std::size_t b = 0; b < blocks; ++b) rates.push_back(block_rate(set, b * n / blocks, (b + 1) * n / blocks, noise));
    e.ci = kZ95 * sample_sd(rates, mean_of(rates)) / std::sqrt(static_cast<double>(blocks));
  }
  return e;
}

Estimate bit_error_rate(const PrecodedSet& set, double snr_db, std::uint64_t noise_seed, std::size_t min_errors,
                        std::size_t max_passes, unsigned threads) {
  require(max_passes >= 1, "ber: max_passes must be positive");
  const std::size_t nu = users_of(set);
  const std::size_t n = set.received.size();
  const double sd = std::sqrt(SnrGrid::noise_variance(snr_db));
  const std::uint64_t cell_seed = mix_seed(noise_seed, std::bit_cast<std::uint64_t>(snr_db));
  std::uint64_t errors = 0;
  std::uint64_t bits = 0;
  std::vector<std::uint64_t> per(n);
  for (std::size_t pass = 0; pass < max_passes; ++pass) {
    const std::uint64_t pass_seed = mix_seed(cell_seed, pass);
    parallel_for(n, threads, [&](std::size_t i) {
      SeededRng rng = SeededRng::derive(pass_seed, i);
      const auto& s = set.data->samples[i].s;
      std::uint64_t err = 0;
      for (std::size_t m = 0; m < nu; ++m) {
        const cplx y = set.received[i][m] + sd * rng.complex_gaussian();
        const std::size_t tx = qam16::index_of(s[m]);
        const std::size_t rx = qam16::detect(y);
        err += static_cast<std::uint64_t>(std::popcount(tx ^ rx));
      }
      per[i] = err;
    });
    for (std::uint64_t e : per) errors += e;
    bits += static_cast<std::uint64_t>(n * nu * qam16::kBitsPerSymbol);
    if (errors >= min_errors) break;
  }
  Estimate e;
  e.n = bits;
  e.value = static_cast<double>(errors) / static_cast<double>(bits);
  e.ci = kZ95 * std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(bits));
  e.reliable = errors >= min_errors;
  return e;
}

Estimate awgn_bypass_ber(double snr_db, std::size_t symbols, std::uint64_t seed) {
  require(symbols >= 1, "awgn_bypass_ber: need at least one symbol");
  const double sd = std::sqrt(SnrGrid::noise_variance(snr_db));
  const auto& c = qam16::constellation();
  SeededRng rng(seed);
  std::uint64_t errors = 0;
  for (std::size_t i = 0; i < symbols; ++i) {
    const std::size_t tx = rng.below(qam16::kOrder);
    const cplx y = c[tx] + sd * rng.complex_gaussian();
    errors += static_cast<std::uint64_t>(std::popcount(tx ^ qam16::detect(y)));
  }
  Estimate e;
  e.n = symbols * qam16::kBitsPerSymbol;
  e.value = static_cast<double>(errors) / static_cast<double>(e.n);
  e.ci = kZ95 * std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(e.n));
  return e;
}

Estimate avg_mui_db(const Precoder& p, const Dataset& data, const EvalOptions& opts) {
  return mui_db(precode_dataset(p, data, opts));
}

Estimate achievable_rate(const Precoder& p, const Dataset& data, double snr_db, const EvalOptions& opts) {
  return achievable_rate(precode_dataset(p, data, opts), snr_db, opts.rate_blocks);
}

Estimate ber(const Precoder& p, const Dataset& data, double snr_db, const EvalOptions& opts) {
  require(opts.ber_min_errors >= 100, "ber: min_errors must be at least 100 for reportable cells");
  return bit_error_rate(precode_dataset(p, data, opts), snr_db, opts.noise_seed, opts.ber_min_errors,
                        opts.ber_max_passes, opts.threads);
}

std::string MetricReport::to_csv() const {
  const bool has_eps = std::any_of(cells.begin(), cells.end(), [](const auto& c) { return c.eps.has_value(); });
  const bool has_snr = std::any_of(cells.begin(), cells.end(), [](const auto& c) { return c.snr_db.has_value(); });
  std::string out;
  if (has_eps) out += "eps,";
  if (has_snr) out += "snr_db,";
  out += "solver,metric,value,ci,n,status\n";
  for (const auto& c : cells) {
    if (has_eps) out += (c.eps ? num(*c.eps) : "") + ",";
    if (has_snr) out += (c.snr_db ? num(*c.snr_db) : "") + ",";
    out += c.solver + "," + c.metric + "," + num(c.estimate.value) + "," + num(c.estimate.ci) + "," +
           std::to_string(c.estimate.n) + "," + (c.estimate.reliable ? "ok" : "UNRELIABLE") + "\n";
  }
  return out;
}

std::string MetricReport::to_table() const {
  std::string out = title + "\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "  %-8s %-8s %-10s %-10s %14s %12s %10s\n", "eps", "snr_db", "solver", "metric",
                "value", "+/-ci", "n");
  out += buf;
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof buf, "  %-8s %-8s %-10s %-10s %14.6g %12.4g %10zu%s\n",
                  c.eps ? num(*c.eps).c_str() : "-", c.snr_db ? num(*c.snr_db).c_str() : "-", c.solver.c_str(),
                  c.metric.c_str(), c.estimate.value, c.estimate.ci, c.estimate.n,
                  c.estimate.reliable ? "" : "  UNRELIABLE");
    out += buf;
  }
  return out;
}

MetricReport mui_report(const std::vector<PrecodedSet>& sets) {
  MetricReport r{"Average MUI (dB)", {}};
  for (const auto& s : sets) r.cells.push_back({std::nullopt, std::nullopt, s.solver, "mui_db", mui_db(s)});
  return r;
}

MetricReport rate_vs_snr(const std::vector<PrecodedSet>& sets, const SnrGrid& grid, const EvalOptions& opts) {
  grid.validate();
  MetricReport r{std::string("Average ") + kRateLabel + " vs SNR (bits/s/Hz/user)", {}};
  for (double snr : grid.points_db)
    for (const auto& s : sets) r.cells.push_back({std::nullopt, snr, s.solver, "rate", achievable_rate(s, snr, opts.rate_blocks)});
  return r;
}

MetricReport ber_vs_snr(const std::vector<PrecodedSet>& sets, const SnrGrid& grid, const EvalOptions& opts) {
  grid.validate();
  MetricReport r{"BER vs SNR", {}};
  for (double snr : grid.points_db)
    for (const auto& s : sets)
      r.cells.push_back({std::nullopt, snr, s.solver, "ber",
                         bit_error_rate(s, snr, opts.noise_seed, opts.ber_min_errors, opts.ber_max_passes, opts.threads)});
  return r;
}

MetricReport robustness_sweep(const std::vector<Precoder>& precoders, const Dataset& data,
                              const std::vector<double>& eps_grid, double snr_db, const EvalOptions& opts) {
  require(!data.empty(), "robustness_sweep: dataset must be nonempty");
  for (double e : eps_grid) require(e >= 0.0 && e <= 1.0, "robustness_sweep: eps values must lie in [0,1]");
  MetricReport r{"Robustness to channel estimation error at SNR " + num(snr_db) + " dB", {}};
  const std::uint64_t error_seed = mix_seed(opts.noise_seed, 0xE5);
  for (std::size_t ei = 0; ei < eps_grid.size(); ++ei) {
    const double eps = eps_grid[ei];
    std::vector<ComplexMat> estimates(data.size());
    const std::uint64_t eps_seed = mix_seed(error_seed, std::bit_cast<std::uint64_t>(eps));
    parallel_for(data.size(), opts.threads, [&](std::size_t i) {
      SeededRng rng = SeededRng::derive(eps_seed, i);
      estimates[i] = corrupt_channel(data.samples[i].h, eps, rng);
    });
    for (const auto& p : precoders) {
      const PrecodedSet set = precode_dataset(p, data, opts, &estimates);
      r.cells.push_back({eps, snr_db, p.name, "mui_db", mui_db(set)});
      r.cells.push_back({eps, snr_db, p.name, "rate", achievable_rate(set, snr_db, opts.rate_blocks)});
      r.cells.push_back({eps, snr_db, p.name, "ber",
                         bit_error_rate(set, snr_db, opts.noise_seed, opts.ber_min_errors, opts.ber_max_passes,
                                        opts.threads)});
    }
  }
  return r;
}

ComplexityReport complexity_report(const std::vector<PrecodedSet>& sets) {
  ComplexityReport rep;
  for (const auto& s : sets) {
    require(!s.objective_evals.empty(), "complexity_report: empty precoded set");
    ComplexityRow row;
    row.solver = s.solver;
    row.solves = s.objective_evals.size();
    const auto [omin, omax] = std::minmax_element(s.objective_evals.begin(), s.objective_evals.end());
    const auto [gmin, gmax] = std::minmax_element(s.gradient_evals.begin(), s.gradient_evals.end());
    row.min_objective_evals = *omin;
    row.max_objective_evals = *omax;
    row.min_gradient_evals = *gmin;
    row.max_gradient_evals = *gmax;
    double osum = 0.0, gsum = 0.0;
    for (std::size_t i = 0; i < row.solves; ++i) {
      osum += s.objective_evals[i];
      gsum += s.gradient_evals[i];
    }
    row.mean_objective_evals = osum / static_cast<double>(row.solves);
    row.mean_gradient_evals = gsum / static_cast<double>(row.solves);
    row.mean_matvecs = 2.0 * row.mean_gradient_evals + row.mean_objective_evals;
    std::vector<double> secs = s.seconds;
    std::nth_element(secs.begin(), secs.begin() + static_cast<std::ptrdiff_t>(secs.size() / 2), secs.end());
    row.median_seconds = secs[secs.size() / 2];
    rep.rows.push_back(row);
  }
  return rep;
}

std::string ComplexityReport::to_csv(bool include_timing) const {
  std::string out =
      "solver,solves,mean_objective_evals,min_objective_evals,max_objective_evals,mean_gradient_evals,"
      "min_gradient_evals,max_gradient_evals,mean_matvecs";
  if (include_timing) out += ",median_seconds";
  for (const auto& b : rows) {
    out += ",matvec_ratio_vs_" + b.solver;
    if (include_timing) out += ",time_ratio_vs_" + b.solver;
  }
  out += "\n";
  for (const auto& a : rows) {
    out += a.solver + "," + std::to_string(a.solves) + "," + num(a.mean_objective_evals) + "," +
           std::to_string(a.min_objective_evals) + "," + std::to_string(a.max_objective_evals) + "," +
           num(a.mean_gradient_evals) + "," + std::to_string(a.min_gradient_evals) + "," +
           std::to_string(a.max_gradient_evals) + "," + num(a.mean_matvecs);
    if (include_timing) out += "," + num(a.median_seconds);
    for (const auto& b : rows) {
      out += "," + num(a.mean_matvecs / b.mean_matvecs);
      if (include_timing) out += "," + num(b.median_seconds > 0.0 ? a.median_seconds / b.median_seconds : 0.0);
    }
    out += "\n";
  }
  return out;
}

std::string ComplexityReport::to_table() const {
  std::string out = "Computational overhead per solve (wall-clock is local and non-normative)\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "  %-10s %8s %12s %12s %12s %14s\n", "solver", "solves", "obj_evals", "grad_evals",
                "matvecs", "median_us");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "  %-10s %8zu %12.2f %12.2f %12.2f %14.2f\n", r.solver.c_str(), r.solves,
                  r.mean_objective_evals, r.mean_gradient_evals, r.mean_matvecs, r.median_seconds * 1e6);
    out += buf;
  }
  for (const auto& a : rows)
    for (const auto& b : rows) {
      if (&a == &b) continue;
      std::snprintf(buf, sizeof buf, "  %s / %s: matvec ratio %.3f, time ratio %.3f\n", a.solver.c_str(),
                    b.solver.c_str(), a.mean_matvecs / b.mean_matvecs,
                    b.median_seconds > 0.0 ? a.median_seconds / b.median_seconds : 0.0);
      out += buf;
    }
  return out;
}

}  // namespace cep
