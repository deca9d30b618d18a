#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cepnet/channel.hpp"
#include "cepnet/solvers.hpp"

namespace cep {

/// SNR points in dB. With unit-energy symbols and unit transmit power the
/// per-user noise variance is sigma^2 = 10^(-SNR/10).
struct SnrGrid {
  std::vector<double> points_db;

  void validate() const;
  static double noise_variance(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }
};

inline constexpr const char* kRateLabel = "SINR-surrogate rate";
inline constexpr const char* kReportConvention =
    "unit-energy 16-QAM symbols; Pt=1; sigma^2=10^(-SNR/10) per user; nearest-point detection on y=Hx+n; "
    "rate_m=log2(1+E|s_m|^2/(E|(Hx)_m-s_m|^2+sigma^2)) (SINR-surrogate rate)";

struct EvalOptions {
  std::uint64_t x0_seed = 0;     // RandomPhase initial points
  std::uint64_t noise_seed = 1;  // BER noise and channel-error draws
  unsigned threads = 1;
  /// Contiguous sample blocks used for the rate confidence interval.
  std::size_t rate_blocks = 20;
  /// BER stopping rule: keep making passes over the dataset with fresh noise
  /// until this many bit errors are seen or max passes are used.
  std::size_t ber_min_errors = 100;
  std::size_t ber_max_passes = 20;
};

/// A precoder's output on every sample of a dataset, evaluated on the true
/// channel.
struct PrecodedSet {
  std::string solver;
  const Dataset* data = nullptr;
  std::vector<ComplexVec> received;  // H x per sample (noise-free)
  std::vector<double> residual;      // ||Hx - s||^2 per sample
  std::vector<int> objective_evals;
  std::vector<int> gradient_evals;
  std::vector<double> seconds;       // wall-clock per solve (non-normative)
};

/// Runs the precoder on each sample. When `estimates` is given, sample i is
/// precoded on (*estimates)[i] but received through the true channel.
PrecodedSet precode_dataset(const Precoder& precoder, const Dataset& data, const EvalOptions& opts,
                            const std::vector<ComplexMat>* estimates = nullptr);

/// MUI and rate cells computed from fewer samples are flagged unreliable.
inline constexpr std::size_t kMinMetricSamples = 1000;

struct Estimate {
  double value = 0.0;
  double ci = 0.0;  // 95% half-width
  std::size_t n = 0;
  bool reliable = true;
};

/// Mean residual per user in dB; CI by the delta method on the per-sample
/// mean. Returns kLossDbFloor-style -inf when every residual is zero.
Estimate mui_db(const PrecodedSet& set);
/// SINR-surrogate rate in bits/s/Hz/user, CI from block means.
Estimate achievable_rate(const PrecodedSet& set, double snr_db, std::size_t blocks = 20);
/// Monte-Carlo BER with Gray-coded 16-QAM and nearest-point detection;
/// unreliable when fewer than min_errors errors were seen.
Estimate bit_error_rate(const PrecodedSet& set, double snr_db, std::uint64_t noise_seed, std::size_t min_errors,
                        std::size_t max_passes, unsigned threads = 1);

/// BER of y = s + n with no precoding, over `symbols` i.i.d. 16-QAM draws.
Estimate awgn_bypass_ber(double snr_db, std::size_t symbols, std::uint64_t seed);

// Convenience wrappers taking a precoder directly.
Estimate avg_mui_db(const Precoder& p, const Dataset& data, const EvalOptions& opts);
Estimate achievable_rate(const Precoder& p, const Dataset& data, double snr_db, const EvalOptions& opts);
Estimate ber(const Precoder& p, const Dataset& data, double snr_db, const EvalOptions& opts);

struct MetricCell {
  std::optional<double> eps;
  std::optional<double> snr_db;
  std::string solver;
  std::string metric;
  Estimate estimate;
};

struct MetricReport {
  std::string title;
  std::vector<MetricCell> cells;

  /// Columns: [eps,][snr_db,]solver,metric,value,ci,n,status. eps and snr_db
  /// appear when any cell carries them.
  std::string to_csv() const;
  std::string to_table() const;
};

MetricReport mui_report(const std::vector<PrecodedSet>& sets);
MetricReport rate_vs_snr(const std::vector<PrecodedSet>& sets, const SnrGrid& grid, const EvalOptions& opts);
MetricReport ber_vs_snr(const std::vector<PrecodedSet>& sets, const SnrGrid& grid, const EvalOptions& opts);

/// For each eps: precode on sqrt(1-eps) H + sqrt(eps) E (the same E for every
/// solver), evaluate MUI, rate and BER on the true H at snr_db.
MetricReport robustness_sweep(const std::vector<Precoder>& precoders, const Dataset& data,
                              const std::vector<double>& eps_grid, double snr_db, const EvalOptions& opts);

struct ComplexityRow {
  std::string solver;
  std::size_t solves = 0;
  double mean_objective_evals = 0.0;
  int min_objective_evals = 0;
  int max_objective_evals = 0;
  double mean_gradient_evals = 0.0;
  int min_gradient_evals = 0;
  int max_gradient_evals = 0;
  /// 2 per gradient (H x and H^H r) plus 1 per objective evaluation.
  double mean_matvecs = 0.0;
  double median_seconds = 0.0;  // local, non-normative
};

struct ComplexityReport {
  std::vector<ComplexityRow> rows;

  /// One row per solver. For every other solver B the row carries
  /// matvec_ratio_vs_B and time_ratio_vs_B (this solver / B).
  std::string to_csv(bool include_timing = true) const;
  std::string to_table() const;
};

ComplexityReport complexity_report(const std::vector<PrecodedSet>& sets);

}  // namespace cep
