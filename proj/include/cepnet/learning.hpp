#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cepnet/channel.hpp"
#include "cepnet/solvers.hpp"

namespace cep {

/// Raised when training loss climbs past the divergence guard.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Returned by the dB losses when the summed residual is exactly zero.
inline constexpr double kLossDbFloor = -std::numeric_limits<double>::infinity();

/// How each sample's x0 is chosen. For RandomPhase, sample i uses the stream
/// sample_seed(x0_seed, i), so every loss evaluation on that sample sees the
/// same starting point (common random numbers).
struct ForwardContext {
  InitPolicy init = InitPolicy::MatchedFilter;
  std::uint64_t x0_seed = 0;
  unsigned threads = 1;
};

/// 10 log10( sum(residual_sq) / (count * users) ).
double mean_residual_db(std::span<const double> residual_sq, std::size_t users);

/// Per-sample ||H g(s; H; params) - s||^2 for the selected sample indices.
std::vector<double> cepnet_residuals(const CepnetParams& params, const Dataset& data,
                                     std::span<const std::size_t> indices, const ForwardContext& ctx);

/// The unsupervised dB-scale MUI loss over a batch (selected indices of
/// `data`). An empty index span selects the whole dataset.
double loss_db(const CepnetParams& params, const Dataset& data, std::span<const std::size_t> indices,
               const ForwardContext& ctx);
double loss_db(const CepnetParams& params, const Dataset& data, const ForwardContext& ctx);

/// Central differences of loss_db over the 2K scalars, ordered as
/// CepnetParams::flat(). 4K loss evaluations.
std::vector<double> grad_params_fd(const CepnetParams& params, const Dataset& data,
                                   std::span<const std::size_t> indices, const ForwardContext& ctx, double fd_step);

struct LossAndGradient {
  double loss_db = 0.0;
  std::vector<double> grad;  // ordered as CepnetParams::flat()
};

/// Exact gradient of loss_db by reverse-mode differentiation through the
/// unrolled network. One forward and one backward sweep per sample.
LossAndGradient grad_params_adjoint(const CepnetParams& params, const Dataset& data,
                                    std::span<const std::size_t> indices, const ForwardContext& ctx);

/// Single-sample f = ||H x_K - s||^2 and df/dtheta, for tests.
LossAndGradient sample_residual_gradient(const CepnetParams& params, const MuiObjective& obj, const ManifoldPoint& x0);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  static AdamState zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }
};

struct AdamStep {
  AdamState state;
  CepnetParams params;
  /// Non-finite gradient: state and params returned unchanged.
  bool rejected = false;
};

AdamStep adam_update(const AdamState& state, const CepnetParams& params, std::span<const double> grad, double lr,
                     const AdamConfig& cfg = {});

enum class GradientMethod { Adjoint, FiniteDifference };

std::string to_string(GradientMethod m);
GradientMethod parse_gradient_method(const std::string& s);

struct TrainConfig {
  int units = 20;  // K
  int epochs = 100;
  double learning_rate = 2e-4;
  std::size_t batch_size = 400;
  AdamConfig adam{};
  double fd_step = 1e-5;
  std::uint64_t seed = 1;
  GradientMethod gradient = GradientMethod::Adjoint;
  InitPolicy init = InitPolicy::MatchedFilter;
  double alpha_init_low = 3e-3;
  double alpha_init_high = 2e-2;
  double divergence_db = 10.0;
  unsigned threads = 1;

  void validate(std::size_t train_size) const;
};

struct EpochRecord {
  int epoch = 0;
  /// Mean of the per-minibatch losses seen during the epoch (pre-update).
  double train_batch_mean_db = 0.0;
  /// Loss over the whole training set after the epoch's updates.
  double train_epoch_db = 0.0;
  double val_db = 0.0;
  double best_val_db = 0.0;
  int rejected_updates = 0;
};

struct TrainResult {
  /// Parameters with the lowest validation loss (initialization included).
  CepnetParams best;
  CepnetParams last;
  double initial_train_db = 0.0;
  double initial_val_db = 0.0;
  std::vector<EpochRecord> history;
};

/// w_alpha ~ U[alpha_init_low, alpha_init_high), w_beta = 1.
CepnetParams initialize_params(const TrainConfig& cfg);

/// Minibatch Adam on the dB loss. Starts from `start` when given, otherwise
/// from initialize_params(cfg). `on_epoch` sees each record as it is made.
TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const std::optional<CepnetParams>& start = std::nullopt,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// Parameter file:
//   format_version,1
//   K,<K>
//   x0_policy,<matched_filter|random_phase>
//   seed,<u64>
//   k,w_alpha,w_beta
//   0,<%.17e>,<%.17e>
//   ...                                     (K rows)

struct ParamsFileHeader {
  static constexpr int kFormatVersion = 1;
  InitPolicy init = InitPolicy::MatchedFilter;
  std::uint64_t seed = 0;
  int format_version = kFormatVersion;
};

void write_params_csv(const std::filesystem::path& path, const CepnetParams& params, const ParamsFileHeader& header);
std::string params_csv(const CepnetParams& params, const ParamsFileHeader& header);
CepnetParams read_params_csv(const std::filesystem::path& path, ParamsFileHeader* header = nullptr);

/// epoch,train_batch_mean_db,train_epoch_db,val_db,best_val_db,rejected_updates
std::string history_csv(const TrainResult& result);

}  // namespace cep
