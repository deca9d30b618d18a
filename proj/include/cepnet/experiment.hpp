#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cepnet/channel.hpp"
#include "cepnet/eval.hpp"
#include "cepnet/learning.hpp"
#include "cepnet/solvers.hpp"

namespace cep {

/// Malformed, incomplete or inconsistent experiment configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EvalSettings {
  SnrGrid snr{{-5.0, 0.0, 5.0, 10.0, 15.0, 20.0}};
  std::vector<double> eps_grid{0.0, 0.1, 0.3, 0.5, 1.0};
  double robustness_snr_db = 20.0;
  std::size_t rate_blocks = 20;
  std::size_t ber_min_errors = 100;
  std::size_t ber_max_passes = 20;
};

/// Everything needed to rerun an experiment. Stage seeds are derived from
/// the single master `seed`.
struct ExperimentConfig {
  std::string name = "experiment";
  ChannelKind channel_kind = ChannelKind::Multipath;
  MultipathConfig channel{};
  DatasetSizes sizes{};
  std::vector<SolverKind> solvers{SolverKind::RmoCg, SolverKind::RmoGd, SolverKind::Cepnet};
  ArmijoConfig armijo{};
  BetaRule beta_rule = BetaRule::PolakRibiere;
  int units = 20;
  InitPolicy init = InitPolicy::MatchedFilter;
  TrainConfig train{};
  EvalSettings eval{};
  std::uint64_t seed = 1;
  std::string output_dir = "runs/experiment";

  /// Throws ConfigError naming the offending field.
  void validate() const;

  std::uint64_t data_seed() const;
  std::uint64_t train_seed() const;
  std::uint64_t x0_seed() const;
  std::uint64_t noise_seed() const;

  /// TrainConfig with units, seed and x0 policy filled in from this config.
  TrainConfig resolved_train(unsigned threads) const;
  EvalOptions eval_options(unsigned threads) const;
  bool uses_cepnet() const;
  /// Precoders for every configured solver; params required when cepnet is
  /// selected.
  std::vector<Precoder> precoders(const std::optional<CepnetParams>& params) const;
};

/// JSON text with every field present, keys in fixed order.
std::string to_json_text(const ExperimentConfig& cfg);
/// Parses and validates. Unknown keys are rejected; absent keys keep their
/// defaults.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::uint64_t config_hash(const ExperimentConfig& cfg);

std::string to_string(BetaRule r);
BetaRule parse_beta_rule(const std::string& s);

extern const char* const kCodeVersion;

}  // namespace cep
