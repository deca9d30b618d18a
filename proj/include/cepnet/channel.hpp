#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cepnet/numerics.hpp"

namespace cep {

enum class ChannelKind { Multipath, Rayleigh };

std::string to_string(ChannelKind k);
ChannelKind parse_channel_kind(const std::string& s);

/// Uniform linear array with L far-field paths per user.
struct MultipathConfig {
  std::size_t antennas = 64;  // Nt
  std::size_t users = 16;     // Nu
  std::size_t paths = 8;      // L
  double spacing_ratio = 0.5; // d / lambda

  void validate() const;
};

/// [1, e^{j 2pi (d/lambda) sin(theta)}, ..., e^{j 2pi (d/lambda)(Nt-1) sin(theta)}]
ComplexVec steering_vector(double theta, std::size_t antennas, double spacing_ratio);

/// Each row h^mu = (1/sqrt(L)) sum_l g_l a(theta_l), g_l ~ N_C(0,1),
/// theta_l ~ U[0, pi), drawn independently per user and path.
ComplexMat multipath_channel(const MultipathConfig& cfg, SeededRng& rng);

/// I.i.d. N_C(0,1) entries.
ComplexMat rayleigh_channel(std::size_t users, std::size_t antennas, SeededRng& rng);

/// Unit-average-energy 16-QAM, Gray-coded per axis.
///
/// Point index i = 4*a + b, where a (bits 3..2) selects the in-phase level
/// and b (bits 1..0) the quadrature level. The 2-bit per-axis labels map to
/// levels as 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3, all scaled by 1/sqrt(10),
/// so the 4-bit label of point i is i itself.
namespace qam16 {
inline constexpr std::size_t kOrder = 16;
inline constexpr std::size_t kBitsPerSymbol = 4;
const std::array<cplx, kOrder>& constellation();
/// Index of the closest point; ties go to the lowest index.
std::size_t detect(cplx y);
/// Index of an exact constellation member (nearest point).
inline std::size_t index_of(cplx s) { return detect(s); }
}  // namespace qam16

ComplexVec qam_symbols(SeededRng& rng, std::size_t users);

/// sqrt(1 - eps) H + sqrt(eps) E with E i.i.d. N_C(0,1). eps = 0 returns H
/// unchanged without consuming randomness.
ComplexMat corrupt_channel(const ComplexMat& h, double eps, SeededRng& rng);

struct Sample {
  ComplexVec s;
  ComplexMat h;
};

struct Dataset {
  std::string role;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  /// Fingerprint of all symbol and channel values.
  std::uint64_t hash() const;
};

std::uint64_t sample_hash(const Sample& s);

struct DatasetSizes {
  std::size_t train = 4000;
  std::size_t validation = 2000;
  std::size_t test = 6000;
};

struct DatasetMeta {
  static constexpr int kFormatVersion = 1;
  ChannelKind kind = ChannelKind::Multipath;
  MultipathConfig channel{};
  std::uint64_t seed = 0;
  DatasetSizes sizes{};
  int format_version = kFormatVersion;
};

struct DatasetSplits {
  DatasetMeta meta;
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Draws one sample; each split/index pair has its own derived stream, so
/// the result is independent of generation order and worker count.
Sample draw_sample(ChannelKind kind, const MultipathConfig& cfg, SeededRng& rng);

DatasetSplits build_dataset(ChannelKind kind, const DatasetSizes& sizes, const MultipathConfig& cfg,
                            std::uint64_t seed, unsigned threads = 1);

// CSV container: meta.csv plus train.csv / val.csv / test.csv.
//
// meta.csv is "key,value" rows. Split files have a header row and then one
// row per sample:
//   index, s_0_re, s_0_im, ..., s_{Nu-1}_im,
//   h_0_0_re, h_0_0_im, h_0_1_re, ..., h_{Nu-1}_{Nt-1}_im   (row-major H)
// Values are written with 17 significant digits, so they read back exactly.

void write_dataset(const std::filesystem::path& dir, const DatasetSplits& splits);
DatasetMeta read_dataset_meta(const std::filesystem::path& dir);
/// role is "train", "val" or "test".
Dataset read_dataset_split(const std::filesystem::path& dir, const std::string& role, const DatasetMeta& meta);
std::string split_file_name(const std::string& role);

}  // namespace cep
