#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "cepnet/channel.hpp"
#include "test_support.hpp"

namespace cep {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cepnet_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

TEST(Steering, BroadsideIsAllOnes) {
  const ComplexVec a = steering_vector(0.0, 8, 0.5);
  for (const auto& z : a) EXPECT_EQ(z, cplx(1, 0));
}

TEST(Steering, EndfireHalfWavelength) {
  const ComplexVec a = steering_vector(M_PI / 2, 2, 0.5);
  EXPECT_EQ(a[0], cplx(1, 0));
  EXPECT_NEAR(std::abs(a[1] - cplx(-1, 0)), 0.0, 1e-15);
}

TEST(Steering, UnitModulusAndProgressivePhase) {
  SeededRng rng(50);
  for (int t = 0; t < 100; ++t) {
    const double theta = rng.uniform(0.0, M_PI);
    const ComplexVec a = steering_vector(theta, 64, 0.5);
    EXPECT_EQ(a[0], cplx(1, 0));
    for (std::size_t n = 0; n < 64; ++n) {
      EXPECT_NEAR(std::abs(a[n]), 1.0, 1e-15);
      const cplx want = std::polar(1.0, 2.0 * M_PI * 0.5 * static_cast<double>(n) * std::sin(theta));
      EXPECT_NEAR(std::abs(a[n] - want), 0.0, 1e-12);
    }
  }
}

TEST(MultipathConfig, Validation) {
  EXPECT_NO_THROW(MultipathConfig{}.validate());
  EXPECT_THROW((MultipathConfig{16, 16, 8, 0.5}.validate()), ContractError);
  EXPECT_THROW((MultipathConfig{16, 20, 8, 0.5}.validate()), ContractError);
  EXPECT_THROW((MultipathConfig{64, 16, 0, 0.5}.validate()), ContractError);
  EXPECT_THROW((MultipathConfig{64, 16, 8, 0.0}.validate()), ContractError);
  try {
    MultipathConfig{16, 20, 8, 0.5}.validate();
  } catch (const ContractError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("16"), std::string::npos);
    EXPECT_NE(msg.find("20"), std::string::npos);
  }
}

TEST(Multipath, SinglePathRowIsScaledSteeringVector) {
  SeededRng rng(51);
  const MultipathConfig cfg{32, 4, 1, 0.5};
  for (int t = 0; t < 20; ++t) {
    const ComplexMat h = multipath_channel(cfg, rng);
    for (std::size_t m = 0; m < cfg.users; ++m) {
      const auto row = h.row(m);
      const cplx step = row[1] / row[0];
      EXPECT_NEAR(std::abs(step), 1.0, 1e-12);
      // sin(theta) >= 0 on [0, pi): the per-antenna phase lies in [0, pi].
      EXPECT_GE(std::arg(step), -1e-12);
      for (std::size_t n = 1; n < cfg.antennas; ++n) EXPECT_NEAR(std::abs(row[n] - row[n - 1] * step), 0.0, 1e-10);
    }
  }
}

TEST(Multipath, EntryVarianceNearOne) {
  SeededRng rng(52);
  const MultipathConfig cfg{8, 2, 8, 0.5};
  double e11 = 0.0, row_energy = 0.0;
  const int n = 10000;
  for (int t = 0; t < n; ++t) {
    const ComplexMat h = multipath_channel(cfg, rng);
    e11 += std::norm(h(0, 0));
    for (std::size_t c = 0; c < cfg.antennas; ++c) row_energy += std::norm(h(1, c));
  }
  EXPECT_GE(e11 / n, 0.95);
  EXPECT_LE(e11 / n, 1.05);
  EXPECT_NEAR(row_energy / n / 8.0, 1.0, 0.05);
}

TEST(Multipath, Deterministic) {
  SeededRng a(53), b(53);
  EXPECT_EQ(multipath_channel(MultipathConfig{}, a), multipath_channel(MultipathConfig{}, b));
}

TEST(Rayleigh, VarianceAndCorrelation) {
  SeededRng rng(54);
  const int n = 100000;
  double v = 0.0;
  cplx corr = 0.0;
  for (int t = 0; t < n; ++t) {
    const ComplexMat h = rayleigh_channel(1, 2, rng);
    v += std::norm(h(0, 0));
    corr += h(0, 0) * std::conj(h(0, 1));
  }
  EXPECT_NEAR(v / n, 1.0, 0.05);
  EXPECT_LT(std::abs(corr / static_cast<double>(n)), 0.02);
}

TEST(Rayleigh, Deterministic) {
  SeededRng a(55), b(55);
  EXPECT_EQ(rayleigh_channel(4, 8, a), rayleigh_channel(4, 8, b));
}

TEST(Qam, UnitMeanEnergyExactly) {
  double e = 0.0;
  for (const auto& c : qam16::constellation()) e += std::norm(c);
  // 4 * 2 * (1 + 9) / 10 / 16 = 1 summed per axis.
  EXPECT_NEAR(e / 16.0, 1.0, 1e-15);
}

TEST(Qam, SymmetricUnderRotationAndConjugation) {
  const auto& c = qam16::constellation();
  for (const auto& p : c) {
    for (const cplx q : {p * cplx(0, 1), std::conj(p)}) {
      bool found = false;
      for (const auto& r : c) found |= std::abs(r - q) < 1e-15;
      EXPECT_TRUE(found);
    }
  }
}

TEST(Qam, GrayNeighboursDifferByOneBit) {
  const auto& c = qam16::constellation();
  const double d = 2.0 / std::sqrt(10.0);
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 16; ++j)
      if (std::abs(std::abs(c[i] - c[j]) - d) < 1e-12) EXPECT_EQ(std::popcount(i ^ j), 1) << i << " " << j;
}

TEST(Qam, DetectRecoversPointsAndBreaksTiesLow) {
  const auto& c = qam16::constellation();
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(qam16::detect(c[i]), i);
  // Midpoint of two horizontally adjacent points: the lower index wins.
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = i + 1; j < 16; ++j)
      if (std::abs(std::abs(c[i] - c[j]) - 2.0 / std::sqrt(10.0)) < 1e-12)
        EXPECT_EQ(qam16::detect(0.5 * (c[i] + c[j])), i);
  EXPECT_EQ(qam16::detect(cplx(0, 0)), qam16::detect(cplx(-0.0, -0.0)));
}

TEST(Qam, SymbolsAreMembersAndUniform) {
  SeededRng rng(56);
  const auto& c = qam16::constellation();
  std::vector<int> hist(16, 0);
  const int n = 100000;
  for (int t = 0; t < n / 10; ++t) {
    for (const auto& s : qam_symbols(rng, 10)) {
      const std::size_t i = qam16::detect(s);
      ASSERT_EQ(s, c[i]);
      ++hist[i];
    }
  }
  const double p = 1.0 / 16, sigma = std::sqrt(n * p * (1 - p));
  for (int h : hist) EXPECT_LT(std::abs(h - n * p), 3 * sigma);
}

TEST(Corrupt, ZeroEpsIsBitwiseIdentity) {
  SeededRng g(57);
  const ComplexMat h = testing::random_mat(g, 4, 8);
  SeededRng rng(1);
  EXPECT_EQ(corrupt_channel(h, 0.0, rng), h);
}

TEST(Corrupt, UnitEpsIgnoresChannel) {
  SeededRng g(58);
  const ComplexMat h1 = testing::random_mat(g, 4, 8), h2 = testing::random_mat(g, 4, 8);
  SeededRng a(9), b(9);
  EXPECT_EQ(corrupt_channel(h1, 1.0, a), corrupt_channel(h2, 1.0, b));
}

TEST(Corrupt, VariancePreservedAtHalf) {
  SeededRng g(59), rng(60);
  double v = 0.0;
  const int n = 10000;
  for (int t = 0; t < n; ++t) {
    const ComplexMat h = rayleigh_channel(1, 1, g);
    v += std::norm(corrupt_channel(h, 0.5, rng)(0, 0));
  }
  EXPECT_NEAR(v / n, 1.0, 0.05);
}

TEST(Corrupt, ContinuousAtZero) {
  SeededRng g(61), rng(62);
  for (double eps : {1e-3, 1e-6}) {
    for (int t = 0; t < 20; ++t) {
      const ComplexMat h = rayleigh_channel(16, 64, g);
      const ComplexMat hh = corrupt_channel(h, eps, rng);
      double diff = 0.0;
      for (std::size_t i = 0; i < h.values().size(); ++i) diff += std::norm(hh.values()[i] - h.values()[i]);
      EXPECT_LE(std::sqrt(diff / frobenius_sq(h)), 2.0 * std::sqrt(eps));
    }
  }
}

TEST(Corrupt, RejectsEpsOutOfRange) {
  SeededRng rng(1);
  EXPECT_THROW(corrupt_channel(ComplexMat(1, 1), -0.1, rng), ContractError);
  EXPECT_THROW(corrupt_channel(ComplexMat(1, 1), 1.1, rng), ContractError);
}

TEST(Dataset, SizesUniquenessAndDeterminism) {
  const DatasetSizes sizes{400, 200, 600};
  const DatasetSplits a = build_dataset(ChannelKind::Multipath, sizes, MultipathConfig{}, 77);
  EXPECT_EQ(a.train.size(), 400u);
  EXPECT_EQ(a.validation.size(), 200u);
  EXPECT_EQ(a.test.size(), 600u);
  std::set<std::uint64_t> hashes;
  for (const auto* d : {&a.train, &a.validation, &a.test})
    for (const auto& s : d->samples) hashes.insert(sample_hash(s));
  EXPECT_EQ(hashes.size(), 1200u);
  const DatasetSplits b = build_dataset(ChannelKind::Multipath, sizes, MultipathConfig{}, 77, 3);
  EXPECT_EQ(a.train.hash(), b.train.hash());
  EXPECT_EQ(a.test.hash(), b.test.hash());
  const DatasetSplits c = build_dataset(ChannelKind::Multipath, sizes, MultipathConfig{}, 78);
  EXPECT_NE(a.train.hash(), c.train.hash());
}

TEST(Dataset, RayleighKind) {
  const DatasetSplits a = build_dataset(ChannelKind::Rayleigh, {10, 10, 10}, MultipathConfig{}, 5);
  EXPECT_EQ(a.meta.kind, ChannelKind::Rayleigh);
  EXPECT_EQ(a.train.samples[0].h.rows(), 16u);
  EXPECT_EQ(parse_channel_kind(to_string(ChannelKind::Rayleigh)), ChannelKind::Rayleigh);
  EXPECT_THROW(parse_channel_kind("awgn"), ContractError);
}

TEST(Dataset, FileRoundTripIsExact) {
  const fs::path dir = scratch_dir("dataset");
  const MultipathConfig cfg{12, 3, 4, 0.5};
  const DatasetSplits a = build_dataset(ChannelKind::Multipath, {7, 5, 6}, cfg, 99);
  write_dataset(dir, a);
  for (const char* f : {"meta.csv", "train.csv", "val.csv", "test.csv"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  const DatasetMeta meta = read_dataset_meta(dir);
  EXPECT_EQ(meta.seed, 99u);
  EXPECT_EQ(meta.channel.antennas, 12u);
  EXPECT_EQ(meta.channel.users, 3u);
  EXPECT_EQ(meta.channel.paths, 4u);
  EXPECT_EQ(meta.sizes.test, 6u);
  const Dataset train = read_dataset_split(dir, "train", meta);
  const Dataset test = read_dataset_split(dir, "test", meta);
  EXPECT_EQ(train.hash(), a.train.hash());
  EXPECT_EQ(test.hash(), a.test.hash());
  for (std::size_t i = 0; i < train.size(); ++i) {
    EXPECT_EQ(train.samples[i].h, a.train.samples[i].h);
    EXPECT_EQ(train.samples[i].s, a.train.samples[i].s);
  }
  fs::remove_all(dir);
}

TEST(Dataset, CorruptFileRejected) {
  const fs::path dir = scratch_dir("dataset_bad");
  const DatasetSplits a = build_dataset(ChannelKind::Multipath, {2, 2, 2}, MultipathConfig{8, 2, 2, 0.5}, 3);
  write_dataset(dir, a);
  const DatasetMeta meta = read_dataset_meta(dir);
  {
    std::ofstream out(dir / "val.csv", std::ios::app);
    out << "2,1,2,3\n";
  }
  EXPECT_THROW(read_dataset_split(dir, "val", meta), IoError);
  EXPECT_THROW(read_dataset_meta(dir / "missing"), IoError);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace cep
