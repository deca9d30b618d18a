#include "cepnet/channel.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include "csv_util.hpp"

namespace cep {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractError(what);
}

constexpr std::uint64_t kSplitTrain = 1;
constexpr std::uint64_t kSplitValidation = 2;
constexpr std::uint64_t kSplitTest = 3;

Dataset generate_split(const std::string& role, std::uint64_t split_id, std::size_t n, ChannelKind kind,
                       const MultipathConfig& cfg, std::uint64_t seed, unsigned threads) {
  Dataset ds;
  ds.role = role;
  ds.samples.resize(n);
  const std::uint64_t split_seed = mix_seed(seed, split_id);
  parallel_for(n, threads, [&](std::size_t i) {
    SeededRng rng = SeededRng::derive(split_seed, i);
    ds.samples[i] = draw_sample(kind, cfg, rng);
  });
  return ds;
}

std::uint64_t hash_values(const std::vector<cplx>& v, std::uint64_t h) {
  return fnv1a(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(v.data()),
                                               v.size() * sizeof(cplx)),
               h);
}

}  // namespace

std::string to_string(ChannelKind k) { return k == ChannelKind::Multipath ? "multipath" : "rayleigh"; }

ChannelKind parse_channel_kind(const std::string& s) {
  if (s == "multipath") return ChannelKind::Multipath;
  if (s == "rayleigh") return ChannelKind::Rayleigh;
  throw ContractError("unknown channel kind '" + s + "' (expected multipath or rayleigh)");
}

void MultipathConfig::validate() const {
  require(antennas >= 1, "channel: Nt must be at least 1");
  require(users >= 1, "channel: Nu must be at least 1");
  require(users < antennas, "channel: the system model needs Nu < Nt (got Nu=" + std::to_string(users) +
                                ", Nt=" + std::to_string(antennas) + ")");
  require(paths >= 1, "channel: L must be at least 1");
  require(spacing_ratio > 0.0 && std::isfinite(spacing_ratio), "channel: spacing_ratio must be positive");
}

ComplexVec steering_vector(double theta, std::size_t antennas, double spacing_ratio) {
  require(antennas >= 1, "steering_vector: Nt must be at least 1");
  const double phase = 2.0 * std::numbers::pi * spacing_ratio * std::sin(theta);
  ComplexVec a(antennas);
  a[0] = 1.0;
  for (std::size_t n = 1; n < antennas; ++n) {
    const double ph = phase * static_cast<double>(n);
    a[n] = {std::cos(ph), std::sin(ph)};
  }
  return a;
}

ComplexMat multipath_channel(const MultipathConfig& cfg, SeededRng& rng) {
  cfg.validate();
  ComplexMat h(cfg.users, cfg.antennas);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.paths));
  for (std::size_t mu = 0; mu < cfg.users; ++mu) {
    auto row = h.row(mu);
    for (std::size_t l = 0; l < cfg.paths; ++l) {
      const cplx g = rng.complex_gaussian() * scale;
      const double theta = rng.uniform(0.0, std::numbers::pi);
      const ComplexVec a = steering_vector(theta, cfg.antennas, cfg.spacing_ratio);
      for (std::size_t n = 0; n < cfg.antennas; ++n) row[n] += g * a[n];
    }
  }
  return h;
}

ComplexMat rayleigh_channel(std::size_t users, std::size_t antennas, SeededRng& rng) {
  require(users >= 1 && antennas >= 1, "rayleigh_channel: dimensions must be positive");
  ComplexMat h(users, antennas);
  for (std::size_t r = 0; r < users; ++r)
    for (std::size_t c = 0; c < antennas; ++c) h(r, c) = rng.complex_gaussian();
  return h;
}

namespace qam16 {

const std::array<cplx, kOrder>& constellation() {
  static const std::array<cplx, kOrder> points = [] {
    // Gray label (2 bits) -> amplitude level.
    constexpr double level[4] = {-3.0, -1.0, 3.0, 1.0};
    const double scale = 1.0 / std::sqrt(10.0);
    std::array<cplx, kOrder> p{};
    for (std::size_t i = 0; i < kOrder; ++i) p[i] = {level[i >> 2] * scale, level[i & 3] * scale};
    return p;
  }();
  return points;
}

std::size_t detect(cplx y) {
  const auto& c = constellation();
  std::size_t best = 0;
  double best_d = std::norm(y - c[0]);
  for (std::size_t i = 1; i < kOrder; ++i) {
    const double d = std::norm(y - c[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace qam16

ComplexVec qam_symbols(SeededRng& rng, std::size_t users) {
  require(users >= 1, "qam_symbols: Nu must be at least 1");
  const auto& c = qam16::constellation();
  ComplexVec s(users);
  for (auto& v : s) v = c[rng.below(qam16::kOrder)];
  return s;
}

ComplexMat corrupt_channel(const ComplexMat& h, double eps, SeededRng& rng) {
  require(eps >= 0.0 && eps <= 1.0, "corrupt_channel: eps must lie in [0,1]");
  if (eps == 0.0) return h;
  const double keep = std::sqrt(1.0 - eps);
  const double mix = std::sqrt(eps);
  ComplexMat out(h.rows(), h.cols());
  for (std::size_t r = 0; r < h.rows(); ++r)
    for (std::size_t c = 0; c < h.cols(); ++c) out(r, c) = keep * h(r, c) + mix * rng.complex_gaussian();
  return out;
}

std::uint64_t sample_hash(const Sample& s) { return hash_values(s.h.values(), hash_values(s.s.values(), 0xcbf29ce484222325ULL)); }

std::uint64_t Dataset::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& smp : samples) h = hash_values(smp.h.values(), hash_values(smp.s.values(), h));
  return h;
}

Sample draw_sample(ChannelKind kind, const MultipathConfig& cfg, SeededRng& rng) {
  Sample smp;
  smp.s = qam_symbols(rng, cfg.users);
  smp.h = kind == ChannelKind::Multipath ? multipath_channel(cfg, rng) : rayleigh_channel(cfg.users, cfg.antennas, rng);
  return smp;
}

DatasetSplits build_dataset(ChannelKind kind, const DatasetSizes& sizes, const MultipathConfig& cfg,
                            std::uint64_t seed, unsigned threads) {
  cfg.validate();
  require(sizes.train > 0 && sizes.validation > 0 && sizes.test > 0, "build_dataset: split sizes must be positive");
  DatasetSplits out;
  out.meta = DatasetMeta{kind, cfg, seed, sizes, DatasetMeta::kFormatVersion};
  out.train = generate_split("train", kSplitTrain, sizes.train, kind, cfg, seed, threads);
  out.validation = generate_split("val", kSplitValidation, sizes.validation, kind, cfg, seed, threads);
  out.test = generate_split("test", kSplitTest, sizes.test, kind, cfg, seed, threads);
  return out;
}

std::string split_file_name(const std::string& role) {
  if (role == "train" || role == "val" || role == "test") return role + ".csv";
  throw ContractError("unknown dataset split '" + role + "'");
}

namespace {

std::string split_csv(const Dataset& ds, const MultipathConfig& cfg) {
  std::string out;
  out += "index";
  for (std::size_t m = 0; m < cfg.users; ++m) out += ",s_" + std::to_string(m) + "_re,s_" + std::to_string(m) + "_im";
  for (std::size_t m = 0; m < cfg.users; ++m)
    for (std::size_t n = 0; n < cfg.antennas; ++n) {
      const std::string tag = "h_" + std::to_string(m) + "_" + std::to_string(n);
      out += "," + tag + "_re," + tag + "_im";
    }
  out += '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out += std::to_string(i);
    for (const cplx& v : ds.samples[i].s) out += "," + csv::exact(v.real()) + "," + csv::exact(v.imag());
    for (const cplx& v : ds.samples[i].h.values()) out += "," + csv::exact(v.real()) + "," + csv::exact(v.imag());
    out += '\n';
  }
  return out;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const DatasetSplits& splits) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());
  const auto& m = splits.meta;
  std::string meta = "key,value\n";
  meta += "format_version," + std::to_string(m.format_version) + "\n";
  meta += "kind," + to_string(m.kind) + "\n";
  meta += "Nt," + std::to_string(m.channel.antennas) + "\n";
  meta += "Nu," + std::to_string(m.channel.users) + "\n";
  meta += "L," + std::to_string(m.channel.paths) + "\n";
  meta += "spacing_ratio," + csv::exact(m.channel.spacing_ratio) + "\n";
  meta += "seed," + std::to_string(m.seed) + "\n";
  meta += "train_size," + std::to_string(m.sizes.train) + "\n";
  meta += "val_size," + std::to_string(m.sizes.validation) + "\n";
  meta += "test_size," + std::to_string(m.sizes.test) + "\n";
  meta += "symbol_energy,1\n";
  csv::write_atomic(dir / "train.csv", split_csv(splits.train, m.channel));
  csv::write_atomic(dir / "val.csv", split_csv(splits.validation, m.channel));
  csv::write_atomic(dir / "test.csv", split_csv(splits.test, m.channel));
  csv::write_atomic(dir / "meta.csv", meta);
}

DatasetMeta read_dataset_meta(const std::filesystem::path& dir) {
  const auto path = dir / "meta.csv";
  auto in = csv::open_in(path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 2) throw IoError(path.string() + ": malformed row '" + line + "'");
    kv[f[0]] = f[1];
  }
  auto get = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw IoError(path.string() + ": missing key '" + k + "'");
    return it->second;
  };
  const std::string where = path.string();
  DatasetMeta m;
  m.format_version = static_cast<int>(csv::to_u64(get("format_version"), where));
  if (m.format_version != DatasetMeta::kFormatVersion)
    throw IoError(where + ": unsupported format_version " + std::to_string(m.format_version));
  m.kind = parse_channel_kind(get("kind"));
  m.channel.antennas = csv::to_u64(get("Nt"), where);
  m.channel.users = csv::to_u64(get("Nu"), where);
  m.channel.paths = csv::to_u64(get("L"), where);
  m.channel.spacing_ratio = csv::to_double(get("spacing_ratio"), where);
  m.seed = csv::to_u64(get("seed"), where);
  m.sizes.train = csv::to_u64(get("train_size"), where);
  m.sizes.validation = csv::to_u64(get("val_size"), where);
  m.sizes.test = csv::to_u64(get("test_size"), where);
  return m;
}

Dataset read_dataset_split(const std::filesystem::path& dir, const std::string& role, const DatasetMeta& meta) {
  const auto path = dir / split_file_name(role);
  auto in = csv::open_in(path);
  const std::size_t nu = meta.channel.users;
  const std::size_t nt = meta.channel.antennas;
  const std::size_t expected = 1 + 2 * nu + 2 * nu * nt;
  Dataset ds;
  ds.role = role;
  std::string line;
  std::getline(in, line);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    const std::string where = path.string() + " row " + std::to_string(row + 1);
    if (f.size() != expected)
      throw IoError(where + ": expected " + std::to_string(expected) + " columns, got " + std::to_string(f.size()));
    if (csv::to_u64(f[0], where) != row) throw IoError(where + ": sample index out of sequence");
    Sample smp;
    smp.s = ComplexVec(nu);
    std::size_t c = 1;
    for (std::size_t m = 0; m < nu; ++m, c += 2) smp.s[m] = {csv::to_double(f[c], where), csv::to_double(f[c + 1], where)};
    std::vector<cplx> hv(nu * nt);
    for (auto& v : hv) {
      v = {csv::to_double(f[c], where), csv::to_double(f[c + 1], where)};
      c += 2;
    }
    smp.h = ComplexMat(nu, nt, std::move(hv));
    ds.samples.push_back(std::move(smp));
    ++row;
  }
  return ds;
}

}  // namespace cep
