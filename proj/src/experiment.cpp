#include "cepnet/experiment.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#ifndef CEPNET_VERSION
#define CEPNET_VERSION "unknown"
#endif

namespace cep {

const char* const kCodeVersion = CEPNET_VERSION;

namespace {

using nlohmann::ordered_json;

void check(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

// Reads keys out of one JSON object and rejects any it was not asked about.
class Section {
 public:
  Section(const ordered_json& j, std::string path) : j_(j), path_(std::move(path)) {
    check(j_.is_object(), "config: '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config: '" + where(key) + "' has the wrong type");
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const ordered_json& at(const char* key) const { return j_.at(key); }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      check(seen_.count(k) > 0, "config: unknown key '" + where(k) + "'");
  }

 private:
  const ordered_json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Parse>
auto parse_enum(Section& s, const char* key, Parse parse, decltype(parse(std::string())) fallback) {
  std::string text;
  s.get(key, text);
  if (text.empty()) return fallback;
  try {
    return parse(text);
  } catch (const ContractError& e) {
    throw ConfigError("config: '" + s.where(key) + "': " + e.what());
  }
}

}  // namespace

std::string to_string(BetaRule r) {
  switch (r) {
    case BetaRule::PolakRibiere:
      return "polak_ribiere";
    case BetaRule::PolakRibierePlus:
      return "polak_ribiere_plus";
    case BetaRule::Zero:
      return "zero";
  }
  return "?";
}

BetaRule parse_beta_rule(const std::string& s) {
  if (s == "polak_ribiere") return BetaRule::PolakRibiere;
  if (s == "polak_ribiere_plus") return BetaRule::PolakRibierePlus;
  if (s == "zero") return BetaRule::Zero;
  throw ContractError("unknown beta rule '" + s + "' (expected polak_ribiere, polak_ribiere_plus or zero)");
}

void ExperimentConfig::validate() const {
  check(!name.empty(), "config: name must be nonempty");
  check(!output_dir.empty(), "config: output_dir must be nonempty");
  auto wrap = [](const auto& fn) {
    try {
      fn();
    } catch (const ContractError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  };
  wrap([&] { channel.validate(); });
  check(sizes.train >= 1 && sizes.validation >= 1 && sizes.test >= 1, "config: every dataset split must be nonempty");
  check(!solvers.empty(), "config: at least one solver is required");
  for (std::size_t i = 0; i < solvers.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      check(solvers[i] != solvers[j], "config: solver '" + to_string(solvers[i]) + "' listed twice");
  wrap([&] { armijo.validate(); });
  check(units >= 1, "config: units (K) must be at least 1");
  wrap([&] { resolved_train(1).validate(sizes.train); });
  wrap([&] { eval.snr.validate(); });
  for (double e : eval.eps_grid) check(e >= 0.0 && e <= 1.0, "config: eval.eps values must lie in [0,1]");
  check(std::isfinite(eval.robustness_snr_db), "config: eval.robustness_snr_db must be finite");
  check(eval.rate_blocks >= 2 && eval.rate_blocks <= sizes.test, "config: eval.rate_blocks must lie in [2, test size]");
  check(eval.ber_min_errors >= 100, "config: eval.ber_min_errors must be at least 100");
  check(eval.ber_max_passes >= 1, "config: eval.ber_max_passes must be positive");
}

std::uint64_t ExperimentConfig::data_seed() const { return mix_seed(seed, 0x44415441); }
std::uint64_t ExperimentConfig::train_seed() const { return mix_seed(seed, 0x54524e); }
std::uint64_t ExperimentConfig::x0_seed() const { return mix_seed(seed, 0x5830); }
std::uint64_t ExperimentConfig::noise_seed() const { return mix_seed(seed, 0x4e4f4953); }

TrainConfig ExperimentConfig::resolved_train(unsigned threads) const {
  TrainConfig t = train;
  t.units = units;
  t.seed = train_seed();
  t.init = init;
  t.threads = threads;
  return t;
}

EvalOptions ExperimentConfig::eval_options(unsigned threads) const {
  EvalOptions o;
  o.x0_seed = x0_seed();
  o.noise_seed = noise_seed();
  o.threads = threads;
  o.rate_blocks = eval.rate_blocks;
  o.ber_min_errors = eval.ber_min_errors;
  o.ber_max_passes = eval.ber_max_passes;
  return o;
}

bool ExperimentConfig::uses_cepnet() const {
  for (SolverKind k : solvers)
    if (k == SolverKind::Cepnet) return true;
  return false;
}

std::vector<Precoder> ExperimentConfig::precoders(const std::optional<CepnetParams>& params) const {
  std::vector<Precoder> out;
  for (SolverKind k : solvers) {
    Precoder p;
    p.name = to_string(k);
    p.kind = k;
    p.iterations = units;
    p.cg.armijo = armijo;
    p.cg.beta_rule = beta_rule;
    p.init = init;
    if (k == SolverKind::Cepnet) {
      check(params.has_value(), "config: cepnet selected but no parameters supplied");
      check(static_cast<int>(params->units()) == units, "parameter K=" + std::to_string(params->units()) +
                                                            " does not match configured K=" + std::to_string(units));
      p.params = params;
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::string to_json_text(const ExperimentConfig& c) {
  ordered_json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["channel"] = {{"kind", to_string(c.channel_kind)},
                  {"antennas", c.channel.antennas},
                  {"users", c.channel.users},
                  {"paths", c.channel.paths},
                  {"spacing_ratio", c.channel.spacing_ratio}};
  j["dataset"] = {{"train", c.sizes.train}, {"validation", c.sizes.validation}, {"test", c.sizes.test}};
  std::vector<std::string> solvers;
  for (SolverKind k : c.solvers) solvers.push_back(to_string(k));
  j["solvers"] = solvers;
  j["units"] = c.units;
  j["x0_policy"] = to_string(c.init);
  j["beta_rule"] = to_string(c.beta_rule);
  j["armijo"] = {{"c1", c.armijo.c1},
                 {"alpha_init", c.armijo.alpha_init},
                 {"tau", c.armijo.tau},
                 {"max_backtracks", c.armijo.max_backtracks}};
  const TrainConfig& t = c.train;
  j["train"] = {{"epochs", t.epochs},
                {"learning_rate", t.learning_rate},
                {"batch_size", t.batch_size},
                {"adam", {{"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"eps", t.adam.eps}}},
                {"gradient", to_string(t.gradient)},
                {"fd_step", t.fd_step},
                {"alpha_init_low", t.alpha_init_low},
                {"alpha_init_high", t.alpha_init_high},
                {"divergence_db", t.divergence_db}};
  j["eval"] = {{"snr_db", c.eval.snr.points_db},
               {"eps", c.eval.eps_grid},
               {"robustness_snr_db", c.eval.robustness_snr_db},
               {"rate_blocks", c.eval.rate_blocks},
               {"ber_min_errors", c.eval.ber_min_errors},
               {"ber_max_passes", c.eval.ber_max_passes}};
  return j.dump(2) + "\n";
}

ExperimentConfig parse_config_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section root(j, "");
  root.get("name", c.name);
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);
  root.get("units", c.units);
  c.init = parse_enum(root, "x0_policy", parse_init_policy, c.init);
  c.beta_rule = parse_enum(root, "beta_rule", parse_beta_rule, c.beta_rule);

  if (root.has("channel")) {
    Section s(root.at("channel"), "channel");
    c.channel_kind = parse_enum(s, "kind", parse_channel_kind, c.channel_kind);
    s.get("antennas", c.channel.antennas);
    s.get("users", c.channel.users);
    s.get("paths", c.channel.paths);
    s.get("spacing_ratio", c.channel.spacing_ratio);
    s.finish();
  }
  if (root.has("dataset")) {
    Section s(root.at("dataset"), "dataset");
    s.get("train", c.sizes.train);
    s.get("validation", c.sizes.validation);
    s.get("test", c.sizes.test);
    s.finish();
  }
  if (root.has("solvers")) {
    std::vector<std::string> names;
    root.get("solvers", names);
    c.solvers.clear();
    for (const auto& n : names) {
      try {
        c.solvers.push_back(parse_solver_kind(n));
      } catch (const ContractError& e) {
        throw ConfigError(std::string("config: 'solvers': ") + e.what());
      }
    }
  }
  if (root.has("armijo")) {
    Section s(root.at("armijo"), "armijo");
    s.get("c1", c.armijo.c1);
    s.get("alpha_init", c.armijo.alpha_init);
    s.get("tau", c.armijo.tau);
    s.get("max_backtracks", c.armijo.max_backtracks);
    s.finish();
  }
  if (root.has("train")) {
    Section s(root.at("train"), "train");
    TrainConfig& t = c.train;
    s.get("epochs", t.epochs);
    s.get("learning_rate", t.learning_rate);
    s.get("batch_size", t.batch_size);
    if (s.has("adam")) {
      Section a(s.at("adam"), "train.adam");
      a.get("beta1", t.adam.beta1);
      a.get("beta2", t.adam.beta2);
      a.get("eps", t.adam.eps);
      a.finish();
    }
    t.gradient = parse_enum(s, "gradient", parse_gradient_method, t.gradient);
    s.get("fd_step", t.fd_step);
    s.get("alpha_init_low", t.alpha_init_low);
    s.get("alpha_init_high", t.alpha_init_high);
    s.get("divergence_db", t.divergence_db);
    s.finish();
  }
  if (root.has("eval")) {
    Section s(root.at("eval"), "eval");
    s.get("snr_db", c.eval.snr.points_db);
    s.get("eps", c.eval.eps_grid);
    s.get("robustness_snr_db", c.eval.robustness_snr_db);
    s.get("rate_blocks", c.eval.rate_blocks);
    s.get("ber_min_errors", c.eval.ber_min_errors);
    s.get("ber_max_passes", c.eval.ber_max_passes);
    s.finish();
  }
  root.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::uint64_t config_hash(const ExperimentConfig& cfg) { return fnv1a(to_json_text(cfg)); }

}  // namespace cep
