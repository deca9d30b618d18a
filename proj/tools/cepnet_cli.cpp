// Command-line driver: gen-data, train, eval, bench.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cepnet/channel.hpp"
#include "cepnet/eval.hpp"
#include "cepnet/experiment.hpp"
#include "cepnet/learning.hpp"
#include "csv_util.hpp"

namespace fs = std::filesystem;
using namespace cep;

namespace {

struct Options {
  std::string config;
  std::string params;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

struct Run {
  std::string command;
  ExperimentConfig cfg;
  fs::path out;
  unsigned threads = 1;
  std::string started;
  nlohmann::ordered_json dataset_hashes = nlohmann::ordered_json::object();
  std::vector<std::string> outputs;

  void write(const std::string& rel, const std::string& content) {
    csv::write_atomic(out / rel, content);
    outputs.push_back(rel);
  }
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

fs::path data_dir(const Run& r) { return r.out / "data"; }

// Everything that can be checked without touching the output directory.
Run prepare(const std::string& command, const Options& o) {
  Run r;
  r.command = command;
  r.cfg = load_config(o.config);
  if (o.seed) r.cfg.seed = *o.seed;
  if (!o.out.empty()) r.cfg.output_dir = o.out;
  r.cfg.validate();
  r.out = r.cfg.output_dir;
  r.threads = o.threads == 0 ? default_threads() : o.threads;
  r.started = utc_now();
  return r;
}

void finish(Run& r) {
  nlohmann::ordered_json m;
  m["command"] = r.command;
  m["code_version"] = kCodeVersion;
  m["config_hash"] = hex64(config_hash(r.cfg));
  m["config"] = nlohmann::ordered_json::parse(to_json_text(r.cfg));
  m["dataset_hashes"] = r.dataset_hashes;
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const auto& rel : r.outputs) {
    if (!fs::exists(r.out / rel)) throw IoError("manifest: listed output '" + rel + "' is missing");
    files.push_back({{"path", rel}, {"fnv1a", hex64(fnv1a(csv::read_all(r.out / rel)))}});
  }
  m["outputs"] = files;
  csv::write_atomic(r.out / "manifests" / (r.command + ".json"), m.dump(2) + "\n");
  nlohmann::ordered_json ts{{"command", r.command}, {"started", r.started}, {"finished", utc_now()}};
  csv::write_atomic(r.out / "manifests" / (r.command + ".timestamps.json"), ts.dump(2) + "\n");
}

// Dataset metadata must agree with the config that is about to use it.
DatasetMeta checked_meta(const Run& r) {
  const DatasetMeta meta = read_dataset_meta(data_dir(r));
  const ExperimentConfig& c = r.cfg;
  const bool same = meta.kind == c.channel_kind && meta.channel.antennas == c.channel.antennas &&
                    meta.channel.users == c.channel.users && meta.channel.paths == c.channel.paths &&
                    meta.channel.spacing_ratio == c.channel.spacing_ratio && meta.seed == c.data_seed() &&
                    meta.sizes.train == c.sizes.train && meta.sizes.validation == c.sizes.validation &&
                    meta.sizes.test == c.sizes.test;
  if (!same)
    throw ConfigError("dataset in '" + data_dir(r).string() +
                      "' was generated from a different configuration; rerun gen-data");
  return meta;
}

Dataset load_split(Run& r, const DatasetMeta& meta, const std::string& role) {
  Dataset d = read_dataset_split(data_dir(r), role, meta);
  r.dataset_hashes[role] = hex64(d.hash());
  return d;
}

std::optional<CepnetParams> load_params(const Run& r, const Options& o) {
  if (!r.cfg.uses_cepnet()) return std::nullopt;
  const fs::path p = o.params.empty() ? r.out / "params.csv" : fs::path(o.params);
  ParamsFileHeader header;
  CepnetParams params = read_params_csv(p, &header);
  if (static_cast<int>(params.units()) != r.cfg.units)
    throw ConfigError("parameter file '" + p.string() + "' has K=" + std::to_string(params.units()) +
                      " but the config has K=" + std::to_string(r.cfg.units));
  if (header.init != r.cfg.init)
    throw ConfigError("parameter file '" + p.string() + "' was trained with x0_policy=" + to_string(header.init) +
                      " but the config has x0_policy=" + to_string(r.cfg.init));
  return params;
}

int cmd_gen_data(const Options& o) {
  Run r = prepare("gen-data", o);
  const DatasetSplits splits =
      build_dataset(r.cfg.channel_kind, r.cfg.sizes, r.cfg.channel, r.cfg.data_seed(), r.threads);
  write_dataset(data_dir(r), splits);
  for (const auto* d : {&splits.train, &splits.validation, &splits.test}) {
    r.dataset_hashes[d->role] = hex64(d->hash());
    r.outputs.push_back("data/" + split_file_name(d->role));
  }
  r.outputs.push_back("data/meta.csv");
  finish(r);
  std::cout << "wrote " << splits.train.size() << "/" << splits.validation.size() << "/" << splits.test.size()
            << " samples (" << to_string(r.cfg.channel_kind) << ") to " << data_dir(r).string() << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  Run r = prepare("train", o);
  const TrainConfig tc = r.cfg.resolved_train(r.threads);
  std::optional<CepnetParams> start;
  if (!o.params.empty()) {
    ParamsFileHeader header;
    start = read_params_csv(o.params, &header);
    if (static_cast<int>(start->units()) != r.cfg.units)
      throw ConfigError("resume file '" + o.params + "' has K=" + std::to_string(start->units()) +
                        " but the config has K=" + std::to_string(r.cfg.units));
    if (header.init != r.cfg.init)
      throw ConfigError("resume file '" + o.params + "' was trained with x0_policy=" + to_string(header.init) +
                        " but the config has x0_policy=" + to_string(r.cfg.init));
  }
  const DatasetMeta meta = checked_meta(r);
  const Dataset train_set = load_split(r, meta, "train");
  const Dataset val_set = load_split(r, meta, "val");
  tc.validate(train_set.size());

  std::cout << "training K=" << tc.units << " on " << train_set.size() << " samples, " << tc.epochs << " epochs"
            << std::endl;
  const TrainResult res = train(train_set, val_set, tc, start, [](const EpochRecord& e) {
    std::cout << "epoch " << e.epoch << ": train " << e.train_epoch_db << " dB, val " << e.val_db << " dB (best "
              << e.best_val_db << ")" << std::endl;
  });
  const ParamsFileHeader header{r.cfg.init, tc.seed};
  r.write("params.csv", params_csv(res.best, header));
  r.write("params_last.csv", params_csv(res.last, header));
  r.write("history.csv", history_csv(res));
  finish(r);

  std::cout << "initial loss: train " << res.initial_train_db << " dB, val " << res.initial_val_db << " dB\n";
  std::cout << "best validation loss " << (res.history.empty() ? res.initial_val_db : res.history.back().best_val_db)
            << " dB; parameters in " << (r.out / "params.csv").string() << "\n";
  return 0;
}

struct Prepared {
  Run run;
  Dataset test;
  std::vector<Precoder> precoders;
};

Prepared prepare_eval(const std::string& command, const Options& o) {
  Prepared p{prepare(command, o), {}, {}};
  const std::optional<CepnetParams> params = load_params(p.run, o);
  p.precoders = p.run.cfg.precoders(params);
  const DatasetMeta meta = checked_meta(p.run);
  p.test = load_split(p.run, meta, "test");
  return p;
}

int cmd_eval(const Options& o) {
  Prepared p = prepare_eval("eval", o);
  Run& r = p.run;
  const EvalOptions eo = r.cfg.eval_options(r.threads);
  std::vector<PrecodedSet> sets;
  for (const auto& pc : p.precoders) sets.push_back(precode_dataset(pc, p.test, eo));

  const MetricReport mui = mui_report(sets);
  const MetricReport rate = rate_vs_snr(sets, r.cfg.eval.snr, eo);
  const MetricReport ber = ber_vs_snr(sets, r.cfg.eval.snr, eo);
  r.write("eval/mui.csv", mui.to_csv());
  r.write("eval/rate_vs_snr.csv", rate.to_csv());
  r.write("eval/ber_vs_snr.csv", ber.to_csv());
  std::cout << kReportConvention << "\n\n" << mui.to_table() << "\n" << rate.to_table() << "\n" << ber.to_table();
  if (!r.cfg.eval.eps_grid.empty()) {
    const MetricReport rob =
        robustness_sweep(p.precoders, p.test, r.cfg.eval.eps_grid, r.cfg.eval.robustness_snr_db, eo);
    r.write("eval/robustness.csv", rob.to_csv());
    std::cout << "\n" << rob.to_table();
  }
  finish(r);
  return 0;
}

int cmd_bench(const Options& o) {
  Prepared p = prepare_eval("bench", o);
  Run& r = p.run;
  const EvalOptions eo = r.cfg.eval_options(r.threads);
  std::vector<PrecodedSet> sets;
  for (const auto& pc : p.precoders) sets.push_back(precode_dataset(pc, p.test, eo));
  const ComplexityReport rep = complexity_report(sets);
  r.write("bench/complexity.csv", rep.to_csv(false));
  r.write("bench/timing.csv", rep.to_csv(true));
  finish(r);
  std::cout << rep.to_table();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constant-envelope precoding: dataset generation, CEPNet training, evaluation"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub, bool with_params) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    if (with_params) sub->add_option("--params", o.params, "CEPNet parameter CSV");
    sub->add_option("--out", o.out, "output directory (overrides output_dir)");
    sub->add_option("--seed", o.seed, "master seed (overrides seed)");
    sub->add_option("--threads", o.threads, "worker threads (default: hardware concurrency)");
  };
  auto* gen = app.add_subcommand("gen-data", "generate train/val/test datasets");
  add_common(gen, false);
  auto* tr = app.add_subcommand("train", "train CEPNet (--params resumes from a saved file)");
  add_common(tr, true);
  auto* ev = app.add_subcommand("eval", "MUI, rate, BER and robustness reports on the test set");
  add_common(ev, true);
  auto* be = app.add_subcommand("bench", "per-solve operation counts and timings");
  add_common(be, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen_data(o);
    if (*tr) return cmd_train(o);
    if (*ev) return cmd_eval(o);
    if (*be) return cmd_bench(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
