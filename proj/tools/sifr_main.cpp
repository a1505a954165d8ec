// Command-line workbench: synthetic data, click simulation, ranker training
// with leakage budgets, metric/propensity audits, online-style replay, and the
// brute-force theorem suite.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "sifr/dataset.hpp"
#include "sifr/experiment.hpp"
#include "sifr/metrics.hpp"
#include "sifr/scm.hpp"
#include "sifr/theory.hpp"
#include "sifr/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRun = 2;
constexpr int kExitTheory = 3;

struct GlobalOpts {
  std::string config;
  std::uint64_t seed = 1;
  bool seed_set = false;
  std::string out = ".";
  bool oracle = false;
  int threads = 1;
};

sifr::ExperimentConfig load_config_or_default(const GlobalOpts& g) {
  sifr::ExperimentConfig cfg;
  if (!g.config.empty()) cfg = sifr::load_experiment_config(g.config);
  if (g.seed_set) cfg.seeds = {g.seed};
  cfg.out_dir = g.out;
  cfg.oracle = cfg.oracle || g.oracle;
  cfg.threads = std::max(cfg.threads, g.threads);
  return cfg;
}

void write_dataset_meta(const sifr::Dataset& ds, const std::string& path,
                        std::uint64_t seed) {
  json meta;
  meta["dim"] = ds.dim;
  meta["g_max"] = ds.g_max;
  meta["seed"] = seed;
  meta["logging_direction"] = ds.logging_direction;
  meta["feature_min"] = ds.norm.feature_min;
  meta["feature_max"] = ds.norm.feature_max;
  std::ofstream out(path);
  if (!out) throw sifr::Error("cannot write dataset meta: " + path);
  out << meta.dump(2) << "\n";
}

void read_dataset_meta(sifr::Dataset& ds, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sifr::Error("cannot open dataset meta: " + path);
  json meta = json::parse(in);
  if (meta.contains("logging_direction"))
    ds.logging_direction = meta["logging_direction"].get<std::vector<double>>();
  if (meta.contains("g_max")) ds.g_max = meta["g_max"].get<int>();
}

sifr::Dataset load_data_with_meta(const std::string& data_path, const std::string& meta_path) {
  sifr::Dataset ds = sifr::load_dataset(data_path);
  if (!meta_path.empty()) {
    read_dataset_meta(ds, meta_path);
  } else if (fs::exists(data_path + ".meta.json")) {
    read_dataset_meta(ds, data_path + ".meta.json");
  }
  return ds;
}

// Least-squares logging direction for datasets without one (real corpora):
// regresses the grade on features and normalizes.
std::vector<double> fit_logging_direction(const sifr::Dataset& ds) {
  int dim = ds.dim;
  std::vector<double> w(dim, 0.0);
  double lr = 0.5;
  for (int epoch = 0; epoch < 50; ++epoch) {
    std::vector<double> grad(dim, 0.0);
    std::size_t n = 0;
    for (const auto& g : ds.groups)
      for (const auto& d : g.docs) {
        double target = ds.g_max > 0 ? static_cast<double>(d.relevance) / ds.g_max : 0.0;
        double pred = 0.0;
        for (int j = 0; j < dim; ++j) pred += w[j] * d.features[j];
        double err = pred - target;
        for (int j = 0; j < dim; ++j) grad[j] += err * d.features[j];
        ++n;
      }
    for (int j = 0; j < dim; ++j) w[j] -= lr * grad[j] / static_cast<double>(n);
  }
  double norm = 0.0;
  for (double v : w) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0)
    for (auto& v : w) v /= norm;
  return w;
}

int cmd_synth(const GlobalOpts& g) {
  auto cfg = load_config_or_default(g);
  sifr::SynthParams p = cfg.synth_params;
  if (g.seed_set) p.seed = g.seed;
  sifr::Dataset ds = sifr::synth_dataset(p);
  fs::create_directories(cfg.out_dir);
  std::string data_path = (fs::path(cfg.out_dir) / "dataset.letor").string();
  sifr::save_letor(ds, data_path);
  write_dataset_meta(ds, data_path + ".meta.json", p.seed);
  std::cout << "wrote " << data_path << " (" << ds.groups.size() << " queries, dim "
            << ds.dim << ", g_max " << ds.g_max << ")\n";
  return kExitOk;
}

int cmd_simulate(const GlobalOpts& g, const std::string& data_path,
                 const std::string& meta_path, std::size_t sessions) {
  auto cfg = load_config_or_default(g);
  sifr::Dataset ds;
  if (!data_path.empty()) {
    ds = load_data_with_meta(data_path, meta_path);
    if (ds.logging_direction.empty()) ds.logging_direction = fit_logging_direction(ds);
  } else {
    ds = sifr::synth_dataset(cfg.synth_params);
  }
  if (sessions == 0) sessions = cfg.sessions;
  std::uint64_t seed = g.seed_set ? g.seed : cfg.seeds.front();
  sifr::ClickLog log = sifr::sample_click_log(ds, cfg.scm, sessions, seed, cfg.threads);
  fs::create_directories(cfg.out_dir);
  std::string path = (fs::path(cfg.out_dir) / "clicks.csv").string();
  sifr::save_click_log(log, path, cfg.oracle);
  std::cout << "wrote " << path << " (" << log.sessions.size() << " sessions, "
            << log.total_impressions() << " impressions)\n";
  return kExitOk;
}

int cmd_train(const GlobalOpts& g, const std::string& data_path, const std::string& meta_path,
              const std::string& log_path, const std::string& method) {
  auto cfg = load_config_or_default(g);
  sifr::Dataset full;
  if (!data_path.empty())
    full = load_data_with_meta(data_path, meta_path);
  else
    full = sifr::synth_dataset(cfg.synth_params);

  sifr::Dataset train_data;
  std::vector<const sifr::QueryGroup*> val_groups;
  sifr::split_dataset(full, cfg.val_fraction, train_data, val_groups);

  std::uint64_t seed = g.seed_set ? g.seed : cfg.seeds.front();
  sifr::ClickLog log;
  if (!log_path.empty()) {
    log = sifr::load_click_log(log_path, train_data);
  } else {
    log = sifr::sample_click_log(train_data, cfg.scm, cfg.sessions, seed, cfg.threads);
  }

  sifr::TrainConfig tcfg = sifr::method_train_config(method, cfg.train_base);
  tcfg.seed = seed;
  sifr::TrainInputs inputs;
  inputs.data = &train_data;
  inputs.log = &log;
  inputs.validation = val_groups;
  if (tcfg.weight_source == sifr::WeightSource::RegressEm)
    inputs.regress_em =
        sifr::regress_em_propensity(train_data, log, std::max(1, log.n_positions));

  sifr::TrainResult res = sifr::train(inputs, tcfg);
  fs::create_directories(cfg.out_dir);
  std::string model_path = (fs::path(cfg.out_dir) / "model.sifr").string();
  std::string sidecar = "method=" + method + "\nseed=" + std::to_string(seed) +
                        "\niterations=" + std::to_string(tcfg.iterations) +
                        "\nbudget=" + std::to_string(tcfg.budget_eps) + "\n";
  sifr::save_ranker(res.ranker, model_path, sidecar);
  if (!res.trace.records.empty())
    sifr::write_trace_csv(res.trace, cfg.out_dir, "trace");
  std::cout << "wrote " << model_path << "\n";
  return kExitOk;
}

int cmd_evaluate(const GlobalOpts& g, const std::string& data_path,
                 const std::string& meta_path, const std::string& model_path) {
  auto cfg = load_config_or_default(g);
  sifr::Dataset ds = load_data_with_meta(data_path, meta_path);
  sifr::Ranker r = sifr::load_ranker(model_path);
  auto rep = sifr::evaluate_ranking(
      ds.groups, [&](const sifr::Document& d) { return r.score(d.features); }, cfg.cutoffs,
      ds.g_max);
  std::printf("metric,cutoff,value\n");
  for (const auto& [k, v] : rep.ndcg_at) std::printf("ndcg,%d,%.6f\n", k, v);
  for (const auto& [k, v] : rep.err_at) std::printf("err,%d,%.6f\n", k, v);
  std::printf("mrr,,%.6f\n", rep.mrr);
  std::printf("queries,,%zu\n", rep.n_queries);
  std::printf("skipped_zero_idcg,,%zu\n", rep.n_skipped);
  return kExitOk;
}

int cmd_audit(const GlobalOpts& g, const std::string& data_path, const std::string& meta_path,
              const std::string& log_path) {
  auto cfg = load_config_or_default(g);
  sifr::Dataset ds;
  if (!data_path.empty())
    ds = load_data_with_meta(data_path, meta_path);
  else
    ds = sifr::synth_dataset(cfg.synth_params);

  sifr::ClickLog log;
  std::uint64_t seed = g.seed_set ? g.seed : cfg.seeds.front();
  if (!log_path.empty())
    log = sifr::load_click_log(log_path, ds);
  else
    log = sifr::sample_click_log(ds, cfg.scm, cfg.sessions, seed, cfg.threads);

  auto em = sifr::regress_em_propensity(ds, log, std::max(1, log.n_positions));
  std::vector<const sifr::QueryGroup*> grid;
  for (const auto& grp : ds.groups) grid.push_back(&grp);
  auto audit = sifr::audit_exposure_propensity(
      grid, cfg.scm, cfg.scm.exposure.g_indices, cfg.scm.cutoff,
      [&](const sifr::Document&, int k) {
        std::size_t idx = std::min<std::size_t>(k - 1, em.size() - 1);
        return em[idx];
      });
  std::printf("position,oracle,learned\n");
  for (std::size_t k = 0; k < audit.oracle_by_position.size(); ++k)
    std::printf("%zu,%.4f,%.4f\n", k + 1, audit.oracle_by_position[k],
                audit.learned_by_position[k]);
  std::printf("mae,,%.4f\n", audit.mae);
  return kExitOk;
}

int cmd_replay(const GlobalOpts& g, int rounds) {
  auto cfg = load_config_or_default(g);
  if (rounds <= 0) rounds = cfg.replay_rounds;
  auto records = sifr::run_replay(cfg, rounds);
  fs::create_directories(cfg.out_dir);
  std::string path = (fs::path(cfg.out_dir) / "replay.csv").string();
  std::ofstream out(path);
  out << "method,seed,round,ndcg@10,leakage_final,ess_final,failed\n";
  char buf[64];
  for (const auto& r : records) {
    double ndcg10 = 0.0;
    if (auto it = r.metrics.ndcg_at.find(10); it != r.metrics.ndcg_at.end())
      ndcg10 = it->second;
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f", ndcg10, r.leakage_final_total,
                  r.ess_final);
    out << r.method << ',' << r.seed << ',' << r.round << ',' << buf << ','
        << (r.failed ? 1 : 0) << '\n';
  }
  std::cout << "wrote " << path << "\n";
  for (const auto& r : records)
    if (r.failed) {
      std::cerr << "run failed: " << r.method << " seed " << r.seed << " round " << r.round
                << ": " << r.error << "\n";
      return kExitRun;
    }
  return kExitOk;
}

int cmd_theory_check(const GlobalOpts& g, int n) {
  auto suite = sifr::run_theory_suite(n, g.seed_set ? g.seed : 7, g.out);
  std::printf("%-26s %10s %9s %14s %9s\n", "check", "instances", "failures", "worst_slack",
              "seconds");
  bool violated = false;
  double total_s = 0.0;
  for (const auto& r : suite) {
    std::printf("%-26s %10d %9d %14.3e %9.3f %s\n", r.name.c_str(), r.instances, r.failures,
                r.worst_slack, r.seconds, r.failures == 0 ? "PASS" : "FAIL");
    violated = violated || r.failures > 0;
    total_s += r.seconds;
  }
  std::printf("total: %.3f s\n", total_s);
  return violated ? kExitTheory : kExitOk;
}

int cmd_report(const GlobalOpts& g) {
  auto cfg = load_config_or_default(g);
  auto records = sifr::run_offline(cfg);
  fs::create_directories(cfg.out_dir);
  std::string path = (fs::path(cfg.out_dir) / "summary.csv").string();
  std::ofstream out(path);
  sifr::write_summary_csv(records, cfg, out);
  std::cout << "wrote " << path << "\n";
  int failures = 0;
  for (const auto& r : records)
    if (r.failed) {
      std::cerr << "run failed: " << r.method << " seed " << r.seed << ": " << r.error << "\n";
      ++failures;
    }
  return failures == static_cast<int>(records.size()) && !records.empty() ? kExitRun : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structural information-flow ranking workbench"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config, "experiment config file");
  auto* seed_opt = app.add_option("--seed", g.seed, "master seed");
  app.add_option("--out", g.out, "output directory");
  app.add_flag("--oracle", g.oracle, "expose latent E/D columns in click logs");
  app.add_option("--threads", g.threads, "worker threads");

  std::string data_path, meta_path, log_path, model_path, method = "sif_ed";
  std::size_t sessions = 0;
  int rounds = 0, n_instances = 1000;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  auto* simulate = app.add_subcommand("simulate", "sample a click log from the SCM");
  simulate->add_option("--data", data_path, "LETOR dataset path");
  simulate->add_option("--meta", meta_path, "dataset meta json");
  simulate->add_option("--sessions", sessions, "number of sessions");
  auto* train = app.add_subcommand("train", "train a ranker on a click log");
  train->add_option("--data", data_path, "LETOR dataset path");
  train->add_option("--meta", meta_path, "dataset meta json");
  train->add_option("--log", log_path, "click log csv (simulates one when absent)");
  train->add_option("--method", method, "method name (naive, ips_oracle, sif_ed, ...)");
  auto* evaluate = app.add_subcommand("evaluate", "ranking metrics for a saved model");
  evaluate->add_option("--data", data_path, "LETOR dataset path")->required();
  evaluate->add_option("--meta", meta_path, "dataset meta json");
  evaluate->add_option("--model", model_path, "model file")->required();
  auto* audit = app.add_subcommand("audit", "propensity audit against the oracle");
  audit->add_option("--data", data_path, "LETOR dataset path");
  audit->add_option("--meta", meta_path, "dataset meta json");
  audit->add_option("--log", log_path, "click log csv");
  auto* replay = app.add_subcommand("replay", "online-style replay rounds");
  replay->add_option("--rounds", rounds, "number of rounds");
  auto* theory = app.add_subcommand("theory-check", "run the theorem suite");
  theory->add_option("--n", n_instances, "instances per check");
  auto* report = app.add_subcommand("report", "run the configured experiment grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (synth->parsed()) return cmd_synth(g);
    if (simulate->parsed()) return cmd_simulate(g, data_path, meta_path, sessions);
    if (train->parsed()) return cmd_train(g, data_path, meta_path, log_path, method);
    if (evaluate->parsed()) return cmd_evaluate(g, data_path, meta_path, model_path);
    if (audit->parsed()) return cmd_audit(g, data_path, meta_path, log_path);
    if (replay->parsed()) return cmd_replay(g, rounds);
    if (theory->parsed()) return cmd_theory_check(g, n_instances);
    if (report->parsed()) return cmd_report(g);
  } catch (const sifr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRun;
  }
  return kExitConfig;
}
