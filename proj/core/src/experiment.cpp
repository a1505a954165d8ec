#include "sifr/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

namespace sifr {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

double to_double(const std::string& v, const std::string& key) {
  try {
    return std::stod(v);
  } catch (...) {
    throw ConfigError("bad numeric value for '" + key + "': " + v);
  }
}

long to_long(const std::string& v, const std::string& key) {
  try {
    return std::stol(v);
  } catch (...) {
    throw ConfigError("bad integer value for '" + key + "': " + v);
  }
}

std::vector<double> to_doubles(const std::string& v, const std::string& key) {
  std::vector<double> out;
  for (const auto& tok : split_list(v))
    if (!tok.empty()) out.push_back(to_double(tok, key));
  return out;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));

    if (section == "dataset") {
      if (key == "source") {
        if (val == "synth") cfg.synth = true;
        else throw ConfigError("dataset source must be 'synth' or use 'path ='");
      } else if (key == "path") {
        cfg.synth = false;
        cfg.dataset_path = val;
      } else if (key == "queries") cfg.synth_params.n_queries = static_cast<int>(to_long(val, key));
      else if (key == "docs_per_query") cfg.synth_params.docs_per_query = static_cast<int>(to_long(val, key));
      else if (key == "dim") cfg.synth_params.dim = static_cast<int>(to_long(val, key));
      else if (key == "rho") cfg.synth_params.rho = to_double(val, key);
      else if (key == "g_max") cfg.synth_params.g_max = static_cast<int>(to_long(val, key));
      else if (key == "noise") cfg.synth_params.relevance_noise = to_double(val, key);
      else if (key == "seed") cfg.synth_params.seed = static_cast<std::uint64_t>(to_long(val, key));
      else throw ConfigError("unknown [dataset] key: " + key);
    } else if (section == "scm") {
      auto& e = cfg.scm.exposure;
      auto& t = cfg.scm.trust;
      if (key == "exposure") {
        if (val == "position_power") e.kind = ExposureKind::PositionPower;
        else if (val == "position_logistic") e.kind = ExposureKind::PositionLogistic;
        else throw ConfigError("unknown exposure kind: " + val);
      } else if (key == "eta") e.eta = to_double(val, key);
      else if (key == "logits") e.position_logits = to_doubles(val, key);
      else if (key == "weights") e.weights = to_doubles(val, key);
      else if (key == "g_indices") {
        e.g_indices.clear();
        for (double v : to_doubles(val, key)) e.g_indices.push_back(static_cast<int>(v));
      } else if (key == "trust") {
        if (val == "off") t.kind = TrustKind::Off;
        else if (val == "bernoulli") t.kind = TrustKind::Bernoulli;
        else if (val == "multiplicative") t.kind = TrustKind::Multiplicative;
        else throw ConfigError("unknown trust kind: " + val);
      } else if (key == "alpha") t.alpha = to_double(val, key);
      else if (key == "delta") t.delta = to_double(val, key);
      else if (key == "gamma") t.gamma = to_double(val, key);
      else if (key == "beta_r") t.beta_r = to_double(val, key);
      else if (key == "beta_t") t.beta_t = to_double(val, key);
      else if (key == "score_noise") cfg.scm.logging_score_noise = to_double(val, key);
      else if (key == "eps") cfg.scm.click_noise_eps = to_double(val, key);
      else if (key == "cutoff") cfg.scm.cutoff = static_cast<int>(to_long(val, key));
      else throw ConfigError("unknown [scm] key: " + key);
    } else if (section == "train") {
      auto& t = cfg.train_base;
      if (key == "ranker") {
        if (val == "linear") t.ranker_kind = Ranker::Kind::Linear;
        else if (val == "mlp1") t.ranker_kind = Ranker::Kind::Mlp1;
        else throw ConfigError("unknown ranker kind: " + val);
      } else if (key == "hidden") t.hidden_dim = static_cast<int>(to_long(val, key));
      else if (key == "lr") t.lr = to_double(val, key);
      else if (key == "lr_propensity") t.lr_propensity = to_double(val, key);
      else if (key == "head_l2") t.head_l2 = to_double(val, key);
      else if (key == "iterations") t.iterations = static_cast<int>(to_long(val, key));
      else if (key == "batch") t.batch_size = static_cast<int>(to_long(val, key));
      else if (key == "budget") t.budget_eps = to_double(val, key);
      else if (key == "eta_lambda") t.eta_lambda = to_double(val, key);
      else if (key == "lambda_init") {
        t.lambda_init_exposure = to_double(val, key);
        t.lambda_init_decision = t.lambda_init_exposure;
      } else if (key == "phase1") t.phase1_frac = to_double(val, key);
      else if (key == "phase2") t.phase2_frac = to_double(val, key);
      else if (key == "trace_every") t.trace_every = static_cast<int>(to_long(val, key));
      else if (key == "val_fraction") cfg.val_fraction = to_double(val, key);
      else throw ConfigError("unknown [train] key: " + key);
    } else if (section == "run") {
      if (key == "methods") {
        cfg.methods.clear();
        for (const auto& m : split_list(val))
          if (!m.empty()) cfg.methods.push_back(m);
      } else if (key == "seeds") {
        cfg.seeds.clear();
        for (const auto& s : split_list(val))
          if (!s.empty()) cfg.seeds.push_back(static_cast<std::uint64_t>(to_long(s, key)));
      } else if (key == "sessions") cfg.sessions = static_cast<std::size_t>(to_long(val, key));
      else if (key == "cutoffs") {
        cfg.cutoffs.clear();
        for (double v : to_doubles(val, key)) cfg.cutoffs.push_back(static_cast<int>(v));
      } else if (key == "out") cfg.out_dir = val;
      else if (key == "threads") cfg.threads = static_cast<int>(to_long(val, key));
      else if (key == "replay_rounds") cfg.replay_rounds = static_cast<int>(to_long(val, key));
      else throw ConfigError("unknown [run] key: " + key);
    } else {
      throw ConfigError("key outside any known section: " + key);
    }
  }
  if (cfg.methods.empty()) cfg.methods = {"naive"};
  if (cfg.seeds.empty()) throw ConfigError("need at least one seed");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_experiment_config(in);
}

bool method_uses_learned_propensity(const std::string& m) {
  return m == "regress_em" || m == "ips_learned" || m.rfind("sif", 0) == 0;
}

TrainConfig method_train_config(const std::string& method, const TrainConfig& base) {
  TrainConfig t = base;
  t.channel_exposure = false;
  t.channel_decision = false;
  t.dr_loss = false;
  if (method == "naive") {
    t.objective = Objective::Naive;
    t.weight_source = WeightSource::None;
  } else if (method == "ips_oracle") {
    t.objective = Objective::Ips;
    t.weight_source = WeightSource::Oracle;
  } else if (method == "ips_learned") {
    t.objective = Objective::Ips;
    t.weight_source = WeightSource::RegressEm;
  } else if (method == "snips") {
    t.objective = Objective::Snips;
    t.weight_source = WeightSource::Oracle;
  } else if (method == "dr") {
    t.objective = Objective::Dr;
    t.weight_source = WeightSource::Oracle;
    t.dr_loss = true;
  } else if (method == "sif_e" || method == "sif_d" || method == "sif_ed" ||
             method == "sif_ed_dr") {
    t.objective = Objective::Sif;
    t.weight_source = WeightSource::LearnedHead;
    t.channel_exposure = method != "sif_d";
    t.channel_decision = method != "sif_e";
    t.dr_loss = method == "sif_ed_dr";
  } else if (method == "regress_em") {
    // Ranks by the EM relevance regressor; handled outside train().
    t.objective = Objective::Naive;
    t.weight_source = WeightSource::None;
    t.iterations = 0;
  } else {
    throw ConfigError("unknown method: " + method);
  }
  return t;
}

void split_dataset(const Dataset& full, double val_fraction, Dataset& train,
                   std::vector<const QueryGroup*>& val_groups) {
  train.dim = full.dim;
  train.g_max = full.g_max;
  train.norm = full.norm;
  train.logging_direction = full.logging_direction;
  train.groups.clear();
  val_groups.clear();
  if (full.groups.size() < 2 || val_fraction <= 0.0) {
    train.groups = full.groups;
    return;
  }
  std::size_t stride = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(1.0 / val_fraction)));
  for (std::size_t i = 0; i < full.groups.size(); ++i) {
    if (i % stride == stride - 1)
      val_groups.push_back(&full.groups[i]);
    else
      train.groups.push_back(full.groups[i]);
  }
  if (train.groups.empty()) {
    train.groups = full.groups;
    val_groups.clear();
  }
}

PropensityAudit audit_exposure_propensity(
    const std::vector<const QueryGroup*>& groups, const ScmConfig& scm,
    const std::vector<int>& g_indices, int cutoff,
    const std::function<double(const Document&, int)>& learned) {
  (void)g_indices;
  PropensityAudit audit;
  if (groups.empty()) throw Error("audit_exposure_propensity: empty evaluation grid");
  std::vector<double> oracle_vals, learned_vals;
  std::vector<int> positions;
  for (const auto* g : groups)
    for (const auto& d : g->docs)
      for (int k = 1; k <= cutoff; ++k) {
        oracle_vals.push_back(exposure_prob(scm.exposure, k, d.features));
        learned_vals.push_back(learned(d, k));
        positions.push_back(k);
      }
  // Normalize both sides by their position-1 mean: joint estimation only
  // identifies propensities up to scale.
  auto normalize = [&](std::vector<double>& vals) {
    double p1 = 0.0;
    std::size_t n1 = 0;
    for (std::size_t i = 0; i < vals.size(); ++i)
      if (positions[i] == 1) {
        p1 += vals[i];
        ++n1;
      }
    if (n1 > 0 && p1 > 0.0) {
      double scale = static_cast<double>(n1) / p1;
      for (auto& v : vals) v = std::clamp(v * scale, 0.0, 1.0);
    }
  };
  normalize(oracle_vals);
  normalize(learned_vals);
  audit.mae = propensity_mae(learned_vals, oracle_vals);
  audit.oracle_by_position.assign(cutoff, 0.0);
  audit.learned_by_position.assign(cutoff, 0.0);
  std::vector<double> counts(cutoff, 0.0);
  for (std::size_t i = 0; i < oracle_vals.size(); ++i) {
    audit.oracle_by_position[positions[i] - 1] += oracle_vals[i];
    audit.learned_by_position[positions[i] - 1] += learned_vals[i];
    counts[positions[i] - 1] += 1.0;
  }
  for (int k = 0; k < cutoff; ++k)
    if (counts[k] > 0) {
      audit.oracle_by_position[k] /= counts[k];
      audit.learned_by_position[k] /= counts[k];
    }
  return audit;
}

namespace {

std::vector<int> default_g_indices(const ExperimentConfig& cfg, int dim) {
  if (!cfg.scm.exposure.g_indices.empty()) return cfg.scm.exposure.g_indices;
  std::vector<int> g;
  for (int j = 0; j < std::min(5, dim); ++j) g.push_back(j);
  return g;
}

Dataset build_dataset(const ExperimentConfig& cfg) {
  if (cfg.synth) return synth_dataset(cfg.synth_params);
  Dataset ds = load_dataset(cfg.dataset_path);
  return ds;
}

struct RunContext {
  const ExperimentConfig* cfg;
  const Dataset* train_data;
  const std::vector<const QueryGroup*>* val_groups;
  std::vector<int> g_indices;
};

RunRecord execute_run(const RunContext& ctx, const std::string& method, std::uint64_t seed) {
  RunRecord rec;
  rec.method = method;
  rec.seed = seed;
  auto t0 = std::chrono::steady_clock::now();
  try {
    const ExperimentConfig& cfg = *ctx.cfg;
    ClickLog log = sample_click_log(*ctx.train_data, cfg.scm, cfg.sessions, seed,
                                    std::max(1, cfg.threads));

    TrainConfig tcfg = method_train_config(method, cfg.train_base);
    tcfg.seed = seed;

    TrainInputs inputs;
    inputs.data = ctx.train_data;
    inputs.log = &log;
    inputs.validation = *ctx.val_groups;
    inputs.g_indices = ctx.g_indices;

    Ranker ranker = Ranker::linear(ctx.train_data->dim);
    PropensityModel heads;
    TrainTrace trace;
    std::vector<double> em_vector;

    if (method == "regress_em" || method == "ips_learned") {
      RegressEmFit fit = regress_em_fit(*ctx.train_data, log, std::max(1, log.n_positions));
      em_vector = fit.propensities;
      inputs.regress_em = em_vector;
      if (method == "regress_em") {
        // Baseline: rank by the EM relevance regressor directly.
        ranker.params.assign(fit.relevance_w.begin(), fit.relevance_w.end());
        ranker.params.push_back(fit.relevance_b);
      }
    }

    if (method != "regress_em") {
      TrainResult res = train(inputs, tcfg);
      ranker = std::move(res.ranker);
      heads = std::move(res.propensity);
      trace = std::move(res.trace);
    }

    // Evaluate on the held-out groups with true relevance grades.
    std::vector<QueryGroup> val_copy;
    val_copy.reserve(ctx.val_groups->size());
    for (const auto* g : *ctx.val_groups) val_copy.push_back(*g);
    rec.metrics = evaluate_ranking(
        val_copy, [&](const Document& d) { return ranker.score(d.features); }, cfg.cutoffs,
        ctx.train_data->g_max);

    // Leakage trajectory summary.
    if (!trace.records.empty()) {
      int p1_end = static_cast<int>(tcfg.phase1_frac * tcfg.iterations);
      const TraceRecord* initial = &trace.records.front();
      for (const auto& r : trace.records)
        if (r.step >= p1_end) {
          initial = &r;
          break;
        }
      const TraceRecord& last = trace.records.back();
      rec.final_exposure = last.exposure;
      rec.final_decision = last.decision;
      rec.leakage_initial_total = initial->exposure.mi_nats + initial->decision.mi_nats;
      rec.leakage_final_total = last.exposure.mi_nats + last.decision.mi_nats;
      rec.ess_final = last.ess;
    }

    // Propensity audit for methods that learn propensities.
    if (method_uses_learned_propensity(method)) {
      std::function<double(const Document&, int)> learned;
      if (method == "regress_em" || method == "ips_learned") {
        learned = [em_vector](const Document&, int k) {
          std::size_t idx = std::min<std::size_t>(k - 1, em_vector.size() - 1);
          return em_vector.empty() ? 1.0 : em_vector[idx];
        };
      } else {
        const PropensityModel heads_copy = heads;
        const std::vector<int> g_idx = ctx.g_indices;
        learned = [heads_copy, g_idx](const Document& d, int k) {
          LeakageSample s;
          s.position = k;
          s.score = 0.0;  // marginal head: score dropped
          double acc = 0.0;
          int used = 0;
          for (int gi : g_idx)
            if (gi >= 0 && gi < static_cast<int>(d.features.size())) {
              acc += d.features[gi];
              ++used;
            }
          s.gmean = used ? acc / used : 0.0;
          return heads_copy.exposure_cond(s);
        };
      }
      auto grid = *ctx.val_groups;
      if (grid.empty())
        for (const auto& g : ctx.train_data->groups) grid.push_back(&g);
      auto audit =
          audit_exposure_propensity(grid, cfg.scm, ctx.g_indices, cfg.scm.cutoff, learned);
      rec.propensity_mae = audit.mae;
    }

    // Per-run artifacts.
    namespace fs = std::filesystem;
    std::string run_dir =
        (fs::path(cfg.out_dir) / (method + "_seed" + std::to_string(seed))).string();
    fs::create_directories(run_dir);
    if (!trace.records.empty()) write_trace_csv(trace, run_dir, "trace");
    save_ranker(ranker, run_dir + "/model.sifr",
                "method=" + method + "\nseed=" + std::to_string(seed) + "\n");
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace

std::vector<RunRecord> run_offline(const ExperimentConfig& cfg) {
  Dataset full = build_dataset(cfg);
  Dataset train_data;
  std::vector<const QueryGroup*> val_groups;
  split_dataset(full, cfg.val_fraction, train_data, val_groups);

  RunContext ctx;
  ctx.cfg = &cfg;
  ctx.train_data = &train_data;
  ctx.val_groups = &val_groups;
  ctx.g_indices = default_g_indices(cfg, full.dim);

  struct Job {
    std::string method;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& m : cfg.methods)
    for (auto s : cfg.seeds) jobs.push_back({m, s});

  std::vector<RunRecord> records(jobs.size());
  int n_threads = std::max(1, cfg.threads);
  if (n_threads == 1 || jobs.size() == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i)
      records[i] = execute_run(ctx, jobs[i].method, jobs[i].seed);
  } else {
    std::vector<std::thread> pool;
    std::size_t chunk = (jobs.size() + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      std::size_t lo = t * chunk, hi = std::min(jobs.size(), lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, lo, hi] {
        for (std::size_t i = lo; i < hi; ++i)
          records[i] = execute_run(ctx, jobs[i].method, jobs[i].seed);
      });
    }
    for (auto& th : pool) th.join();
  }
  return records;
}

std::vector<RunRecord> run_replay(const ExperimentConfig& cfg, int n_rounds) {
  if (n_rounds < 1) throw ConfigError("replay: need at least one round");
  Dataset full = build_dataset(cfg);
  Dataset train_data;
  std::vector<const QueryGroup*> val_groups;
  split_dataset(full, cfg.val_fraction, train_data, val_groups);
  std::vector<int> g_indices = default_g_indices(cfg, full.dim);

  std::vector<RunRecord> records;
  for (const auto& method : cfg.methods) {
    for (auto seed : cfg.seeds) {
      Ranker prev = Ranker::linear(train_data.dim);
      bool have_prev = false;
      for (int round = 0; round < n_rounds; ++round) {
        RunRecord rec;
        rec.method = method;
        rec.seed = seed;
        rec.round = round;
        auto t0 = std::chrono::steady_clock::now();
        try {
          GroupScoreFn policy;
          if (!have_prev) {
            if (train_data.logging_direction.empty())
              throw Error("replay: dataset has no logging direction");
            policy = linear_logging_policy(train_data.logging_direction,
                                           cfg.scm.logging_score_noise);
          } else {
            Ranker policy_ranker = prev;
            double noise = cfg.scm.logging_score_noise;
            policy = [policy_ranker, noise](const QueryGroup& g, Rng& rng) {
              std::vector<double> s(g.docs.size());
              for (std::size_t i = 0; i < g.docs.size(); ++i) {
                s[i] = policy_ranker.score(g.docs[i].features) +
                       (noise > 0 ? rng.normal(0.0, noise) : 0.0);
              }
              return s;
            };
          }
          std::uint64_t round_seed = seed * 1000003ULL + static_cast<std::uint64_t>(round);
          ClickLog log = sample_click_log(train_data, policy, cfg.scm, cfg.sessions,
                                          round_seed, std::max(1, cfg.threads));
          TrainConfig tcfg = method_train_config(method, cfg.train_base);
          tcfg.seed = round_seed;
          TrainInputs inputs;
          inputs.data = &train_data;
          inputs.log = &log;
          inputs.validation = val_groups;
          inputs.g_indices = g_indices;
          if (tcfg.weight_source == WeightSource::RegressEm)
            inputs.regress_em =
                regress_em_propensity(train_data, log, std::max(1, log.n_positions));
          TrainResult res = train(inputs, tcfg);
          prev = res.ranker;
          have_prev = true;

          std::vector<QueryGroup> val_copy;
          for (const auto* g : val_groups) val_copy.push_back(*g);
          rec.metrics = evaluate_ranking(
              val_copy, [&](const Document& d) { return res.ranker.score(d.features); },
              cfg.cutoffs, train_data.g_max);
          if (!res.trace.records.empty()) {
            rec.final_exposure = res.trace.records.back().exposure;
            rec.final_decision = res.trace.records.back().decision;
            rec.leakage_final_total =
                rec.final_exposure.mi_nats + rec.final_decision.mi_nats;
            rec.ess_final = res.trace.records.back().ess;
          }
        } catch (const std::exception& e) {
          rec.failed = true;
          rec.error = e.what();
        }
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        records.push_back(std::move(rec));
        if (records.back().failed) break;
      }
    }
  }
  return records;
}

void write_summary_csv(const std::vector<RunRecord>& records, const ExperimentConfig& cfg,
                       std::ostream& out) {
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };

  out << "method";
  for (int k : cfg.cutoffs) out << ",ndcg@" << k << "_mean,ndcg@" << k << "_std";
  for (int k : cfg.cutoffs) out << ",err@" << k << "_mean,err@" << k << "_std";
  out << ",mrr_mean,mrr_std,prop_mae_mean,leakage_final_mean,ess_final_mean,"
         "wins_vs_baseline,n_seeds,n_failed\n";

  auto mean_std = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= std::max<std::size_t>(1, v.size());
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    double sd = v.size() > 1 ? std::sqrt(var / (v.size() - 1)) : 0.0;
    return std::pair<double, double>(m, sd);
  };

  const std::string baseline = cfg.methods.empty() ? "" : cfg.methods.front();
  for (const auto& method : cfg.methods) {
    std::vector<const RunRecord*> runs;
    for (const auto& r : records)
      if (r.method == method && !r.failed) runs.push_back(&r);
    std::size_t failed = 0;
    for (const auto& r : records)
      if (r.method == method && r.failed) ++failed;

    out << method;
    for (int k : cfg.cutoffs) {
      std::vector<double> v;
      for (const auto* r : runs) {
        auto it = r->metrics.ndcg_at.find(k);
        if (it != r->metrics.ndcg_at.end()) v.push_back(it->second);
      }
      auto [m, sd] = mean_std(v);
      out << ',' << fmt(m) << ',' << fmt(sd);
    }
    for (int k : cfg.cutoffs) {
      std::vector<double> v;
      for (const auto* r : runs) {
        auto it = r->metrics.err_at.find(k);
        if (it != r->metrics.err_at.end()) v.push_back(it->second);
      }
      auto [m, sd] = mean_std(v);
      out << ',' << fmt(m) << ',' << fmt(sd);
    }
    std::vector<double> mrr, mae, leak, ess;
    for (const auto* r : runs) {
      mrr.push_back(r->metrics.mrr);
      if (r->propensity_mae >= 0.0) mae.push_back(r->propensity_mae);
      leak.push_back(r->leakage_final_total);
      ess.push_back(r->ess_final);
    }
    auto [mrr_m, mrr_sd] = mean_std(mrr);
    out << ',' << fmt(mrr_m) << ',' << fmt(mrr_sd);
    if (mae.empty())
      out << ',';
    else
      out << ',' << fmt(mean_std(mae).first);
    out << ',' << fmt(mean_std(leak).first) << ',' << fmt(mean_std(ess).first);

    // Paired sign count on NDCG at the largest cutoff vs the first method.
    int wins = 0;
    if (!cfg.cutoffs.empty() && method != baseline) {
      int k = cfg.cutoffs.back();
      for (auto seed : cfg.seeds) {
        const RunRecord* a = nullptr;
        const RunRecord* b = nullptr;
        for (const auto& r : records) {
          if (r.failed || r.seed != seed) continue;
          if (r.method == method) a = &r;
          if (r.method == baseline) b = &r;
        }
        if (a && b) {
          auto ia = a->metrics.ndcg_at.find(k);
          auto ib = b->metrics.ndcg_at.find(k);
          if (ia != a->metrics.ndcg_at.end() && ib != b->metrics.ndcg_at.end() &&
              ia->second > ib->second)
            ++wins;
        }
      }
    }
    out << ',' << wins << ',' << cfg.seeds.size() << ',' << failed << '\n';
  }
}

}  // namespace sifr
