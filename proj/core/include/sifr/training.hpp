#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sifr/dataset.hpp"
#include "sifr/estimators.hpp"
#include "sifr/leakage.hpp"
#include "sifr/ranker.hpp"
#include "sifr/scm.hpp"

namespace sifr {

enum class Objective { Naive, Ips, Snips, Dr, Sif };
enum class WeightSource { None, Oracle, RegressEm, LearnedHead };

struct TrainConfig {
  Objective objective = Objective::Ips;
  WeightSource weight_source = WeightSource::Oracle;
  bool channel_exposure = true;   // sif: penalize the exposure channel
  bool channel_decision = true;   // sif: penalize the decision channel
  bool dr_loss = false;           // pointwise doubly robust ranking loss

  Ranker::Kind ranker_kind = Ranker::Kind::Linear;
  int hidden_dim = 8;

  double lr = 0.05;
  double lr_propensity = 0.5;
  double head_l2 = 1e-3;  // on score/gmean/rank-top head weights
  int iterations = 3500;
  int batch_size = 64;

  double lambda_init_exposure = 0.0;
  double lambda_init_decision = 0.0;
  double budget_eps = 0.01;  // nats, per channel
  double eta_lambda = 0.1;
  double mi_smoothing = 0.9;

  // Phase boundaries as fractions of `iterations`: [0, p1) trains the plain
  // baseline, [p1, p2) adds the MI penalties at fixed lambda, [p2, end)
  // activates the dual updates.
  double phase1_frac = 0.2;
  double phase2_frac = 0.4;

  int trace_every = 100;
  double propensity_floor = 1e-3;
  std::uint64_t seed = 1;
};

struct TraceRecord {
  int step = 0;
  double train_loss = 0.0;
  ChannelLeakage exposure;
  ChannelLeakage decision;
  double ess = 0.0;
  double val_ndcg10 = 0.0;
  // Plug-in risk-gap certificate 2 L_max sqrt(total smoothed leakage / 2).
  double risk_bound = 0.0;
};

struct TrainTrace {
  std::vector<TraceRecord> records;
  std::size_t skipped_sessions = 0;  // sessions without clicks
};

struct TrainResult {
  Ranker ranker;
  PropensityModel propensity;
  TrainTrace trace;
};

struct TrainInputs {
  const Dataset* data = nullptr;
  const ClickLog* log = nullptr;
  // Held-out groups for the validation NDCG@10 column; may be empty.
  std::vector<const QueryGroup*> validation;
  // Feature subset for the context summary; defaults to first min(5, dim).
  std::vector<int> g_indices;
  // Per-position propensities for WeightSource::RegressEm.
  std::vector<double> regress_em;
};

// lambda <- max(0, lambda + eta (mi - eps)).
double dual_update(double lambda, double mi_smoothed, double eps, double eta_lambda);

// Weighted pairwise loss over one session: for each (clicked i, non-clicked j)
// pair, (1/e_i) softplus(s_j - s_i), normalized by the pair count. Returns the
// loss and accumulates d loss / d score into `d_scores`.
double pairwise_session_loss(std::span<const double> scores, std::span<const uint8_t> clicks,
                             std::span<const double> inv_propensity,
                             std::span<double> d_scores);

// EM alternation between per-position examination probabilities and a logistic
// relevance regressor.
struct RegressEmFit {
  std::vector<double> propensities;  // normalized so position 1 has propensity 1
  std::vector<double> relevance_w;   // logistic relevance regressor
  double relevance_b = 0.0;
  int iterations = 0;
};

RegressEmFit regress_em_fit(const Dataset& data, const ClickLog& log, int n_positions);
std::vector<double> regress_em_propensity(const Dataset& data, const ClickLog& log,
                                          int n_positions);

TrainResult train(const TrainInputs& in, const TrainConfig& cfg);

// CSV emission for a trace: leakage, ESS, lambda, and NDCG files.
void write_trace_csv(const TrainTrace& trace, const std::string& out_dir,
                     const std::string& prefix);

}  // namespace sifr
