#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "sifr/dataset.hpp"
#include "sifr/rng.hpp"

namespace sifr {

enum class ExposureKind { PositionPower, PositionLogistic };

struct ExposureModel {
  ExposureKind kind = ExposureKind::PositionPower;
  double eta = 1.0;                       // position_power: p(E=1|k) = (1/k)^eta
  std::vector<double> position_logits;    // a_k; clamps to last entry beyond size
  std::vector<double> weights;            // b, aligned with g_indices
  std::vector<int> g_indices;             // feature subset g(x)
};

enum class TrustKind { Off, Bernoulli, Multiplicative };

struct TrustModel {
  TrustKind kind = TrustKind::Off;
  double beta_r = 1.0;   // bernoulli: weight on grade / g_max
  double beta_t = 1.0;   // bernoulli: weight on exp(-delta (K-1))
  double alpha = 0.6;    // multiplicative strength
  double delta = 0.3;    // positional decay
  double gamma = 1.0;    // content sensitivity on R_s
};

struct ScmConfig {
  ExposureModel exposure;
  TrustModel trust;
  double logging_score_noise = 0.1;
  double click_noise_eps = 0.1;   // base click probability at grade 0
  int cutoff = 10;                // list length shown

  std::uint64_t fingerprint() const;
};

struct Impression {
  std::string qid;
  std::string doc_id;
  int doc_index = 0;   // index within the query group
  int grade = 0;
  int position = 0;    // 1-based
  double logging_score = 0.0;
  std::uint8_t exposure = 0;   // latent E
  std::uint8_t decision = 0;   // latent D
  std::uint8_t click = 0;
  double oracle_propensity = 1.0;
  double oracle_click_prob = 0.0;
};

struct Session {
  std::uint64_t session_id = 0;
  int group_index = 0;
  std::vector<Impression> impressions;
};

struct ClickLog {
  std::vector<Session> sessions;
  std::uint64_t config_fingerprint = 0;
  std::uint64_t seed = 0;
  int n_positions = 0;  // max position that can appear (== cutoff)
  // When false, estimator-facing accessors refuse to read latent E/D.
  bool oracle = false;

  std::size_t total_impressions() const;
};

// Scores a group for logging: by default w_S . x (+ Gaussian noise); replay
// rounds substitute a trained ranker here.
using GroupScoreFn =
    std::function<std::vector<double>(const QueryGroup&, Rng&)>;

GroupScoreFn linear_logging_policy(std::vector<double> w_s, double noise);

// R_s = w_S . x + N(0, noise^2) per document.
std::vector<double> logging_scores(const QueryGroup& group, const std::vector<double>& w_s,
                                   double noise, Rng& rng);

// Positions 1..n by descending score; ties broken by ascending doc index.
std::vector<int> rank_by_scores(const std::vector<double>& scores);

double exposure_prob(const ExposureModel& model, int k, const std::vector<double>& x);

// eps + (1 - eps) (2^grade - 1) / (2^g_max - 1).
double relevance_click_prob(int grade, double eps, int g_max);

struct DecisionOutcome {
  double p_decision = 1.0;  // P(D=1 | E=1)
  double factor = 1.0;      // multiplicative click inflation, >= 1
};

DecisionOutcome decision_prob(const TrustModel& trust, int k, int grade, int g_max,
                              double r_s);

std::vector<Impression> sample_session(const QueryGroup& group, const GroupScoreFn& policy,
                                       const ScmConfig& config, int g_max, Rng& rng);

// Sessions pick queries uniformly with replacement; each session runs on the
// substream (seed, session index), so output is independent of evaluation
// order and thread count.
ClickLog sample_click_log(const Dataset& data, const GroupScoreFn& policy,
                          const ScmConfig& config, std::size_t n_sessions,
                          std::uint64_t seed, int threads = 1);

// Convenience overload using the dataset's stored logging direction.
ClickLog sample_click_log(const Dataset& data, const ScmConfig& config,
                          std::size_t n_sessions, std::uint64_t seed, int threads = 1);

// Line-oriented CSV. Latent E/D columns are emitted only when oracle is set;
// oracle propensities are always retained for audits.
void write_click_log(const ClickLog& log, std::ostream& out, bool oracle);
void save_click_log(const ClickLog& log, const std::string& path, bool oracle);
ClickLog read_click_log(std::istream& in, const Dataset& data);
ClickLog load_click_log(const std::string& path, const Dataset& data);

}  // namespace sifr
