#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace sifr {

enum class Channel { Exposure, Decision };

std::string channel_name(Channel c);

// -p ln p - (1-p) ln(1-p), with 0 ln 0 = 0. Nats.
double binary_entropy(double p);

struct ChannelLeakage {
  Channel channel = Channel::Exposure;
  double mi_nats = 0.0;   // clamped at 0
  double mi_raw = 0.0;    // unclamped entropy difference, for diagnostics
  double budget_eps = 0.0;
  double lambda = 0.0;
  std::size_t n_samples = 0;
};

// One observation for the plug-in estimators: position, the score feeding the
// conditional head (logged R_s, or the current ranker score during training),
// a context summary, and the session's top-ranked scores.
struct LeakageSample {
  int position = 1;  // 1-based
  double score = 0.0;
  double gmean = 0.0;                  // mean of the g(x) feature subset
  std::array<double, 3> rank_top{};    // top-3 scores of the session
};

// Logistic heads over [position one-hot | score features | gmean]. The
// conditional exposure head sees the score; the decision head sees the top-3
// summary. Marginal probabilities are realized by averaging the conditional
// head over the empirical score distribution within each position stratum.
class PropensityModel {
 public:
  PropensityModel() = default;
  explicit PropensityModel(int n_positions);

  int n_positions() const { return n_positions_; }

  double exposure_cond(const LeakageSample& s) const;
  double decision_cond(const LeakageSample& s) const;

  // Per-sample stratum-averaged marginals; strata are capped at a fixed number
  // of representative score values, picked deterministically.
  std::vector<double> exposure_marginals(std::span<const LeakageSample> batch) const;
  std::vector<double> decision_marginals(std::span<const LeakageSample> batch) const;

  // Parameter layout (exposure): [pos_0..pos_{P-1}, w_score, w_gmean, bias].
  // Parameter layout (decision): [pos_0..pos_{P-1}, w_rt0, w_rt1, w_rt2, w_gmean, bias].
  std::vector<double>& exposure_params() { return w_exp_; }
  std::vector<double>& decision_params() { return w_dec_; }
  const std::vector<double>& exposure_params() const { return w_exp_; }
  const std::vector<double>& decision_params() const { return w_dec_; }

  double exposure_logit(const LeakageSample& s) const;
  double decision_logit(const LeakageSample& s) const;

 private:
  int n_positions_ = 0;
  std::vector<double> w_exp_;
  std::vector<double> w_dec_;
};

// Plug-in estimate of I(score; E | X, K): mean of h(marginal) - h(conditional),
// clamped at zero; the raw difference is kept for diagnostics.
ChannelLeakage exposure_leakage(std::span<const LeakageSample> batch,
                                const PropensityModel& model);

// Same construction for the decision channel with the top-k score summary.
ChannelLeakage decision_leakage(std::span<const LeakageSample> batch,
                                const PropensityModel& model);

// Leakage value plus gradients, with the marginals frozen (the penalty is a
// function of the conditional head only within a step).
struct LeakageGradient {
  double raw = 0.0;
  double clamped = 0.0;
  std::vector<double> d_score;      // d raw / d sample score (per sample)
  std::vector<double> d_rank_top;   // decision channel: 3 per sample, flattened
  std::vector<double> d_params;     // d raw / d conditional-head params
};

LeakageGradient exposure_leakage_grad(std::span<const LeakageSample> batch,
                                      const PropensityModel& model,
                                      std::span<const double> frozen_marginals);
LeakageGradient decision_leakage_grad(std::span<const LeakageSample> batch,
                                      const PropensityModel& model,
                                      std::span<const double> frozen_marginals);

// D_KL(p_obs || p_tgt) over a channel's value distribution. Requires
// p_tgt > 0 wherever p_obs > 0.
double channel_divergence(std::span<const double> p_obs, std::span<const double> p_tgt);

// Dense joint probability table over (Z, Y, W), p[(z * ny + y) * nw + w].
struct JointTable {
  int nz = 0, ny = 0, nw = 0;
  std::vector<double> p;

  double at(int z, int y, int w) const { return p[(static_cast<std::size_t>(z) * ny + y) * nw + w]; }
  double& at(int z, int y, int w) { return p[(static_cast<std::size_t>(z) * ny + y) * nw + w]; }
};

// Exact I(Z; Y | W) in nats. The table must be non-negative and sum to 1
// within 1e-9.
double cmi_discrete(const JointTable& joint);

}  // namespace sifr
